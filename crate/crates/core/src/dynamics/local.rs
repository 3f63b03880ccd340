//! Coordinate and covariant derivatives of the dynamics at one point.

use nalgebra::{DMatrix, DVector};

use super::ControlProblem;
use crate::error::Result;
use crate::geometry::{Christoffel, ChristoffelPartials, Curvature};

pub(crate) struct Local {
    n: usize,
    pub f: DVector<f64>,
    pub fy: DMatrix<f64>,
    pub fu: DMatrix<f64>,
    pub gam: Christoffel,
    flat: bool,
    // Filled by `second`.
    hess: Vec<DMatrix<f64>>,
    dgam: Option<ChristoffelPartials>,
    curv: Option<Curvature>,
}

impl Local {
    pub fn first(p: &ControlProblem, t: f64, y: &[f64], u: &[f64]) -> Result<Local> {
        let n = y.len();
        let mut z = Vec::with_capacity(n + u.len());
        z.extend_from_slice(y);
        z.extend_from_slice(u);
        let f = p.dynamics.eval(t, &z);
        let jac = p.dynamics.jacobian(t, &z);
        let flat = p.chart.is_flat();
        let gam = if flat {
            Christoffel::zeros(n)
        } else {
            p.chart.christoffel(y)?
        };
        Ok(Local {
            n,
            f,
            fy: jac.columns(0, n).into_owned(),
            fu: jac.columns(n, u.len()).into_owned(),
            gam,
            flat,
            hess: vec![],
            dgam: None,
            curv: None,
        })
    }

    pub fn second(p: &ControlProblem, t: f64, y: &[f64], u: &[f64]) -> Result<Local> {
        let mut l = Self::first(p, t, y, u)?;
        let mut z = y.to_vec();
        z.extend_from_slice(u);
        l.hess = p.dynamics.hessians(t, &z);
        if !l.flat {
            let dgam = p.chart.christoffel_partials(y)?;
            l.curv = Some(Curvature::from_christoffel(&l.gam, &dgam));
            l.dgam = Some(dgam);
        }
        Ok(l)
    }

    /// `∇_x f(X)`: `f_y X + Γ(X, f)`.
    pub fn cov_x(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.fy * x;
        if !self.flat {
            out += self.gam.contract(x.as_slice(), self.f.as_slice());
        }
        out
    }

    /// Matrix of `∇_x f`: `A^k_i = ∂_i f^k + Γ^k_il f^l`.
    pub fn cov_x_matrix(&self) -> DMatrix<f64> {
        if self.flat {
            self.fy.clone()
        } else {
            &self.fy + self.gam.along(self.f.as_slice())
        }
    }

    /// `Γ(f, X)`, the connection term of the covariant time derivative.
    pub fn connection(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.flat {
            DVector::zeros(self.n)
        } else {
            self.gam.contract(self.f.as_slice(), x.as_slice())
        }
    }

    /// `∇_i ∇_j f^k` as one `n x n` matrix per `k`.
    pub fn cov_xx_tensor(&self) -> Vec<DMatrix<f64>> {
        let n = self.n;
        let mut out: Vec<DMatrix<f64>> = (0..n)
            .map(|k| self.hess[k].view((0, 0), (n, n)).into_owned())
            .collect();
        if self.flat {
            return out;
        }
        let g = &self.gam;
        let dg = self.dgam.as_ref().expect("second-order data");
        let f = &self.f;
        // T^k_j = ∂_j f^k + Γ^k_jl f^l
        let tmat = self.cov_x_matrix();
        for (k, ok) in out.iter_mut().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.0;
                    for l in 0..n {
                        v += dg[i].get(k, j, l) * f[l];
                        v += g.get(k, j, l) * self.fy[(l, i)];
                        v += g.get(k, i, l) * tmat[(l, j)];
                        v -= g.get(l, i, j) * tmat[(k, l)];
                    }
                    ok[(i, j)] += v;
                }
            }
        }
        out
    }

    /// `∇²_x f(X, X)`.
    pub fn cov_xx(&self, x: &DVector<f64>) -> DVector<f64> {
        let t = self.cov_xx_tensor();
        DVector::from_iterator(self.n, t.iter().map(|m| x.dot(&(m * x))))
    }

    /// `∂_u ∂_y f^k` as one `n x m` matrix per `k`.
    pub fn mixed(&self, k: usize) -> DMatrix<f64> {
        let n = self.n;
        let m = self.fu.ncols();
        self.hess[k].view((0, n), (n, m)).into_owned()
    }

    /// `∇_u∇_x f(X, v)^k = ∂_u∂_i f^k v X^i + Γ^k_il X^i (f_u v)^l`.
    pub fn cov_ux(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::from_iterator(self.n, (0..self.n).map(|k| x.dot(&(self.mixed(k) * v))));
        if !self.flat {
            let fuv = &self.fu * v;
            out += self.gam.contract(x.as_slice(), fuv.as_slice());
        }
        out
    }

    /// `∂²_u f(v, v)`.
    pub fn uu(&self, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let m = v.len();
        DVector::from_iterator(
            n,
            (0..n).map(|k| {
                let h = self.hess[k].view((n, n), (m, m));
                v.dot(&(h * v))
            }),
        )
    }

    pub fn uu_matrix(&self, k: usize) -> DMatrix<f64> {
        let n = self.n;
        let m = self.fu.ncols();
        self.hess[k].view((n, n), (m, m)).into_owned()
    }

    /// `R(X, f)X`.
    pub fn curvature_term(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.curv {
            Some(r) => r.apply(x.as_slice(), self.f.as_slice(), x.as_slice()),
            None => DVector::zeros(self.n),
        }
    }
}
