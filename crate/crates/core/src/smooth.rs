//! Smooth maps `R^in -> R^out` (optionally time dependent) with first and
//! second derivatives.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{Binding, Expr};

/// Relative step for first-derivative central differences.
pub const FD_STEP: f64 = 1e-6;
/// Relative step for second-derivative central differences.
pub const FD_STEP2: f64 = 1e-4;

pub trait SmoothMap: Send + Sync + fmt::Debug {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, t: f64, z: &[f64]) -> DVector<f64>;

    /// `output_dim x input_dim` Jacobian.
    fn jacobian(&self, t: f64, z: &[f64]) -> DMatrix<f64> {
        fd_jacobian(self, t, z)
    }

    /// One symmetric `input_dim x input_dim` Hessian per output.
    fn hessians(&self, t: f64, z: &[f64]) -> Vec<DMatrix<f64>> {
        fd_hessians(self, t, z)
    }
}

pub fn fd_jacobian<M: SmoothMap + ?Sized>(map: &M, t: f64, z: &[f64]) -> DMatrix<f64> {
    let n = map.input_dim();
    let mut jac = DMatrix::zeros(map.output_dim(), n);
    let mut zp = z.to_vec();
    for i in 0..n {
        let h = FD_STEP * (1.0 + z[i].abs());
        zp[i] = z[i] + h;
        let fp = map.eval(t, &zp);
        zp[i] = z[i] - h;
        let fm = map.eval(t, &zp);
        zp[i] = z[i];
        jac.set_column(i, &((fp - fm) / (2.0 * h)));
    }
    jac
}

pub fn fd_hessians<M: SmoothMap + ?Sized>(map: &M, t: f64, z: &[f64]) -> Vec<DMatrix<f64>> {
    let n = map.input_dim();
    let q = map.output_dim();
    let mut out = vec![DMatrix::zeros(n, n); q];
    let f0 = map.eval(t, z);
    let mut zp = z.to_vec();
    let steps: Vec<f64> = z.iter().map(|x| FD_STEP2 * (1.0 + x.abs())).collect();
    for i in 0..n {
        let hi = steps[i];
        zp[i] = z[i] + hi;
        let fp = map.eval(t, &zp);
        zp[i] = z[i] - hi;
        let fm = map.eval(t, &zp);
        zp[i] = z[i];
        for c in 0..q {
            out[c][(i, i)] = (fp[c] - 2.0 * f0[c] + fm[c]) / (hi * hi);
        }
        for j in 0..i {
            let hj = steps[j];
            let mut corner = |si: f64, sj: f64| {
                zp[i] = z[i] + si * hi;
                zp[j] = z[j] + sj * hj;
                let v = map.eval(t, &zp);
                zp[i] = z[i];
                zp[j] = z[j];
                v
            };
            let fpp = corner(1.0, 1.0);
            let fpm = corner(1.0, -1.0);
            let fmp = corner(-1.0, 1.0);
            let fmm = corner(-1.0, -1.0);
            for c in 0..q {
                let v = (fpp[c] - fpm[c] - fmp[c] + fmm[c]) / (4.0 * hi * hj);
                out[c][(i, j)] = v;
                out[c][(j, i)] = v;
            }
        }
    }
    out
}

/// A map given by expressions, with derivatives obtained symbolically.
#[derive(Clone, Debug)]
pub struct ExprMap {
    input_dim: usize,
    exprs: Vec<Expr>,
    grads: Vec<Vec<Expr>>,
    // Lower triangle, row-major: entry (i, j) with j <= i at i*(i+1)/2 + j.
    hess: Vec<Vec<Expr>>,
}

impl ExprMap {
    /// Parses one expression per output. `vars` name the input slots; the
    /// optional `time` name refers to the time argument; `consts` are
    /// substituted as numbers.
    pub fn parse(
        sources: &[String],
        vars: &[String],
        time: Option<&str>,
        consts: &[(String, f64)],
    ) -> Result<ExprMap> {
        let n = vars.len();
        let resolve = |name: &str| {
            if let Some(i) = vars.iter().position(|v| v == name) {
                return Some(Binding::Var(i));
            }
            if time == Some(name) {
                return Some(Binding::Var(n));
            }
            consts
                .iter()
                .find(|(c, _)| c == name)
                .map(|(_, v)| Binding::Const(*v))
        };
        let exprs = sources
            .iter()
            .map(|s| Expr::parse(s, &resolve))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExprMap::from_exprs(n, exprs))
    }

    /// Builds from already parsed expressions over slots `0..input_dim`, with
    /// slot `input_dim` holding time.
    pub fn from_exprs(input_dim: usize, exprs: Vec<Expr>) -> ExprMap {
        let grads: Vec<Vec<Expr>> = exprs
            .iter()
            .map(|e| (0..input_dim).map(|i| e.derivative(i)).collect())
            .collect();
        let hess = grads
            .iter()
            .map(|g| {
                let mut h = Vec::with_capacity(input_dim * (input_dim + 1) / 2);
                for i in 0..input_dim {
                    for j in 0..=i {
                        h.push(g[i].derivative(j));
                    }
                }
                h
            })
            .collect();
        ExprMap {
            input_dim,
            exprs,
            grads,
            hess,
        }
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    fn slots(&self, t: f64, z: &[f64]) -> Vec<f64> {
        debug_assert_eq!(z.len(), self.input_dim);
        let mut v = Vec::with_capacity(z.len() + 1);
        v.extend_from_slice(z);
        v.push(t);
        v
    }
}

impl SmoothMap for ExprMap {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.exprs.len()
    }

    fn eval(&self, t: f64, z: &[f64]) -> DVector<f64> {
        let s = self.slots(t, z);
        DVector::from_iterator(self.exprs.len(), self.exprs.iter().map(|e| e.eval(&s)))
    }

    fn jacobian(&self, t: f64, z: &[f64]) -> DMatrix<f64> {
        let s = self.slots(t, z);
        DMatrix::from_fn(self.exprs.len(), self.input_dim, |c, i| {
            self.grads[c][i].eval(&s)
        })
    }

    fn hessians(&self, t: f64, z: &[f64]) -> Vec<DMatrix<f64>> {
        let s = self.slots(t, z);
        let n = self.input_dim;
        self.hess
            .iter()
            .map(|h| {
                let mut m = DMatrix::zeros(n, n);
                let mut k = 0;
                for i in 0..n {
                    for j in 0..=i {
                        let v = h[k].eval(&s);
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                        k += 1;
                    }
                }
                m
            })
            .collect()
    }
}

type EvalFn = dyn Fn(f64, &[f64]) -> DVector<f64> + Send + Sync;

/// A map given by a closure; derivatives by central differences.
#[derive(Clone)]
pub struct FnMap {
    input_dim: usize,
    output_dim: usize,
    f: Arc<EvalFn>,
}

impl FnMap {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        f: impl Fn(f64, &[f64]) -> DVector<f64> + Send + Sync + 'static,
    ) -> FnMap {
        FnMap {
            input_dim,
            output_dim,
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnMap({} -> {})", self.input_dim, self.output_dim)
    }
}

impl SmoothMap for FnMap {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn eval(&self, t: f64, z: &[f64]) -> DVector<f64> {
        (self.f)(t, z)
    }
}

/// Largest relative disagreement between a map's own derivatives and central
/// differences at the given probes. Probes where the map is not finite are
/// skipped.
pub fn derivative_disagreement(map: &dyn SmoothMap, probes: &[(f64, Vec<f64>)]) -> f64 {
    let mut worst: f64 = 0.0;
    for (t, z) in probes {
        if !map.eval(*t, z).iter().all(|v| v.is_finite()) {
            continue;
        }
        let j = map.jacobian(*t, z);
        let jf = fd_jacobian(map, *t, z);
        let scale = 1.0 + jf.amax();
        worst = worst.max((j - jf).amax() / scale);
        let h = map.hessians(*t, z);
        let hf = fd_hessians(map, *t, z);
        for (a, b) in h.iter().zip(&hf) {
            let scale = 1.0 + b.amax();
            worst = worst.max((a - b).amax() / scale);
        }
    }
    if worst.is_nan() {
        f64::INFINITY
    } else {
        worst
    }
}

/// Checks derivatives at `count` seeded random probes in the box
/// `center +- radius` (and `t` in `[0, t_max]`). Fails with an input error
/// naming `what` if the disagreement exceeds `1e-4`.
pub fn validate_map(
    map: &dyn SmoothMap,
    what: &str,
    center: &[f64],
    radius: f64,
    t_max: f64,
    count: usize,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let probes: Vec<(f64, Vec<f64>)> = (0..count)
        .map(|_| {
            let t = rng.random::<f64>() * t_max;
            let z = center
                .iter()
                .map(|c| c + radius * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            (t, z)
        })
        .collect();
    let worst = derivative_disagreement(map, &probes);
    if worst > 1e-4 {
        return Err(Error::input(
            what,
            format!("derivatives disagree with finite differences (relative {worst:e})"),
        ));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expr_map_derivatives_agree_with_differences() {
        let m = ExprMap::parse(
            &["y1*u1 + sin(t*y2)".into(), "y1^2*y2 - 3*u1^3".into()],
            &["y1".into(), "y2".into(), "u1".into()],
            Some("t"),
            &[],
        )
        .unwrap();
        let w = validate_map(&m, "f", &[0.3, -0.2, 0.5], 1.0, 1.0, 20).unwrap();
        assert!(w < 1e-6, "{w}");
        let z = [0.3, -0.2, 0.5];
        assert!((m.eval(0.5, &z)[0] - (0.15 + (-0.1f64).sin())).abs() < 1e-15);
    }

    #[test]
    fn fn_map_uses_differences() {
        let m = FnMap::new(2, 1, |_, z| DVector::from_vec(vec![z[0] * z[0] * z[1]]));
        let j = m.jacobian(0.0, &[1.0, 2.0]);
        assert!((j[(0, 0)] - 4.0).abs() < 1e-8);
        assert!((j[(0, 1)] - 1.0).abs() < 1e-8);
        let h = m.hessians(0.0, &[1.0, 2.0]);
        assert!((h[0][(0, 0)] - 4.0).abs() < 1e-5);
        assert!((h[0][(0, 1)] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn validation_rejects_wrong_derivatives() {
        #[derive(Debug)]
        struct Liar;
        impl SmoothMap for Liar {
            fn input_dim(&self) -> usize {
                1
            }
            fn output_dim(&self) -> usize {
                1
            }
            fn eval(&self, _: f64, z: &[f64]) -> DVector<f64> {
                DVector::from_vec(vec![z[0] * z[0]])
            }
            fn jacobian(&self, _: f64, z: &[f64]) -> DMatrix<f64> {
                DMatrix::from_element(1, 1, 3.0 * z[0])
            }
        }
        assert!(validate_map(&Liar, "liar", &[1.0], 0.5, 0.0, 20).is_err());
    }
}
