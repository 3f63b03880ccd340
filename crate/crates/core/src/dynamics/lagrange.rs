use nalgebra::{DMatrix, DVector};

use super::ControlProblem;
use crate::error::{Error, Result};

/// The endpoint Lagrangian `L(y0, yT; l) = sum_c l_c Phi_c(y0, yT)` with its
/// first and covariant second derivatives at a pair of endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangeData {
    pub value: f64,
    /// `d_1 L`, a covector at `y0`.
    pub d1: DVector<f64>,
    /// `d_2 L`, a covector at `yT`.
    pub d2: DVector<f64>,
    /// `∇²_1 L = ∂²_{11} L - Γ(y0)^k_ab ∂_k L`.
    pub h11: DMatrix<f64>,
    /// `∇_1∇_2 L(X0, XT) = X0^T h12 XT`.
    pub h12: DMatrix<f64>,
    /// `∇²_2 L`.
    pub h22: DMatrix<f64>,
}

impl LagrangeData {
    pub fn new(p: &ControlProblem, y0: &DVector<f64>, yt: &DVector<f64>, ell: &[f64]) -> Result<Self> {
        let n = p.state_dim();
        if ell.len() != p.num_multipliers() {
            return Err(Error::dim("multiplier", p.num_multipliers(), ell.len()));
        }
        let mut z = y0.as_slice().to_vec();
        z.extend_from_slice(yt.as_slice());
        let phi = p.endpoint.eval(0.0, &z);
        let jac = p.endpoint.jacobian(0.0, &z);
        let hess = p.endpoint.hessians(0.0, &z);
        let ellv = DVector::from_column_slice(ell);
        let grad = jac.transpose() * &ellv;
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for (c, hc) in hess.iter().enumerate() {
            if ell[c] != 0.0 {
                h += hc * ell[c];
            }
        }
        let d1 = grad.rows(0, n).into_owned();
        let d2 = grad.rows(n, n).into_owned();
        let mut h11 = h.view((0, 0), (n, n)).into_owned();
        let h12 = h.view((0, n), (n, n)).into_owned();
        let mut h22 = h.view((n, n), (n, n)).into_owned();
        if !p.chart.is_flat() {
            let g0 = p.chart.christoffel(y0.as_slice())?;
            let gt = p.chart.christoffel(yt.as_slice())?;
            for a in 0..n {
                for b in 0..n {
                    for k in 0..n {
                        h11[(a, b)] -= g0.get(k, a, b) * d1[k];
                        h22[(a, b)] -= gt.get(k, a, b) * d2[k];
                    }
                }
            }
        }
        Ok(LagrangeData {
            value: ellv.dot(&phi),
            d1,
            d2,
            h11,
            h12,
            h22,
        })
    }

    /// `½∇²_1 L(X0, X0) + ∇_1∇_2 L(XT, X0) + ½∇²_2 L(XT, XT)` split into its
    /// three parts.
    pub fn second_order_terms(&self, x0: &DVector<f64>, xt: &DVector<f64>) -> [f64; 3] {
        [
            0.5 * x0.dot(&(&self.h11 * x0)),
            x0.dot(&(&self.h12 * xt)),
            0.5 * xt.dot(&(&self.h22 * xt)),
        ]
    }
}

/// `∇_1 Phi_c(X0) + ∇_2 Phi_c(XT)` for every endpoint component `c`.
pub fn endpoint_rows(p: &ControlProblem, y0: &DVector<f64>, yt: &DVector<f64>, x0: &DVector<f64>, xt: &DVector<f64>) -> DVector<f64> {
    let mut z = y0.as_slice().to_vec();
    z.extend_from_slice(yt.as_slice());
    let jac = p.endpoint.jacobian(0.0, &z);
    let mut x = x0.as_slice().to_vec();
    x.extend_from_slice(xt.as_slice());
    jac * DVector::from_vec(x)
}
