use nalgebra::{DMatrix, DVector};

use super::local::Local;
use super::ControlProblem;
use crate::error::{Error, Result};
use crate::geometry::{exp_map, geodesic, parallel_transport, same_base, CotangentVector, MusicalDual, TangentVector};

/// `H(t, y, p, u) = p(f(t, y, u))`.
pub fn hamiltonian(prob: &ControlProblem, t: f64, y: &DVector<f64>, p: &CotangentVector, u: &DVector<f64>) -> Result<f64> {
    if !same_base(y, &p.base) {
        return Err(Error::BasePointMismatch);
    }
    Ok(p.components.dot(&prob.eval_dynamics(t, y.as_slice(), u.as_slice())))
}

/// First and second derivatives of the Hamiltonian; `x` derivatives are
/// covariant.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianBlocks {
    /// `∇_u H`, length `m`.
    pub grad_u: DVector<f64>,
    /// `∇_x H` as a covector, length `n`.
    pub grad_x: DVector<f64>,
    /// `∇²_x H(X, X) = X^T hess_xx X`.
    pub hess_xx: DMatrix<f64>,
    /// `∇_u∇_x H(X, V) = X^T hess_ux V`, `n x m`.
    pub hess_ux: DMatrix<f64>,
    /// `∇²_u H(V, V) = V^T hess_uu V`.
    pub hess_uu: DMatrix<f64>,
}

pub fn hamiltonian_blocks(
    prob: &ControlProblem,
    t: f64,
    y: &DVector<f64>,
    p: &CotangentVector,
    u: &DVector<f64>,
) -> Result<HamiltonianBlocks> {
    if !same_base(y, &p.base) {
        return Err(Error::BasePointMismatch);
    }
    let l = Local::second(prob, t, y.as_slice(), u.as_slice())?;
    Ok(blocks_from_local(&l, &p.components))
}

pub(crate) fn blocks_from_local(l: &Local, p: &DVector<f64>) -> HamiltonianBlocks {
    let n = p.len();
    let m = l.fu.ncols();
    let tensor = l.cov_xx_tensor();
    let mut hess_xx = DMatrix::zeros(n, n);
    let mut hess_ux = DMatrix::zeros(n, m);
    let mut hess_uu = DMatrix::zeros(m, m);
    for k in 0..n {
        if p[k] == 0.0 {
            continue;
        }
        hess_xx += &tensor[k] * p[k];
        hess_ux += l.mixed(k) * p[k];
        hess_uu += l.uu_matrix(k) * p[k];
    }
    // Connection part of ∇_u∇_x: p_k Γ^k_il (f_u)^l_a.
    let pg = DMatrix::from_fn(n, n, |i, lidx| (0..n).map(|k| p[k] * l.gam.get(k, i, lidx)).sum::<f64>());
    hess_ux += pg * &l.fu;
    HamiltonianBlocks {
        grad_u: l.fu.transpose() * p,
        grad_x: l.cov_x_matrix().transpose() * p,
        hess_xx,
        hess_ux,
        hess_uu,
    }
}

/// Compares [`hamiltonian_blocks`] against central differences of
/// `(s, r) -> H(t, exp_y(sX), P_s p, u + rV)` for a few fixed probe
/// directions, where `P_s` is parallel transport along the geodesic. Returns
/// the largest relative disagreement.
pub fn check_hamiltonian_blocks(
    prob: &ControlProblem,
    t: f64,
    y: &DVector<f64>,
    p: &CotangentVector,
    u: &DVector<f64>,
) -> Result<f64> {
    let b = hamiltonian_blocks(prob, t, y, p, u)?;
    let n = y.len();
    let m = u.len();
    let chart = &prob.chart;
    let ptilde = p.musical_dual(chart)?;
    let h = 1e-4;
    let value = |x: &DVector<f64>, s: f64, v: &DVector<f64>, r: f64| -> Result<f64> {
        let tv = TangentVector::new(y.clone(), x * s);
        let q = exp_map(chart, &tv)?;
        let moved = parallel_transport(chart, &geodesic(chart, &tv)?, &ptilde)?;
        let pq = moved.musical_dual(chart)?;
        hamiltonian(prob, t, &q, &CotangentVector::new(q.clone(), pq.components), &(u + v * r))
    };
    let mut worst: f64 = 0.0;
    let mut rel = |a: f64, b: f64| {
        worst = worst.max((a - b).abs() / (1.0 + b.abs()));
    };
    let probes_x: Vec<DVector<f64>> = (0..n)
        .map(|i| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.3 / (1.0 + k as f64) }))
        .collect();
    let probes_u: Vec<DVector<f64>> = (0..m)
        .map(|i| DVector::from_fn(m, |k, _| if k == i { 1.0 } else { -0.2 }))
        .collect();
    let (zx, zu) = (DVector::zeros(n), DVector::zeros(m));
    let h0 = value(&zx, 0.0, &zu, 0.0)?;
    for x in &probes_x {
        let fp = value(x, h, &zu, 0.0)?;
        let fm = value(x, -h, &zu, 0.0)?;
        rel(b.grad_x.dot(x), (fp - fm) / (2.0 * h));
        rel(x.dot(&(&b.hess_xx * x)), (fp - 2.0 * h0 + fm) / (h * h));
        for v in &probes_u {
            let mixed = (value(x, h, v, h)? - value(x, h, v, -h)? - value(x, -h, v, h)? + value(x, -h, v, -h)?)
                / (4.0 * h * h);
            rel(x.dot(&(&b.hess_ux * v)), mixed);
        }
    }
    for v in &probes_u {
        let fp = value(&zx, 0.0, v, h)?;
        let fm = value(&zx, 0.0, v, -h)?;
        rel(b.grad_u.dot(v), (fp - fm) / (2.0 * h));
        rel(v.dot(&(&b.hess_uu * v)), (fp - 2.0 * h0 + fm) / (h * h));
    }
    Ok(worst)
}
