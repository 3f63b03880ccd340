use nalgebra::DVector;

use super::{integrate_second_variation, integrate_state, integrate_variational, ControlProblem, Trajectory};
use crate::cones::lift_sigma;
use crate::error::{Error, Result};
use crate::geometry::{exp_map, log_map, TangentVector};

/// For each `eps`, the largest over nodes of
/// `|log_{y(t)} y_eps(t) - eps X(t) - eps² Y(t)|`, where `y_eps` is driven by
/// `u + eps v + eps² sigma_eps` (with `sigma_eps` the admissible lift of
/// `sigma`) from `exp_{y(0)}(eps X0 + eps² W)`, and `Y` solves the
/// second-variation equation with `sigma_eps`.
pub fn expansion_residual(
    p: &ControlProblem,
    traj: &Trajectory,
    v: &[DVector<f64>],
    x0: &DVector<f64>,
    sigma: &[DVector<f64>],
    w: &DVector<f64>,
    eps_list: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let x = integrate_variational(p, traj, v, x0)?;
    let y0 = traj.initial();
    eps_list
        .iter()
        .map(|&eps| {
            if eps == 0.0 {
                return Ok((0.0, 0.0));
            }
            let s_eps = lift_sigma(&p.control_set, &traj.controls, v, sigma, eps)?;
            let norm = (s_eps.iter().map(|s| s.norm_squared()).sum::<f64>() * traj.dt()).sqrt();
            if norm > p.sigma_cap {
                return Err(Error::SigmaCapExceeded {
                    norm,
                    cap: p.sigma_cap,
                });
            }
            let controls: Vec<DVector<f64>> = traj
                .controls
                .iter()
                .zip(v)
                .zip(&s_eps)
                .map(|((u, vi), si)| u + vi * eps + si * (eps * eps))
                .collect();
            let start = exp_map(&p.chart, &TangentVector::new(y0.clone(), x0 * eps + w * (eps * eps)))?;
            let pert = integrate_state(p, &start, &controls)?;
            let yy = integrate_second_variation(p, traj, v, &x, &s_eps, w)?;
            let mut worst: f64 = 0.0;
            for i in 0..=traj.steps() {
                let base = traj.states[i].as_slice();
                let ve = log_map(&p.chart, base, pert.states[i].as_slice())?;
                let r = ve.components - &x.values[i] * eps - &yy.values[i] * (eps * eps);
                worst = worst.max(p.chart.norm(base, r.as_slice())?);
            }
            Ok((eps, worst))
        })
        .collect()
}
