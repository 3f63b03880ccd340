use nalgebra::DVector;

use super::local::Local;
use super::{ControlProblem, FieldAlongCurve, FieldKind, Trajectory};
use crate::error::{Error, Result};

type Block = Vec<DVector<f64>>;

fn axpy_block(x: &Block, h: f64, k: &Block) -> Block {
    x.iter().zip(k).map(|(a, b)| a + b * h).collect()
}

/// One classical RK4 step for a block state. The first block is the chart
/// state and is checked against the chart domain at every stage.
fn rk4_step<F>(p: &ControlProblem, t: f64, h: f64, x: &Block, rhs: F) -> Result<Block>
where
    F: Fn(f64, &Block) -> Result<Block>,
{
    let stage = |t: f64, z: &Block| -> Result<Block> {
        if !p.chart.in_domain(z[0].as_slice()) {
            return Err(Error::ChartEscape {
                point: z[0].as_slice().to_vec(),
            });
        }
        rhs(t, z)
    };
    let k1 = stage(t, x)?;
    let k2 = stage(t + h / 2.0, &axpy_block(x, h / 2.0, &k1))?;
    let k3 = stage(t + h / 2.0, &axpy_block(x, h / 2.0, &k2))?;
    let k4 = stage(t + h, &axpy_block(x, h, &k3))?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| xi + (&k1[i] + &k2[i] * 2.0 + &k3[i] * 2.0 + &k4[i]) * (h / 6.0))
        .collect())
}

fn check_finite(b: &Block, step: usize) -> Result<()> {
    if b.iter().all(|v| v.iter().all(|x| x.is_finite())) {
        Ok(())
    } else {
        Err(Error::NonFiniteState { step })
    }
}

fn check_controls(p: &ControlProblem, controls: &[DVector<f64>]) -> Result<()> {
    if controls.is_empty() {
        return Err(Error::input("grid.N", "need at least one interval"));
    }
    for u in controls {
        if u.len() != p.control_dim {
            return Err(Error::dim("control", p.control_dim, u.len()));
        }
    }
    Ok(())
}

/// Integrates `y' = f(t, y, u_i)` with one RK4 step per interval.
pub fn integrate_state(p: &ControlProblem, y0: &DVector<f64>, controls: &[DVector<f64>]) -> Result<Trajectory> {
    check_controls(p, controls)?;
    if y0.len() != p.state_dim() {
        return Err(Error::dim("initial state", p.state_dim(), y0.len()));
    }
    p.chart.metric(y0.as_slice())?;
    let n_int = controls.len();
    let h = p.horizon / n_int as f64;
    let mut states = Vec::with_capacity(n_int + 1);
    states.push(y0.clone());
    let mut x = vec![y0.clone()];
    for (i, u) in controls.iter().enumerate() {
        let t = p.horizon * i as f64 / n_int as f64;
        x = rk4_step(p, t, h, &x, |t, z| {
            Ok(vec![p.eval_dynamics(t, z[0].as_slice(), u.as_slice())])
        })?;
        check_finite(&x, i + 1)?;
        if !p.chart.in_domain(x[0].as_slice()) {
            return Err(Error::ChartEscape {
                point: x[0].as_slice().to_vec(),
            });
        }
        states.push(x[0].clone());
    }
    Ok(Trajectory {
        horizon: p.horizon,
        states,
        controls: controls.to_vec(),
    })
}

fn check_samples(traj: &Trajectory, what: &str, v: &[DVector<f64>], m: usize) -> Result<()> {
    if v.len() != traj.steps() {
        return Err(Error::dim(what, traj.steps(), v.len()));
    }
    if let Some(bad) = v.iter().find(|x| x.len() != m) {
        return Err(Error::dim(what, m, bad.len()));
    }
    Ok(())
}

/// The linearised state `X` along `traj` for control perturbation `v`
/// (piecewise constant) and `X(0) = x0`. The covariant equation
/// `DX/dt = ∇_x f(X) + f_u v` is integrated in coordinates together with the
/// state.
pub fn integrate_variational(
    p: &ControlProblem,
    traj: &Trajectory,
    v: &[DVector<f64>],
    x0: &DVector<f64>,
) -> Result<FieldAlongCurve> {
    check_samples(traj, "direction", v, p.control_dim)?;
    let n_int = traj.steps();
    let h = traj.dt();
    let mut vals = Vec::with_capacity(n_int + 1);
    vals.push(x0.clone());
    let mut z = vec![traj.states[0].clone(), x0.clone()];
    for i in 0..n_int {
        let u = &traj.controls[i];
        let vi = &v[i];
        z = rk4_step(p, traj.time(i), h, &z, |t, z| {
            let l = Local::first(p, t, z[0].as_slice(), u.as_slice())?;
            let dx = l.cov_x(&z[1]) + &l.fu * vi - l.connection(&z[1]);
            Ok(vec![l.f, dx])
        })?;
        check_finite(&z, i + 1)?;
        vals.push(z[1].clone());
    }
    Ok(FieldAlongCurve {
        kind: FieldKind::Vector,
        values: vals,
    })
}

/// The second-order state `Y` along `traj`:
/// `DY/dt = ∇_x f(Y) + f_u σ + ∇_u∇_x f(X, v) - ½ R(X, f)X +
/// ½ ∇²_x f(X, X) + ½ ∂²_u f(v, v)` with `Y(0) = w`. `x` supplies `X(0)`; `X` is re-integrated
/// alongside so that every RK4 stage sees consistent values.
pub fn integrate_second_variation(
    p: &ControlProblem,
    traj: &Trajectory,
    v: &[DVector<f64>],
    x: &FieldAlongCurve,
    sigma: &[DVector<f64>],
    w: &DVector<f64>,
) -> Result<FieldAlongCurve> {
    check_samples(traj, "direction", v, p.control_dim)?;
    check_samples(traj, "second-order correction", sigma, p.control_dim)?;
    let n_int = traj.steps();
    let h = traj.dt();
    let mut vals = Vec::with_capacity(n_int + 1);
    vals.push(w.clone());
    let mut z = vec![traj.states[0].clone(), x.values[0].clone(), w.clone()];
    for i in 0..n_int {
        let u = &traj.controls[i];
        let (vi, si) = (&v[i], &sigma[i]);
        z = rk4_step(p, traj.time(i), h, &z, |t, z| {
            let l = Local::second(p, t, z[0].as_slice(), u.as_slice())?;
            let (xx, yy) = (&z[1], &z[2]);
            let dx = l.cov_x(xx) + &l.fu * vi - l.connection(xx);
            let dy = l.cov_x(yy) - l.connection(yy) + &l.fu * si + l.cov_ux(xx, vi)
                - l.curvature_term(xx) * 0.5
                + l.cov_xx(xx) * 0.5
                + l.uu(vi) * 0.5;
            Ok(vec![l.f, dx, dy])
        })?;
        check_finite(&z, i + 1)?;
        vals.push(z[2].clone());
    }
    Ok(FieldAlongCurve {
        kind: FieldKind::Vector,
        values: vals,
    })
}

/// The adjoint covector `p` with `Dp/dt = -p ∘ ∇_x f` and `p(T) = terminal`,
/// integrated backward interval by interval from the stored states.
pub fn integrate_adjoint(p: &ControlProblem, traj: &Trajectory, terminal: &DVector<f64>) -> Result<FieldAlongCurve> {
    if terminal.len() != p.state_dim() {
        return Err(Error::dim("terminal covector", p.state_dim(), terminal.len()));
    }
    let n_int = traj.steps();
    let h = traj.dt();
    let mut vals = vec![DVector::zeros(p.state_dim()); n_int + 1];
    vals[n_int] = terminal.clone();
    for i in (0..n_int).rev() {
        let u = &traj.controls[i];
        let z = vec![traj.states[i + 1].clone(), vals[i + 1].clone()];
        let z = rk4_step(p, traj.time(i + 1), -h, &z, |t, z| {
            let l = Local::first(p, t, z[0].as_slice(), u.as_slice())?;
            let pc = &z[1];
            // ṗ_k = Γ^j_ik f^i p_j - p_j A^j_k
            let conn = l.gam.along(l.f.as_slice()).transpose() * pc;
            let dp = conn - l.cov_x_matrix().transpose() * pc;
            Ok(vec![l.f, dp])
        })?;
        check_finite(&z, i)?;
        vals[i] = z[1].clone();
    }
    Ok(FieldAlongCurve {
        kind: FieldKind::Covector,
        values: vals,
    })
}
