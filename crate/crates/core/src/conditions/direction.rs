use nalgebra::DVector;

use super::{IndexSets, Tolerances};
use crate::cones::{adjacent_cone_margin, MEMBERSHIP_TOL};
use crate::dynamics::{endpoint_rows, integrate_variational, ControlProblem, FieldAlongCurve, Trajectory};
use crate::error::{Error, Result};

/// Splits `0..=j` into active and inactive endpoint inequalities at the
/// candidate's endpoints. Fails when the candidate violates an endpoint
/// constraint by more than `1e-6` (relative).
pub fn active_sets(p: &ControlProblem, traj: &Trajectory, tol: &Tolerances) -> Result<IndexSets> {
    let phi = p.eval_endpoint(traj.initial().as_slice(), traj.terminal().as_slice());
    let j = p.num_inequalities;
    let feas = |v: f64| 1e-6f64.max(tol.act_tol) * (1.0 + v.abs());
    let mut sets = IndexSets {
        active: vec![0],
        ..IndexSets::default()
    };
    for i in 1..=j {
        if phi[i] > feas(phi[i]) {
            return Err(Error::input(
                "candidate",
                format!("endpoint inequality {i} is violated ({:.3e})", phi[i]),
            ));
        }
        if phi[i].abs() <= tol.act_tol {
            sets.active.push(i);
        } else {
            sets.inactive.push(i);
        }
    }
    for (k, v) in phi.iter().skip(1 + j).enumerate() {
        if v.abs() > feas(*v) {
            return Err(Error::input(
                "candidate",
                format!("endpoint equality {} is violated ({v:.3e})", k + 1),
            ));
        }
    }
    Ok(sets)
}

/// Fills in the strict and critical index sets for a direction whose
/// linearised endpoint rows are `rows`.
pub fn critical_sets(sets: &IndexSets, rows: &DVector<f64>, tol: &Tolerances) -> IndexSets {
    let mut strict = sets.inactive.clone();
    strict.extend(sets.active.iter().copied().filter(|&i| rows[i] < -tol.row_tol));
    strict.sort_unstable();
    let all = sets.active.len() + sets.inactive.len();
    let critical = (0..all).filter(|i| !strict.contains(i)).collect();
    IndexSets {
        strict: Some(strict),
        critical: Some(critical),
        ..sets.clone()
    }
}

/// A verified singular direction together with its linearised state.
#[derive(Clone, Debug)]
pub struct SingularDirection {
    pub v: Vec<DVector<f64>>,
    pub x: FieldAlongCurve,
    /// `∇_1 Phi_c(X0) + ∇_2 Phi_c(XT)` for all endpoint components.
    pub rows: DVector<f64>,
    pub index_sets: IndexSets,
}

/// Checks that `v` lies in the adjacent cone of the control set at every
/// node and that the linearised endpoint rows are admissible: non-positive
/// on active inequalities and zero on equalities.
pub fn verify_singular_direction(
    p: &ControlProblem,
    traj: &Trajectory,
    sets: &IndexSets,
    v: &[DVector<f64>],
    x0: &DVector<f64>,
    tol: &Tolerances,
) -> Result<SingularDirection> {
    if v.len() != traj.steps() {
        return Err(Error::dim("direction samples", traj.steps(), v.len()));
    }
    for (node, (u, vi)) in traj.controls.iter().zip(v).enumerate() {
        let margin = adjacent_cone_margin(&p.control_set, u.as_slice(), vi.as_slice())?;
        if margin < -MEMBERSHIP_TOL * (1.0 + vi.norm()) {
            return Err(Error::ConeViolation { node });
        }
    }
    let x = integrate_variational(p, traj, v, x0)?;
    let rows = endpoint_rows(p, traj.initial(), traj.terminal(), &x.values[0], x.values.last().unwrap());
    for &i in &sets.active {
        if rows[i] > tol.row_tol {
            return Err(Error::EndpointRowViolation { index: i, value: rows[i] });
        }
    }
    for i in 1 + p.num_inequalities..rows.len() {
        if rows[i].abs() > tol.row_tol {
            return Err(Error::EndpointRowViolation { index: i, value: rows[i] });
        }
    }
    let index_sets = critical_sets(sets, &rows, tol);
    Ok(SingularDirection {
        v: v.to_vec(),
        x,
        rows,
        index_sets,
    })
}
