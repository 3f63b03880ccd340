use std::sync::Arc;

use nalgebra::DVector;

use super::OptProblem;
use crate::cones::ConvexSet;
use crate::dynamics::{integrate_state, ControlProblem, Trajectory};
use crate::error::Result;
use crate::geometry::{exp_map, TangentVector};
use crate::smooth::FnMap;

/// Rewrites a control problem on the candidate's grid as a finite-dimensional
/// problem in `e = (xi, u_1, ..., u_N)`, where the initial state is
/// `exp_{y(0)}(xi)` and `u_i` is the control on interval `i`. Returns the
/// problem and the point `(0, u_1, ..., u_N)` representing the candidate.
/// Derivatives of the resulting map are central differences.
pub fn discretize(p: &ControlProblem, candidate: &Trajectory) -> Result<(OptProblem, DVector<f64>)> {
    let n = p.state_dim();
    let m = p.control_dim;
    let steps = candidate.steps();
    let y0 = candidate.initial().clone();
    let prob = p.clone();
    let outputs = p.num_multipliers();
    let map = FnMap::new(n + steps * m, outputs, move |_, e| {
        let start = match exp_map(&prob.chart, &TangentVector::new(y0.clone(), DVector::from_column_slice(&e[..n]))) {
            Ok(s) => s,
            Err(_) => return DVector::from_element(outputs, f64::NAN),
        };
        let controls: Vec<DVector<f64>> = (0..steps)
            .map(|i| DVector::from_column_slice(&e[n + i * m..n + (i + 1) * m]))
            .collect();
        match integrate_state(&prob, &start, &controls) {
            Ok(t) => prob.eval_endpoint(t.initial().as_slice(), t.terminal().as_slice()),
            Err(_) => DVector::from_element(outputs, f64::NAN),
        }
    });
    let mut parts = vec![ConvexSet::whole_space(n)];
    parts.extend(std::iter::repeat_n(p.control_set.clone(), steps));
    let set = ConvexSet::product(parts)?;
    let mut e = vec![0.0; n];
    for u in &candidate.controls {
        e.extend(u.iter());
    }
    Ok((OptProblem::new(set, Arc::new(map), p.num_inequalities)?, DVector::from_vec(e)))
}
