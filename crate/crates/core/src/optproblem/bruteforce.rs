use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::OptProblem;
use crate::dynamics::{integrate_state, ControlProblem, Trajectory};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Largest number of grid points a brute-force search will visit.
const MAX_GRID_POINTS: f64 = 2e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BruteForceVerdict {
    /// No feasible point beats the reference.
    Confirmed,
    /// A feasible point strictly beats the reference.
    Improved,
    /// No feasible grid point lies near the reference, so the grid cannot
    /// compare against it.
    ResolutionTooCoarse,
    /// No grid point is feasible.
    Empty,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteForceReport {
    pub verdict: BruteForceVerdict,
    pub visited: u64,
    pub feasible: u64,
    pub reference_value: f64,
    pub best_value: Option<f64>,
    pub best_point: Option<Vec<f64>>,
    /// Tolerance applied to equality constraints.
    pub equality_slack: f64,
}

#[derive(Clone, Debug)]
struct Best {
    feasible: u64,
    near: bool,
    value: f64,
    point: Option<Vec<f64>>,
}

impl Best {
    fn empty() -> Self {
        Best {
            feasible: 0,
            near: false,
            value: f64::INFINITY,
            point: None,
        }
    }

    fn merge(mut self, o: Best) -> Best {
        self.feasible += o.feasible;
        self.near |= o.near;
        // Ties go to the lexicographically smaller point so both execution
        // paths agree.
        let better = o.value < self.value
            || (o.value == self.value && o.point.is_some() && (self.point.is_none() || o.point < self.point));
        if better {
            self.value = o.value;
            self.point = o.point;
        }
        self
    }
}

/// Grid search over `E` with spacing `h`, anchored at `e` so that `e` itself
/// is a grid point. Inequalities are checked exactly; equalities up to the
/// half-cell variation `½ h |D psi_c(e)|_1`, in which case an improvement
/// must also beat the cell variation `h |D phi0(e)|_1` of the objective;
/// smaller gains are reported as `ResolutionTooCoarse`. Requires `N <= 3`
/// and bounded `E`.
pub fn op_bruteforce(problem: &OptProblem, e: &[f64], h: f64, exec: Exec) -> Result<BruteForceReport> {
    let n = problem.dim();
    if n > 3 {
        return Err(Error::input("op.dimension", format!("brute force supports at most 3 dimensions, got {n}")));
    }
    if !(h > 0.0) {
        return Err(Error::input("op.resolution", "resolution must be positive"));
    }
    let (lo, hi) = problem
        .set
        .bounding_box()
        .ok_or_else(|| Error::input("op.set", "brute force needs a bounded set"))?;
    let kmin: Vec<i64> = (0..n).map(|i| ((lo[i] - e[i]) / h).ceil() as i64).collect();
    let kmax: Vec<i64> = (0..n).map(|i| ((hi[i] - e[i]) / h).floor() as i64).collect();
    let counts: Vec<usize> = (0..n).map(|i| (kmax[i] - kmin[i] + 1).max(0) as usize).collect();
    let total: f64 = counts.iter().map(|&c| c as f64).product();
    if total > MAX_GRID_POINTS {
        return Err(Error::input("op.resolution", format!("grid of {total:.3e} points is too large")));
    }
    let j = problem.num_inequalities;
    let d = problem.derivative(e);
    let slack: Vec<f64> = (1 + j..problem.num_multipliers())
        .map(|c| 0.5 * h * d.row(c).iter().map(|x| x.abs()).sum::<f64>() + 1e-12)
        .collect();
    let reference = problem.values(e)[0];
    let near_radius = 2.0 * h * (n as f64).sqrt();
    let inner: usize = counts[1..].iter().product();
    let shard = |a: usize| -> Best {
        let mut best = Best::empty();
        let mut x = vec![0.0; n];
        for b in 0..inner {
            let mut rem = b;
            x[0] = e[0] + (kmin[0] + a as i64) as f64 * h;
            for i in 1..n {
                let k = rem % counts[i];
                rem /= counts[i];
                x[i] = e[i] + (kmin[i] + k as i64) as f64 * h;
            }
            if !problem.set.contains(&x, 1e-12) {
                continue;
            }
            let v = problem.values(&x);
            if (1..=j).any(|i| v[i] > 1e-12) || slack.iter().enumerate().any(|(c, s)| v[1 + j + c].abs() > *s) {
                continue;
            }
            best.feasible += 1;
            let dist = x.iter().zip(e).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            best.near |= dist <= near_radius;
            best = best.merge(Best {
                feasible: 0,
                near: false,
                value: v[0],
                point: Some(x.clone()),
            });
        }
        best
    };
    let best = exec
        .map_range(counts[0], shard)
        .into_iter()
        .fold(Best::empty(), Best::merge);
    // With equality slack a grid point may gain up to a cell's worth of
    // objective by sitting off the constraint surface.
    let exact = 1e-12 * (1.0 + reference.abs());
    let gain = if slack.is_empty() {
        exact
    } else {
        h * d.row(0).iter().map(|x| x.abs()).sum::<f64>() + exact
    };
    let verdict = if best.feasible == 0 {
        BruteForceVerdict::Empty
    } else if best.value < reference - gain {
        BruteForceVerdict::Improved
    } else if best.value < reference - exact || !best.near {
        BruteForceVerdict::ResolutionTooCoarse
    } else {
        BruteForceVerdict::Confirmed
    };
    Ok(BruteForceReport {
        verdict,
        visited: total as u64,
        feasible: best.feasible,
        reference_value: reference,
        best_value: best.point.is_some().then_some(best.value),
        best_point: best.point,
        equality_slack: slack.iter().fold(0.0, |a: f64, b| a.max(*b)),
    })
}

/// Piecewise-constant controls with `pieces` equal pieces, each taking a
/// value from `samples`, started from the candidate's initial state.
#[derive(Clone, Debug)]
pub struct ControlSearch {
    pub pieces: usize,
    pub samples: Vec<DVector<f64>>,
    /// Tolerance on endpoint equalities.
    pub equality_tol: f64,
}

/// Exhaustive search over [`ControlSearch`] controls on the candidate's
/// grid. `Improved` means an admissible control reaches a strictly lower
/// cost; the best point is the flattened list of piece values.
pub fn control_bruteforce(
    p: &ControlProblem,
    candidate: &Trajectory,
    search: &ControlSearch,
    exec: Exec,
) -> Result<BruteForceReport> {
    let s = search.samples.len();
    if s == 0 || search.pieces == 0 {
        return Err(Error::input("search", "need at least one sample and one piece"));
    }
    let total = (s as f64).powi(search.pieces as i32);
    if total > 1e7 {
        return Err(Error::input("search", format!("{total:.3e} control sequences is too many")));
    }
    for u in &search.samples {
        if !p.control_set.contains(u.as_slice(), 1e-12) {
            return Err(Error::PointNotInSet {
                distance: p.control_set.distance(u.as_slice()),
            });
        }
    }
    let steps = candidate.steps();
    let y0 = candidate.initial().clone();
    let cost = |controls: &[DVector<f64>]| -> Option<f64> {
        let traj = integrate_state(p, &y0, controls).ok()?;
        let v = p.eval_endpoint(traj.initial().as_slice(), traj.terminal().as_slice());
        let j = p.num_inequalities;
        let feasible = (1..=j).all(|i| v[i] <= 1e-12) && (1 + j..v.len()).all(|c| v[c].abs() <= search.equality_tol);
        feasible.then_some(v[0])
    };
    let reference = cost(&candidate.controls)
        .ok_or_else(|| Error::input("candidate", "candidate violates its endpoint constraints"))?;
    let count = total as usize;
    let best = exec.fold_range(
        count,
        Best::empty(),
        |idx| {
            let mut choice = Vec::with_capacity(search.pieces);
            let mut rem = idx;
            for _ in 0..search.pieces {
                choice.push(rem % s);
                rem /= s;
            }
            let controls: Vec<DVector<f64>> = (0..steps)
                .map(|i| search.samples[choice[i * search.pieces / steps]].clone())
                .collect();
            match cost(&controls) {
                Some(v) => Best {
                    feasible: 1,
                    near: true,
                    value: v,
                    point: Some(choice.iter().flat_map(|&c| search.samples[c].iter().copied()).collect()),
                },
                None => Best::empty(),
            }
        },
        Best::merge,
    );
    let verdict = if best.feasible == 0 {
        BruteForceVerdict::Empty
    } else if best.value < reference - 1e-12 * (1.0 + reference.abs()) {
        BruteForceVerdict::Improved
    } else {
        BruteForceVerdict::Confirmed
    };
    Ok(BruteForceReport {
        verdict,
        visited: count as u64,
        feasible: best.feasible,
        reference_value: reference,
        best_value: best.point.is_some().then_some(best.value),
        best_point: best.point,
        equality_slack: search.equality_tol,
    })
}
