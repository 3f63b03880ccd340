use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{IndexSets, Tolerances};
use crate::dynamics::{integrate_adjoint, ControlProblem, FieldAlongCurve, Trajectory};
use crate::error::{Error, Result};
use crate::polycone::{cone_generators, ConeGenerators};

/// Adjoint solutions for unit terminal covectors, one per endpoint
/// component. Any multiplier's adjoint is a linear combination of them.
#[derive(Clone, Debug)]
pub struct AdjointBasis {
    /// `fields[c]` solves the adjoint equation with `p(T) = d_2 Phi_c`.
    pub fields: Vec<FieldAlongCurve>,
    /// Column `c` is `p^c(0) + d_1 Phi_c`; the initial transversality
    /// condition reads `rows * l = 0`.
    pub initial_rows: DMatrix<f64>,
}

impl AdjointBasis {
    pub fn new(p: &ControlProblem, traj: &Trajectory, tol: &Tolerances) -> Result<Self> {
        let n = p.state_dim();
        let z = endpoint_args(traj);
        let jac = p.endpoint.jacobian(0.0, &z);
        let count = p.num_multipliers();
        let fields: Vec<FieldAlongCurve> = tol
            .exec
            .map_range(count, |c| {
                let terminal = DVector::from_fn(n, |k, _| jac[(c, n + k)]);
                integrate_adjoint(p, traj, &terminal)
            })
            .into_iter()
            .collect::<Result<_>>()?;
        let initial_rows = DMatrix::from_fn(n, count, |k, c| fields[c].values[0][k] + jac[(c, k)]);
        Ok(AdjointBasis { fields, initial_rows })
    }

    pub fn adjoint(&self, ell: &[f64]) -> FieldAlongCurve {
        FieldAlongCurve::combine(&self.fields, ell)
    }
}

pub(crate) fn endpoint_args(traj: &Trajectory) -> Vec<f64> {
    let mut z = traj.initial().as_slice().to_vec();
    z.extend_from_slice(traj.terminal().as_slice());
    z
}

/// A normalised multiplier `l = (l_phi0, ..., l_phij, l_psi)` with
/// `|l|_inf = 1`, plus a rational reading of each entry when one exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierVector {
    pub values: Vec<f64>,
    pub rational: Vec<Option<String>>,
}

impl MultiplierVector {
    pub fn new(mut values: Vec<f64>) -> Self {
        let scale = values.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if scale > 0.0 {
            for v in &mut values {
                *v /= scale;
                // Snap round-off around simple fractions.
                if let Some((a, b)) = rationalize(*v, 1000, 1e-12) {
                    *v = a as f64 / b as f64;
                }
            }
        }
        let rational = values
            .iter()
            .map(|&x| rationalize(x, 1_000_000, 1e-9).map(|(a, b)| if b == 1 { a.to_string() } else { format!("{a}/{b}") }))
            .collect();
        MultiplierVector { values, rational }
    }

    /// The multiplier rescaled so that `l0 = -1` when `l0 < 0`.
    pub fn reporting_scale(&self) -> Vec<f64> {
        let l0 = self.values[0];
        if l0 < -1e-9 {
            self.values.iter().map(|v| v / -l0).collect()
        } else {
            self.values.clone()
        }
    }
}

/// Best rational approximation `a/b` with `b <= max_den` found by continued
/// fractions, if one is within `tol * max(1, |x|)` of `x`.
pub fn rationalize(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    if !x.is_finite() || x.abs() > 1e12 {
        return None;
    }
    let target = tol * x.abs().max(1.0);
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = a as i64;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() <= target {
            return Some((h1, k1));
        }
        let frac = r - a;
        if frac.abs() < 1e-15 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

/// All generator directions of a multiplier cone, normalised and sorted
/// lexicographically.
pub(crate) fn sorted_multipliers(gens: &ConeGenerators) -> Vec<MultiplierVector> {
    let mut out: Vec<MultiplierVector> = gens
        .all_directions()
        .into_iter()
        .map(|d| MultiplierVector::new(d.as_slice().to_vec()))
        .collect();
    out.sort_by(|a, b| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

/// Result of the first-order multiplier search.
#[derive(Clone, Debug)]
pub struct MultiplierCone {
    pub index_sets: IndexSets,
    pub basis: AdjointBasis,
    /// Extreme rays, and both signs of lineality directions, normalised and
    /// sorted lexicographically.
    pub multipliers: Vec<MultiplierVector>,
    /// Set when the cone has more generators than the ray budget; the
    /// multipliers list is then empty.
    pub over_budget: bool,
}

/// Rows `a` with `a . l <= 0` (or `= 0` for lineality directions of the
/// tangent cone) expressing `∇_u H[t, l](g) <= 0` for the generators `g` of
/// the adjacent cone at `u_i`, at both ends of interval `i`.
fn maximum_principle_rows(
    p: &ControlProblem,
    traj: &Trajectory,
    basis: &AdjointBasis,
    tol: &Tolerances,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let n = p.state_dim();
    let count = p.num_multipliers();
    let per_interval = tol.exec.map_range(traj.steps(), |i| -> Result<_> {
        let u = &traj.controls[i];
        let hs = p.control_set.tangent_halfspaces(u.as_slice())?;
        let gens = cone_generators(p.control_dim, &hs.rows, &[], tol.cone_tol)?;
        let mut ineq = Vec::new();
        let mut eq = Vec::new();
        for node in [i, i + 1] {
            let mut z = traj.states[node].as_slice().to_vec();
            z.extend_from_slice(u.as_slice());
            let jac = p.dynamics.jacobian(traj.time(node), &z);
            let fu = jac.columns(n, p.control_dim);
            let row = |g: &DVector<f64>| {
                let fug = fu * g;
                DVector::from_fn(count, |c, _| basis.fields[c].values[node].dot(&fug))
            };
            ineq.extend(gens.rays.iter().map(row));
            eq.extend(gens.lineality.iter().map(row));
        }
        Ok((ineq, eq))
    });
    let mut ineq = Vec::new();
    let mut eq = Vec::new();
    for r in per_interval {
        let (a, b) = r?;
        ineq.extend(a);
        eq.extend(b);
    }
    Ok((ineq, eq))
}

/// Drops rows that are negligible relative to the largest one, so that
/// round-off in identically vanishing rows does not become a constraint.
pub(crate) fn significant(rows: Vec<DVector<f64>>, scale: f64) -> Vec<DVector<f64>> {
    rows.into_iter().filter(|r| r.amax() > 1e-9 * scale).collect()
}

/// Generators of the cone of multipliers satisfying the sign conditions,
/// the maximum principle on the grid and the initial transversality
/// condition.
pub fn find_first_order_multipliers(
    p: &ControlProblem,
    traj: &Trajectory,
    index_sets: &IndexSets,
    tol: &Tolerances,
) -> Result<MultiplierCone> {
    let count = p.num_multipliers();
    let basis = AdjointBasis::new(p, traj, tol)?;
    let (mp_ineq, mp_eq) = maximum_principle_rows(p, traj, &basis, tol)?;
    let unit = |i: usize, s: f64| DVector::from_fn(count, |c, _| if c == i { s } else { 0.0 });
    let mut eq: Vec<DVector<f64>> = (0..basis.initial_rows.nrows())
        .map(|k| basis.initial_rows.row(k).transpose())
        .collect();
    eq.extend(mp_eq);
    eq.extend(index_sets.inactive.iter().map(|&i| unit(i, 1.0)));
    let mut ineq: Vec<DVector<f64>> = index_sets.active.iter().map(|&i| unit(i, 1.0)).collect();
    ineq.extend(mp_ineq);
    let scale = eq.iter().chain(&ineq).fold(0.0f64, |a, r| a.max(r.amax())).max(1e-300);
    let gens = cone_generators(count, &significant(ineq, scale), &significant(eq, scale), tol.cone_tol)?;
    let total = gens.rays.len() + 2 * gens.lineality.len();
    if total > tol.ray_budget {
        return Ok(MultiplierCone {
            index_sets: index_sets.clone(),
            basis,
            multipliers: vec![],
            over_budget: true,
        });
    }
    let multipliers = sorted_multipliers(&gens);
    if multipliers.is_empty() {
        return Err(Error::NoMultiplier);
    }
    Ok(MultiplierCone {
        index_sets: index_sets.clone(),
        basis,
        multipliers,
        over_budget: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals() {
        assert_eq!(rationalize(-4.0 / 11.0, 10_000, 1e-9), Some((-4, 11)));
        assert_eq!(rationalize(2.75, 10_000, 1e-9), Some((11, 4)));
        assert_eq!(rationalize(0.0, 10_000, 1e-9), Some((0, 1)));
        assert_eq!(rationalize(std::f64::consts::PI, 100, 1e-9), None);
        let m = MultiplierVector::new(vec![-2.0, -5.5, 2.0]);
        assert_eq!(m.values, vec![-2.0 / 5.5, -1.0, 2.0 / 5.5]);
        assert_eq!(m.rational[0].as_deref(), Some("-4/11"));
        assert_eq!(m.rational[1].as_deref(), Some("-1"));
        assert_eq!(m.reporting_scale(), vec![-1.0, -2.75, 1.0]);
    }
}
