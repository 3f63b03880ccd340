//! A finite-dimensional optimisation problem over a convex set with
//! endpoint-style constraints: first- and second-order multipliers, the
//! separation behind them, and brute-force grid oracles.

mod bruteforce;
mod discretize;

pub use bruteforce::{control_bruteforce, op_bruteforce, BruteForceReport, BruteForceVerdict, ControlSearch};
pub use discretize::discretize;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cones::{adjacent_cone_margin, ConvexSet, MEMBERSHIP_TOL};
use crate::conditions::{significant, sorted_multipliers, IndexSets, MultiplierVector, Tolerances};
use crate::error::{Error, Result};
use crate::polycone::{cone_generators, polyhedron_generators, PolyhedronGenerators};
use crate::smooth::SmoothMap;

/// Minimise `phi0(e)` over `e in E` subject to `phi_i(e) <= 0`
/// (`i = 1..j`) and `psi(e) = 0`.
#[derive(Clone, Debug)]
pub struct OptProblem {
    pub set: ConvexSet,
    /// `(_, e) -> (phi0, ..., phij, psi1, ..., psik)`.
    pub map: Arc<dyn SmoothMap>,
    pub num_inequalities: usize,
}

impl OptProblem {
    pub fn new(set: ConvexSet, map: Arc<dyn SmoothMap>, num_inequalities: usize) -> Result<Self> {
        set.validate()?;
        if map.input_dim() != set.dim() {
            return Err(Error::dim("objective inputs", set.dim(), map.input_dim()));
        }
        if map.output_dim() < 1 + num_inequalities {
            return Err(Error::dim("objective outputs", 1 + num_inequalities, map.output_dim()));
        }
        Ok(OptProblem {
            set,
            map,
            num_inequalities,
        })
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn num_multipliers(&self) -> usize {
        self.map.output_dim()
    }

    pub fn values(&self, e: &[f64]) -> DVector<f64> {
        self.map.eval(0.0, e)
    }

    /// `D Phi(e)`, one row per component.
    pub fn derivative(&self, e: &[f64]) -> DMatrix<f64> {
        self.map.jacobian(0.0, e)
    }

    /// `D² Phi(e)(y) = y^T H_c y` per component.
    pub fn second_directional(&self, e: &[f64], y: &DVector<f64>) -> DVector<f64> {
        let hs = self.map.hessians(0.0, e);
        DVector::from_iterator(hs.len(), hs.iter().map(|h| y.dot(&(h * y))))
    }

    /// `|Phi(e + eps y + eps² eta) - Phi(e) - eps DPhi y - eps² DPhi eta -
    /// ½eps² D²Phi(y)| / eps²`, which must vanish as `eps -> 0`.
    pub fn expansion_defect(&self, e: &[f64], y: &DVector<f64>, eta: &DVector<f64>, eps: f64) -> f64 {
        let ev = DVector::from_column_slice(e);
        let moved = &ev + y * eps + eta * (eps * eps);
        let d = self.derivative(e);
        let lin = &d * y * eps + &d * eta * (eps * eps) + self.second_directional(e, y) * (0.5 * eps * eps);
        (self.values(moved.as_slice()) - self.values(e) - lin).amax() / (eps * eps)
    }

    fn check_point(&self, e: &[f64]) -> Result<()> {
        if e.len() != self.dim() {
            return Err(Error::dim("point", self.dim(), e.len()));
        }
        let d = self.set.distance(e);
        if d > 1e-10 {
            return Err(Error::PointNotInSet { distance: d });
        }
        Ok(())
    }

    /// Active and inactive inequality indices at `e` (`0` is always active).
    pub fn index_sets(&self, e: &[f64], tol: &Tolerances) -> Result<IndexSets> {
        self.check_point(e)?;
        let phi = self.values(e);
        let mut sets = IndexSets {
            active: vec![0],
            ..IndexSets::default()
        };
        for i in 1..=self.num_inequalities {
            if phi[i] > tol.act_tol.max(1e-6) {
                return Err(Error::input("point", format!("inequality {i} is violated ({:.3e})", phi[i])));
            }
            if phi[i].abs() <= tol.act_tol {
                sets.active.push(i);
            } else {
                sets.inactive.push(i);
            }
        }
        Ok(sets)
    }
}

fn unit(count: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(count, |c, _| if c == i { 1.0 } else { 0.0 })
}

/// Multiplier cone of the first-order conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpFirstOrder {
    pub index_sets: IndexSets,
    pub multipliers: Vec<MultiplierVector>,
}

/// Sign, slackness and tangent-cone rows of the first-order conditions.
/// Components listed in `zero` are forced to vanish.
fn first_order_rows(
    problem: &OptProblem,
    e: &[f64],
    sets: &IndexSets,
    zero: &[usize],
    tol: &Tolerances,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let count = problem.num_multipliers();
    let d = problem.derivative(e);
    let hs = problem.set.tangent_halfspaces(e)?;
    let tangent = cone_generators(problem.dim(), &hs.rows, &[], tol.cone_tol)?;
    let image = |g: &DVector<f64>| {
        let mut r = &d * g;
        for &i in sets.inactive.iter().chain(zero) {
            r[i] = 0.0;
        }
        r
    };
    let mut ineq: Vec<DVector<f64>> = (0..=problem.num_inequalities).map(|i| unit(count, i)).collect();
    ineq.extend(tangent.rays.iter().map(image));
    let mut eq: Vec<DVector<f64>> = sets.inactive.iter().chain(zero).map(|&i| unit(count, i)).collect();
    eq.extend(tangent.lineality.iter().map(image));
    Ok((ineq, eq))
}

fn rays_of(count: usize, ineq: Vec<DVector<f64>>, eq: Vec<DVector<f64>>, tol: &Tolerances) -> Result<Vec<MultiplierVector>> {
    let scale = eq.iter().chain(&ineq).fold(0.0f64, |a, r| a.max(r.amax())).max(1e-300);
    let gens = cone_generators(count, &significant(ineq, scale), &significant(eq, scale), tol.cone_tol)?;
    Ok(sorted_multipliers(&gens))
}

/// Generators of the multipliers with `l_phi <= 0`, `l_i = 0` on inactive
/// constraints and `l . DPhi(e) x <= 0` on the adjacent cone of `E`. The
/// objective is taken relative to its value at `e`, so slackness reduces to
/// the inactive rows. An empty list refutes first-order necessity.
pub fn op_first_order(problem: &OptProblem, e: &[f64], tol: &Tolerances) -> Result<OpFirstOrder> {
    let sets = problem.index_sets(e, tol)?;
    let (ineq, eq) = first_order_rows(problem, e, &sets, &[], tol)?;
    Ok(OpFirstOrder {
        multipliers: rays_of(problem.num_multipliers(), ineq, eq, tol)?,
        index_sets: sets,
    })
}

/// Data of a critical direction `y` shared by the second-order test and the
/// separation.
struct CriticalData {
    sets: IndexSets,
    /// Generators of the second-order set of `E` at `(e, y)`.
    second: PolyhedronGenerators,
    d: DMatrix<f64>,
    /// `½ D²Phi(e)(y)`.
    half_d2: DVector<f64>,
    /// `DPhi(e) y`.
    dy: DVector<f64>,
}

fn critical_data(problem: &OptProblem, e: &[f64], y: &DVector<f64>, tol: &Tolerances) -> Result<CriticalData> {
    let sets = problem.index_sets(e, tol)?;
    if y.len() != problem.dim() {
        return Err(Error::dim("direction", problem.dim(), y.len()));
    }
    let margin = adjacent_cone_margin(&problem.set, e, y.as_slice())?;
    if margin < -MEMBERSHIP_TOL * (1.0 + y.norm()) {
        return Err(Error::DirectionNotCritical(format!(
            "direction leaves the adjacent cone (margin {margin:.3e})"
        )));
    }
    let d = problem.derivative(e);
    let dy = &d * y;
    for &i in &sets.active {
        if dy[i] > tol.row_tol {
            return Err(Error::DirectionNotCritical(format!("D phi_{i}(y) = {:.3e} > 0", dy[i])));
        }
    }
    for i in 1 + problem.num_inequalities..dy.len() {
        if dy[i].abs() > tol.row_tol {
            return Err(Error::DirectionNotCritical(format!(
                "D psi_{}(y) = {:.3e} != 0",
                i - problem.num_inequalities,
                dy[i]
            )));
        }
    }
    let hs = problem.set.second_order_halfspaces(e, y.as_slice())?;
    let (g, h) = hs.matrix();
    let second = polyhedron_generators(&g, &h, tol.cone_tol)?;
    if second.is_empty() {
        return Err(Error::EmptySecondCone);
    }
    let mut strict = sets.inactive.clone();
    strict.extend(sets.active.iter().copied().filter(|&i| dy[i] < -tol.row_tol));
    strict.sort_unstable();
    let critical = (0..=problem.num_inequalities).filter(|i| !strict.contains(i)).collect();
    Ok(CriticalData {
        sets: IndexSets {
            strict: Some(strict),
            critical: Some(critical),
            ..sets
        },
        half_d2: problem.second_directional(e, y) * 0.5,
        second,
        d,
        dy,
    })
}

impl CriticalData {
    fn strict(&self) -> &[usize] {
        self.sets.strict.as_deref().unwrap_or(&[])
    }

    /// Masks the components outside the critical set.
    fn masked(&self, mut r: DVector<f64>) -> DVector<f64> {
        for &i in self.strict() {
            r[i] = 0.0;
        }
        r
    }

    /// Rows making `l . (DPhi x + ½D²Phi(y)) <= 0` for every `x` in the
    /// second-order set.
    fn second_order_rows(&self) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let ineq = self
            .second
            .points
            .iter()
            .map(|p| self.masked(&self.d * p + &self.half_d2))
            .chain(self.second.rays.iter().map(|r| self.masked(&self.d * r)))
            .collect();
        let eq = self.second.lineality.iter().map(|l| self.masked(&self.d * l)).collect();
        (ineq, eq)
    }

    /// `sup_x l . (DPhi x + ½D²Phi(y))` over the second-order set; `None`
    /// when unbounded.
    fn worst_case(&self, ell: &[f64]) -> Option<f64> {
        let l = DVector::from_column_slice(ell);
        let scale = 1e-9 * (1.0 + l.amax());
        if self.second.rays.iter().any(|r| l.dot(&self.masked(&self.d * r)) > scale)
            || self
                .second
                .lineality
                .iter()
                .any(|r| l.dot(&self.masked(&self.d * r)).abs() > scale)
        {
            return None;
        }
        self.second
            .points
            .iter()
            .map(|p| l.dot(&self.masked(&self.d * p + &self.half_d2)))
            .fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpSecondOrder {
    pub index_sets: IndexSets,
    /// Generators of the first-order multipliers vanishing off the critical
    /// set.
    pub face: Vec<MultiplierVector>,
    /// Worst case of the second-order functional over the second-order set,
    /// per face generator; `None` for `+inf`.
    pub worst_case: Vec<Option<f64>>,
    /// Generators of the multipliers for which the worst case is `<= 0`.
    pub satisfying: Vec<MultiplierVector>,
    /// True when no nonzero multiplier satisfies the second-order condition.
    pub refuted: bool,
}

/// Second-order test along a critical direction `y`. The worst case over
/// the second-order set is linear in the multiplier on each generator of
/// that set, so the multipliers passing the test form a polyhedral cone,
/// which is enumerated exactly.
pub fn op_second_order(problem: &OptProblem, e: &[f64], y: &DVector<f64>, tol: &Tolerances) -> Result<OpSecondOrder> {
    let data = critical_data(problem, e, y, tol)?;
    let count = problem.num_multipliers();
    let (ineq, eq) = first_order_rows(problem, e, &data.sets, data.strict(), tol)?;
    let face = rays_of(count, ineq.clone(), eq.clone(), tol)?;
    let worst_case = face.iter().map(|m| data.worst_case(&m.values)).collect();
    let (mut ineq2, mut eq2) = (ineq, eq);
    let (a, b) = data.second_order_rows();
    ineq2.extend(a);
    eq2.extend(b);
    let satisfying = rays_of(count, ineq2, eq2, tol)?;
    Ok(OpSecondOrder {
        index_sets: data.sets,
        face,
        worst_case,
        refuted: satisfying.is_empty(),
        satisfying,
    })
}

/// The convex set `K` (image of the second-order set) and the cone `Z`
/// (through its closure's generators), with the separating functionals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationData {
    pub index_sets: IndexSets,
    /// Images of the second-order set's points.
    pub k_points: Vec<Vec<f64>>,
    /// Recession directions of `K`.
    pub k_rays: Vec<Vec<f64>>,
    pub k_lineality: Vec<Vec<f64>>,
    /// Generators of the closure of `Z` in `R^{1+j}`.
    pub z_generators: Vec<Vec<f64>>,
    /// Rank of the `psi` block of `K - K`.
    pub psi_rank: usize,
    /// Generators of all separating functionals.
    pub separators: Vec<MultiplierVector>,
    /// First separator in lexicographic order, if any.
    pub separator: Option<MultiplierVector>,
}

impl SeparationData {
    /// Random elements of `K`: convex combinations of its points plus
    /// nonnegative combinations of its rays and lineality directions.
    pub fn sample<R: Rng>(&self, rng: &mut R, count: usize) -> Vec<DVector<f64>> {
        let dim = self.k_points[0].len();
        (0..count)
            .map(|_| {
                let w: Vec<f64> = self.k_points.iter().map(|_| rng.random::<f64>() + 1e-3).collect();
                let total: f64 = w.iter().sum();
                let mut k = DVector::zeros(dim);
                for (p, wi) in self.k_points.iter().zip(&w) {
                    k += DVector::from_column_slice(p) * (wi / total);
                }
                for r in &self.k_rays {
                    k += DVector::from_column_slice(r) * (10.0 * rng.random::<f64>());
                }
                for l in &self.k_lineality {
                    k += DVector::from_column_slice(l) * (20.0 * rng.random::<f64>() - 10.0);
                }
                k
            })
            .collect()
    }
}

/// Looks for `l != 0` with `l . k <= l . (z, 0)` for all `k in K` and
/// `z in Z`. Since `Z` is a cone with `inf l.z = 0` exactly when `l_phi <= 0`
/// and `l_phi . (phi(e) + Y) <= 0`, the separators form a polyhedral cone.
pub fn build_separation(problem: &OptProblem, e: &[f64], y: &DVector<f64>, tol: &Tolerances) -> Result<SeparationData> {
    let data = critical_data(problem, e, y, tol)?;
    let count = problem.num_multipliers();
    let j = problem.num_inequalities;
    let mut phi = problem.values(e);
    phi[0] = 0.0;
    // phi(e) + Y, with Y_i = D phi_i(y) on active constraints.
    let shifted = DVector::from_fn(j + 1, |i, _| phi[i] + if data.sets.active.contains(&i) { data.dy[i] } else { 0.0 });
    let mut ineq: Vec<DVector<f64>> = (0..=j).map(|i| unit(count, i)).collect();
    ineq.push(DVector::from_fn(count, |c, _| if c <= j { shifted[c] } else { 0.0 }));
    let (a, eq) = data.second_order_rows();
    ineq.extend(a);
    let separators = rays_of(count, ineq, eq, tol)?;
    let k_points: Vec<Vec<f64>> = data
        .second
        .points
        .iter()
        .map(|p| data.masked(&data.d * p + &data.half_d2).as_slice().to_vec())
        .collect();
    let k_rays: Vec<Vec<f64>> = data.second.rays.iter().map(|r| data.masked(&data.d * r).as_slice().to_vec()).collect();
    let k_lineality: Vec<Vec<f64>> = data
        .second
        .lineality
        .iter()
        .map(|r| data.masked(&data.d * r).as_slice().to_vec())
        .collect();
    let mut z_generators: Vec<Vec<f64>> = (0..=j).map(|i| (-unit(j + 1, i)).as_slice().to_vec()).collect();
    if shifted.amax() > 0.0 {
        z_generators.push((-&shifted).as_slice().to_vec());
    }
    let psi_rank = {
        let k = count - 1 - j;
        let mut dirs: Vec<DVector<f64>> = Vec::new();
        for p in &k_points[1.min(k_points.len())..] {
            dirs.push(DVector::from_fn(k, |i, _| p[1 + j + i] - k_points[0][1 + j + i]));
        }
        for r in k_rays.iter().chain(&k_lineality) {
            dirs.push(DVector::from_fn(k, |i, _| r[1 + j + i]));
        }
        if k == 0 || dirs.is_empty() {
            0
        } else {
            DMatrix::from_columns(&dirs).rank(1e-9)
        }
    };
    Ok(SeparationData {
        index_sets: data.sets,
        k_points,
        k_rays,
        k_lineality,
        z_generators,
        psi_rank,
        separator: separators.first().cloned(),
        separators,
    })
}
