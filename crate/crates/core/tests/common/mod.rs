#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use noc_core::cones::ConvexSet;
use noc_core::dynamics::{ControlProblem, Trajectory};
use noc_core::geometry::ManifoldChart;
use noc_core::smooth::ExprMap;

pub fn dv(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn dynamics(f: &[&str], n: usize, m: usize, consts: &[(&str, f64)]) -> Arc<ExprMap> {
    let mut vars = names("y", n);
    vars.extend(names("u", m));
    let consts: Vec<(String, f64)> = consts.iter().map(|(a, b)| (a.to_string(), *b)).collect();
    let src: Vec<String> = f.iter().map(|s| s.to_string()).collect();
    Arc::new(ExprMap::parse(&src, &vars, Some("t"), &consts).unwrap())
}

pub fn endpoint(rows: &[&str], n: usize) -> Arc<ExprMap> {
    let mut vars = names("y0_", n);
    vars.extend(names("yT_", n));
    let src: Vec<String> = rows.iter().map(|s| s.to_string()).collect();
    Arc::new(ExprMap::parse(&src, &vars, None, &[]).unwrap())
}

/// The two-state example on the unit disc with candidate u = (0, -1).
pub fn ccs126(horizon: f64, theta: f64) -> ControlProblem {
    ControlProblem::new(
        ManifoldChart::euclidean(2),
        dynamics(&["u2", "-y1^2 + 4*y1*u2 - theta*u1^2"], 2, 2, &[("theta", theta)]),
        endpoint(&["yT_2", "y0_1 - 1", "y0_2"], 2),
        0,
        ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap(),
        horizon,
    )
    .unwrap()
}

pub fn constant(n_int: usize, u: &[f64]) -> Vec<DVector<f64>> {
    vec![dv(u); n_int]
}

/// Closed-form candidate trajectory of [`ccs126`].
pub fn ccs126_state(t: f64) -> [f64; 2] {
    [1.0 - t, -t.powi(3) / 3.0 + 3.0 * t * t - 5.0 * t]
}

/// A problem on the unit sphere in colatitude/longitude coordinates.
pub fn sphere_toy(horizon: f64) -> ControlProblem {
    ControlProblem::new(
        ManifoldChart::sphere_spherical(1.0).unwrap(),
        dynamics(
            &["u1 + 0.2*cos(y2)*y1", "u2/sin(y1) + 0.1*y1^2 + 0.3*u1*u2"],
            2,
            2,
            &[],
        ),
        endpoint(&["yT_1^2 + sin(yT_2) + 0.5*y0_2*yT_1", "y0_1 - 1.2", "y0_2 - 0.3"], 2),
        0,
        ConvexSet::ball(vec![0.0, 0.0], 0.5).unwrap(),
        horizon,
    )
    .unwrap()
}

pub fn integrate(p: &ControlProblem, y0: &[f64], controls: &[DVector<f64>]) -> Trajectory {
    noc_core::dynamics::integrate_state(p, &dv(y0), controls).unwrap()
}

/// A point of a control set with a first-order direction and, optionally, a
/// second-order correction.
#[derive(Clone, Debug)]
pub struct ConeProbe {
    pub set: ConvexSet,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Option<Vec<f64>>,
}

fn uniform(rng: &mut impl Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-r..r)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Removes the component of `v` along `n`.
fn tangentialize(v: &mut [f64], n: &[f64]) {
    let s = dot(v, n) / dot(n, n);
    for (a, b) in v.iter_mut().zip(n) {
        *a -= s * b;
    }
}

fn ball_part(rng: &mut impl Rng) -> (ConvexSet, Vec<f64>, Vec<f64>) {
    let m = rng.random_range(1..=3);
    let center = uniform(rng, m, 1.0);
    let radius = rng.random_range(0.5..2.0);
    let mut dir = uniform(rng, m, 1.0);
    let len = dot(&dir, &dir).sqrt().max(1e-3);
    let reach = if rng.random_bool(0.7) { radius } else { rng.random_range(0.0..0.8) * radius };
    dir.iter_mut().for_each(|d| *d *= reach / len);
    let u: Vec<f64> = center.iter().zip(&dir).map(|(c, d)| c + d).collect();
    let mut v = uniform(rng, m, 1.0);
    if reach == radius && rng.random_bool(0.4) {
        tangentialize(&mut v, &dir);
    }
    (ConvexSet::ball(center, radius).unwrap(), u, v)
}

fn box_part(rng: &mut impl Rng) -> (ConvexSet, Vec<f64>, Vec<f64>) {
    let m = rng.random_range(1..=3);
    let lower = uniform(rng, m, 1.0).into_iter().map(|x| x - 1.5).collect::<Vec<_>>();
    let upper = uniform(rng, m, 1.0).into_iter().map(|x| x + 1.5).collect::<Vec<_>>();
    let mut u = vec![0.0; m];
    let mut v = uniform(rng, m, 1.0);
    for i in 0..m {
        u[i] = match rng.random_range(0..3) {
            0 => lower[i],
            1 => upper[i],
            _ => rng.random_range(lower[i]..upper[i]),
        };
        if (u[i] == lower[i] || u[i] == upper[i]) && rng.random_bool(0.4) {
            v[i] = 0.0;
        }
    }
    (ConvexSet::boxed(lower, upper).unwrap(), u, v)
}

fn polyhedron_part(rng: &mut impl Rng) -> (ConvexSet, Vec<f64>, Vec<f64>) {
    let m = rng.random_range(1..=3);
    let u = uniform(rng, m, 1.0);
    let rows: Vec<Vec<f64>> = (0..rng.random_range(1..=4)).map(|_| uniform(rng, m, 1.0)).collect();
    let active = rng.random_range(1..=rows.len());
    let b: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(k, a)| dot(a, &u) + if k < active { 0.0 } else { 0.5 })
        .collect();
    let mut v = uniform(rng, m, 1.0);
    if rng.random_bool(0.4) {
        tangentialize(&mut v, &rows[rng.random_range(0..active)]);
    }
    (ConvexSet::polyhedron(rows, b).unwrap(), u, v)
}

fn part(rng: &mut impl Rng) -> (ConvexSet, Vec<f64>, Vec<f64>) {
    match rng.random_range(0..3) {
        0 => ball_part(rng),
        1 => box_part(rng),
        _ => polyhedron_part(rng),
    }
}

/// Draws probes until one sits clearly away from the cone boundary: the
/// analytic margin exceeds `1e-2` in absolute value and, for second-order
/// probes, every active constraint is either tangent to `v` or strictly
/// inward along it.
pub fn cone_probe(rng: &mut impl Rng) -> ConeProbe {
    loop {
        let (set, u, v) = match rng.random_range(0..4) {
            0 => {
                let (a, ua, va) = part(rng);
                let (b, ub, vb) = part(rng);
                let set = ConvexSet::product(vec![a, b]).unwrap();
                (set, [ua, ub].concat(), [va, vb].concat())
            }
            _ => part(rng),
        };
        let first = noc_core::cones::adjacent_cone_margin(&set, &u, &v).unwrap();
        let rows = set.tangent_halfspaces(&u).unwrap();
        let clean = rows.rows.iter().all(|r| {
            let s = r.dot(&dv(&v)) / r.norm();
            s.abs() < 1e-9 || s < -0.05
        });
        if first >= 0.0 && clean && rng.random_bool(0.5) {
            let w = uniform(rng, u.len(), 1.5);
            let second = noc_core::cones::second_order_margin(&set, &u, &v, &w).unwrap();
            if second.abs() > 1e-2 {
                return ConeProbe { set, u, v, w: Some(w) };
            }
        } else if first.abs() > 1e-2 {
            return ConeProbe { set, u, v, w: None };
        }
    }
}
