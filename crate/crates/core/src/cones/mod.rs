//! First- and second-order adjacent cones of convex control sets, a
//! projection-based numerical oracle for them, and the lift of second-order
//! corrections to admissible controls.

mod set;

pub use set::{ConvexSet, Halfspaces, ACTIVE_TOL};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polycone::{polyhedron_generators, PolyhedronGenerators, DEFAULT_TOL};

/// Membership tolerance applied to analytic margins.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Oracle residual above which a direction is declared outside the cone.
pub const ORACLE_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Member,
    NonMember,
    Inconclusive,
}

/// Evidence for (non-)membership of a direction in an adjacent cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeElementCertificate {
    pub order: u8,
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    pub second: Option<Vec<f64>>,
    pub verdict: Membership,
    /// Analytic margin; `None` stands for `+inf` (no active constraint).
    pub margin: Option<f64>,
    pub oracle: Vec<(f64, f64)>,
    pub oracle_verdict: Membership,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn margin_verdict(margin: f64, scale: f64) -> Membership {
    if margin >= -MEMBERSHIP_TOL * (1.0 + scale) {
        Membership::Member
    } else {
        Membership::NonMember
    }
}

fn check_point(set: &ConvexSet, u: &[f64]) -> Result<()> {
    let d = set.distance(u);
    if d > 1e-10 * (1.0 + u.iter().fold(0.0f64, |a, b| a.max(b.abs()))) {
        return Err(Error::PointNotInSet { distance: d });
    }
    Ok(())
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Analytic margin of `v` in the adjacent cone at `u` (positive inside).
pub fn adjacent_cone_margin(set: &ConvexSet, u: &[f64], v: &[f64]) -> Result<f64> {
    check_point(set, u)?;
    Ok(set.tangent_halfspaces(u)?.margin(v))
}

/// Analytic margin of `w` in the second-order set at `(u, v)`.
pub fn second_order_margin(set: &ConvexSet, u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    check_point(set, u)?;
    let m = set.tangent_halfspaces(u)?.margin(v);
    if margin_verdict(m, norm(v)) != Membership::Member {
        return Err(Error::DirectionNotInCone { margin: m });
    }
    Ok(set.second_order_halfspaces(u, v)?.margin(w))
}

pub fn adjacent_cone_member(set: &ConvexSet, u: &[f64], v: &[f64]) -> Result<ConeElementCertificate> {
    let margin = adjacent_cone_margin(set, u, v)?;
    let oracle = cone_oracle(set, u, v, None, &default_ladder());
    Ok(ConeElementCertificate {
        order: 1,
        point: u.to_vec(),
        direction: v.to_vec(),
        second: None,
        verdict: margin_verdict(margin, norm(v)),
        margin: finite(margin),
        oracle_verdict: oracle_verdict(&oracle),
        oracle,
    })
}

pub fn second_order_member(
    set: &ConvexSet,
    u: &[f64],
    v: &[f64],
    w: &[f64],
) -> Result<ConeElementCertificate> {
    let margin = second_order_margin(set, u, v, w)?;
    let oracle = cone_oracle(set, u, v, Some(w), &default_ladder());
    Ok(ConeElementCertificate {
        order: 2,
        point: u.to_vec(),
        direction: v.to_vec(),
        second: Some(w.to_vec()),
        verdict: margin_verdict(margin, norm(v) + norm(w)),
        margin: finite(margin),
        oracle_verdict: oracle_verdict(&oracle),
        oracle,
    })
}

/// Generators of the second-order set at `(u, v)`.
pub fn second_order_generators(set: &ConvexSet, u: &[f64], v: &[f64]) -> Result<PolyhedronGenerators> {
    let hs = set.second_order_halfspaces(u, v)?;
    let (g, h) = hs.matrix();
    polyhedron_generators(&g, &h, DEFAULT_TOL)
}

/// `h = 10^-1, 10^-1.5, ..., 10^-4`.
pub fn default_ladder() -> Vec<f64> {
    (0..7).map(|k| 10f64.powf(-1.0 - 0.5 * k as f64)).collect()
}

/// Projection residuals `dist(u + h v, U)/h` (first order) or
/// `dist(u + h v + h^2 w, U)/h^2` (second order) along the ladder.
pub fn cone_oracle(set: &ConvexSet, u: &[f64], v: &[f64], w: Option<&[f64]>, ladder: &[f64]) -> Vec<(f64, f64)> {
    ladder
        .iter()
        .map(|&h| {
            let p: Vec<f64> = match w {
                None => u.iter().zip(v).map(|(a, b)| a + h * b).collect(),
                Some(w) => u
                    .iter()
                    .zip(v.iter().zip(w))
                    .map(|(a, (b, c))| a + h * b + h * h * c)
                    .collect(),
            };
            let scale = if w.is_some() { h * h } else { h };
            (h, set.distance(&p) / scale)
        })
        .collect()
}

/// Member iff the finest residual is below [`ORACLE_TOL`] and the last three
/// are nonincreasing; non-member iff the finest residual is at least
/// [`ORACLE_TOL`].
pub fn oracle_verdict(res: &[(f64, f64)]) -> Membership {
    let Some(&(_, last)) = res.last() else {
        return Membership::Inconclusive;
    };
    if last >= ORACLE_TOL {
        return Membership::NonMember;
    }
    let tail: Vec<f64> = res.iter().rev().take(3).map(|r| r.1).collect();
    let nonincreasing = tail.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-9) + 1e-15);
    if nonincreasing {
        Membership::Member
    } else {
        Membership::Inconclusive
    }
}

/// Sampled bound `ell_i = sup_{eps in (0, eps0]} dist(u_i + eps v_i, U)/eps^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBound {
    pub values: Vec<f64>,
    pub passed: bool,
    /// First node with an infinite or non-finite bound.
    pub failed_node: Option<usize>,
}

/// Evaluates the quadratic distance bound on 32 log-uniform samples of
/// `eps` in `[eps0 * 1e-4, eps0]`. A node whose direction is outside the
/// adjacent cone gets an infinite bound.
pub fn quadratic_distance_bound(
    set: &ConvexSet,
    u: &[DVector<f64>],
    v: &[DVector<f64>],
    eps0: f64,
) -> Result<QuadraticBound> {
    if u.len() != v.len() {
        return Err(Error::dim("direction samples", u.len(), v.len()));
    }
    let samples: Vec<f64> = (0..32)
        .map(|k| eps0 * 10f64.powf(-4.0 * k as f64 / 31.0))
        .collect();
    let mut values = Vec::with_capacity(u.len());
    let mut failed_node = None;
    for (i, (ui, vi)) in u.iter().zip(v).enumerate() {
        let margin = adjacent_cone_margin(set, ui.as_slice(), vi.as_slice())?;
        let ell = if margin_verdict(margin, vi.norm()) != Membership::Member {
            f64::INFINITY
        } else {
            samples
                .iter()
                .map(|&e| set.distance((ui + vi * e).as_slice()) / (e * e))
                .fold(0.0, f64::max)
        };
        if !ell.is_finite() && failed_node.is_none() {
            failed_node = Some(i);
        }
        values.push(ell);
    }
    Ok(QuadraticBound {
        passed: failed_node.is_none(),
        values,
        failed_node,
    })
}

/// `sigma_eps = (P_U(u + eps v + eps^2 sigma) - u - eps v) / eps^2` per node,
/// so that `u + eps v + eps^2 sigma_eps` is admissible. Checks that each
/// `sigma` lies in the second-order set and that
/// `|sigma_eps| <= |ell| + 2 |sigma|` in the discrete `L^2` sense.
pub fn lift_sigma(
    set: &ConvexSet,
    u: &[DVector<f64>],
    v: &[DVector<f64>],
    sigma: &[DVector<f64>],
    eps: f64,
) -> Result<Vec<DVector<f64>>> {
    if u.len() != v.len() || u.len() != sigma.len() {
        return Err(Error::dim("lift samples", u.len(), sigma.len().min(v.len())));
    }
    if eps <= 0.0 {
        return Ok(sigma.to_vec());
    }
    for (i, ((ui, vi), si)) in u.iter().zip(v).zip(sigma).enumerate() {
        let m = second_order_margin(set, ui.as_slice(), vi.as_slice(), si.as_slice())
            .map_err(|_| Error::SigmaNotInB { node: i })?;
        if margin_verdict(m, vi.norm() + si.norm()) != Membership::Member {
            return Err(Error::SigmaNotInB { node: i });
        }
    }
    let bound = quadratic_distance_bound(set, u, v, eps)?;
    if let Some(node) = bound.failed_node {
        return Err(Error::BoundNotVerified { node });
    }
    let lifted: Vec<DVector<f64>> = u
        .iter()
        .zip(v)
        .zip(sigma)
        .map(|((ui, vi), si)| {
            let base = ui + vi * eps;
            (set.project((&base + si * (eps * eps)).as_slice()) - base) / (eps * eps)
        })
        .collect();
    let l2 = |it: &mut dyn Iterator<Item = f64>| it.map(|x| x * x).sum::<f64>().sqrt();
    let lhs = l2(&mut lifted.iter().map(|s| s.norm()));
    let rhs = l2(&mut bound.values.iter().copied()) + 2.0 * l2(&mut sigma.iter().map(|s| s.norm()));
    if lhs > rhs * (1.0 + 1e-12) + 1e-14 {
        let node = lifted
            .iter()
            .zip(sigma)
            .zip(&bound.values)
            .position(|((l, s), b)| l.norm() > b + 2.0 * s.norm() + 1e-12)
            .unwrap_or(0);
        return Err(Error::BoundViolated { node });
    }
    Ok(lifted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn ball_boundary_examples() {
        let b = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let c = adjacent_cone_member(&b, &[0.0, -1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(c.verdict, Membership::Member);
        assert_eq!(c.oracle_verdict, Membership::Member);
        let c = adjacent_cone_member(&b, &[0.0, -1.0], &[0.0, -1.0]).unwrap();
        assert_eq!(c.verdict, Membership::NonMember);
        assert_eq!(c.oracle_verdict, Membership::NonMember);
        let c = second_order_member(&b, &[0.0, -1.0], &[1.0, 0.0], &[0.0, 0.5]).unwrap();
        assert_eq!(c.verdict, Membership::Member);
        let c = second_order_member(&b, &[0.0, -1.0], &[1.0, 0.0], &[0.0, 0.25]).unwrap();
        assert_eq!(c.verdict, Membership::NonMember);
        assert_eq!(c.oracle_verdict, Membership::NonMember);
        assert!(matches!(
            adjacent_cone_member(&b, &[0.0, -2.0], &[1.0, 0.0]),
            Err(Error::PointNotInSet { .. })
        ));
    }

    #[test]
    fn lift_of_ball_tangent() {
        let b = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let u = vec![dv(&[0.0, -1.0]); 4];
        let v = vec![dv(&[1.0, 0.0]); 4];
        let s = vec![dv(&[0.0, 0.5]); 4];
        let bound = quadratic_distance_bound(&b, &u, &v, 0.1).unwrap();
        assert!(bound.passed);
        assert!(bound.values.iter().all(|x| (x - 0.5).abs() < 1e-3));
        for eps in [1e-1, 1e-2] {
            let l = lift_sigma(&b, &u, &v, &s, eps).unwrap();
            for li in &l {
                assert!((li - &s[0]).norm() < 2.0 * eps * eps);
                let p = &u[0] + &v[0] * eps + li * (eps * eps);
                assert!(b.distance(p.as_slice()) < 1e-15);
            }
        }
        let bad = vec![dv(&[0.0, 0.1]); 4];
        assert!(matches!(
            lift_sigma(&b, &u, &v, &bad, 0.1),
            Err(Error::SigmaNotInB { node: 0 })
        ));
    }
}
