use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polycone::{polyhedron_generators, DEFAULT_TOL};

/// Tolerance deciding whether a constraint of the set is active.
pub const ACTIVE_TOL: f64 = 1e-9;

/// Closed convex control sets with exact projections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ConvexSet {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Bounds may be infinite.
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// `{u : a u <= b}`, `a` given by rows.
    Polyhedron {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Product {
        parts: Vec<ConvexSet>,
    },
}

/// `{w : a w <= h}` with `a` given by rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspaces {
    pub dim: usize,
    pub rows: Vec<DVector<f64>>,
    pub rhs: Vec<f64>,
}

impl Halfspaces {
    pub fn whole(dim: usize) -> Self {
        Halfspaces {
            dim,
            rows: vec![],
            rhs: vec![],
        }
    }

    /// `min_i (h_i - a_i.w) / |a_i|`; `+inf` when there are no rows.
    pub fn margin(&self, w: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w);
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(a, h)| {
                let n = a.norm();
                if n == 0.0 {
                    if *h >= 0.0 {
                        f64::INFINITY
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    (h - a.dot(&w)) / n
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn matrix(&self) -> (DMatrix<f64>, DVector<f64>) {
        let mut g = DMatrix::zeros(self.rows.len(), self.dim);
        for (i, r) in self.rows.iter().enumerate() {
            g.set_row(i, &r.transpose());
        }
        (g, DVector::from_column_slice(&self.rhs))
    }

    fn append(&mut self, other: Halfspaces, offset: usize) {
        for (r, h) in other.rows.into_iter().zip(other.rhs) {
            let mut row = DVector::zeros(self.dim);
            row.rows_mut(offset, other.dim).copy_from(&r);
            self.rows.push(row);
            self.rhs.push(h);
        }
    }
}

impl ConvexSet {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let s = ConvexSet::Ball { center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let s = ConvexSet::Box { lower, upper };
        s.validate()?;
        Ok(s)
    }

    pub fn whole_space(dim: usize) -> Self {
        ConvexSet::Box {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn polyhedron(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let s = ConvexSet::Polyhedron { a, b };
        s.validate()?;
        Ok(s)
    }

    pub fn product(parts: Vec<ConvexSet>) -> Result<Self> {
        let s = ConvexSet::Product { parts };
        s.validate()?;
        Ok(s)
    }

    /// Checks shapes, finiteness and non-emptiness.
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Ball { center, radius } => {
                if center.is_empty() || !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidSet("ball center must be finite and non-empty".into()));
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidSet(format!("ball radius must be positive, got {radius}")));
                }
            }
            ConvexSet::Box { lower, upper } => {
                if lower.len() != upper.len() || lower.is_empty() {
                    return Err(Error::InvalidSet("box bounds must have equal, non-zero length".into()));
                }
                for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
                    if l.is_nan() || u.is_nan() || l > u || *l == f64::INFINITY || *u == f64::NEG_INFINITY {
                        return Err(Error::InvalidSet(format!("box bounds invalid at index {i}")));
                    }
                }
            }
            ConvexSet::Polyhedron { a, b } => {
                let m = a.first().map_or(0, |r| r.len());
                if a.is_empty() || m == 0 || a.len() != b.len() || a.iter().any(|r| r.len() != m) {
                    return Err(Error::InvalidSet("polyhedron rows must be non-empty and consistent".into()));
                }
                if !a.iter().flatten().chain(b).all(|v| v.is_finite()) {
                    return Err(Error::InvalidSet("polyhedron data must be finite".into()));
                }
                if project_polyhedron(a, b, &DVector::zeros(m)).is_none() {
                    return Err(Error::InvalidSet("polyhedron is empty".into()));
                }
            }
            ConvexSet::Product { parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidSet("product needs at least one factor".into()));
                }
                for p in parts {
                    p.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::Polyhedron { a, .. } => a[0].len(),
            ConvexSet::Product { parts } => parts.iter().map(|p| p.dim()).sum(),
        }
    }

    fn check_dim(&self, what: &str, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::dim(what, self.dim(), x.len()));
        }
        Ok(())
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, u: &[f64]) -> DVector<f64> {
        match self {
            ConvexSet::Ball { center, radius } => {
                let d: DVector<f64> = DVector::from_iterator(u.len(), u.iter().zip(center).map(|(a, c)| a - c));
                let n = d.norm();
                if n <= *radius {
                    DVector::from_column_slice(u)
                } else {
                    DVector::from_column_slice(center) + d * (radius / n)
                }
            }
            ConvexSet::Box { lower, upper } => DVector::from_iterator(
                u.len(),
                u.iter().zip(lower.iter().zip(upper)).map(|(x, (l, h))| x.clamp(*l, *h)),
            ),
            ConvexSet::Polyhedron { a, b } => {
                project_polyhedron(a, b, &DVector::from_column_slice(u)).expect("validated non-empty")
            }
            ConvexSet::Product { parts } => {
                let mut out = Vec::with_capacity(u.len());
                let mut off = 0;
                for p in parts {
                    let d = p.dim();
                    out.extend(p.project(&u[off..off + d]).iter());
                    off += d;
                }
                DVector::from_vec(out)
            }
        }
    }

    pub fn distance(&self, u: &[f64]) -> f64 {
        (self.project(u) - DVector::from_column_slice(u)).norm()
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        match self {
            ConvexSet::Polyhedron { a, b } => a
                .iter()
                .zip(b)
                .all(|(r, bi)| r.iter().zip(u).map(|(x, y)| x * y).sum::<f64>() <= bi + tol),
            ConvexSet::Product { parts } => {
                let mut off = 0;
                parts.iter().all(|p| {
                    let d = p.dim();
                    off += d;
                    p.contains(&u[off - d..off], tol)
                })
            }
            _ => self.distance(u) <= tol,
        }
    }

    /// Smallest axis-aligned box containing the set; `None` if unbounded.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            ConvexSet::Ball { center, radius } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            ConvexSet::Box { lower, upper } => lower
                .iter()
                .chain(upper)
                .all(|x| x.is_finite())
                .then(|| (lower.clone(), upper.clone())),
            ConvexSet::Polyhedron { .. } => {
                let m = self.dim();
                let (g, h) = self.as_halfspaces().matrix();
                let gens = polyhedron_generators(&g, &h, DEFAULT_TOL).ok()?;
                if !gens.rays.is_empty() || !gens.lineality.is_empty() || gens.points.is_empty() {
                    return None;
                }
                let mut lo = vec![f64::INFINITY; m];
                let mut hi = vec![f64::NEG_INFINITY; m];
                for p in &gens.points {
                    for i in 0..m {
                        lo[i] = lo[i].min(p[i]);
                        hi[i] = hi[i].max(p[i]);
                    }
                }
                Some((lo, hi))
            }
            ConvexSet::Product { parts } => {
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for p in parts {
                    let (l, h) = p.bounding_box()?;
                    lo.extend(l);
                    hi.extend(h);
                }
                Some((lo, hi))
            }
        }
    }

    /// Points of a bounded set: a grid with `per_axis` points per coordinate
    /// of the bounding box, filtered by membership, plus `4 * per_axis`
    /// boundary points for balls.
    pub fn samples(&self, per_axis: usize) -> Vec<DVector<f64>> {
        let Some((lo, hi)) = self.bounding_box() else {
            return vec![];
        };
        let m = lo.len();
        let k = per_axis.max(2);
        let mut out = Vec::new();
        let mut idx = vec![0usize; m];
        loop {
            let x: Vec<f64> = (0..m)
                .map(|i| lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (k - 1) as f64)
                .collect();
            if self.contains(&x, 1e-12) {
                out.push(DVector::from_vec(x));
            }
            let mut d = 0;
            while d < m {
                idx[d] += 1;
                if idx[d] < k {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == m {
                break;
            }
        }
        if let ConvexSet::Ball { center, radius } = self {
            if m == 2 {
                for s in 0..4 * k {
                    let a = std::f64::consts::TAU * s as f64 / (4 * k) as f64;
                    out.push(DVector::from_column_slice(&[
                        center[0] + radius * a.cos(),
                        center[1] + radius * a.sin(),
                    ]));
                }
            }
        }
        out
    }

    fn as_halfspaces(&self) -> Halfspaces {
        match self {
            ConvexSet::Polyhedron { a, b } => Halfspaces {
                dim: self.dim(),
                rows: a.iter().map(|r| DVector::from_column_slice(r)).collect(),
                rhs: b.clone(),
            },
            _ => Halfspaces::whole(self.dim()),
        }
    }

    /// The adjacent (first-order tangent) cone at `u` as halfspaces
    /// `{v : a v <= 0}`.
    pub fn tangent_halfspaces(&self, u: &[f64]) -> Result<Halfspaces> {
        self.check_dim("point", u)?;
        let m = self.dim();
        let mut hs = Halfspaces::whole(m);
        match self {
            ConvexSet::Ball { center, radius } => {
                let d = DVector::from_iterator(m, u.iter().zip(center).map(|(a, c)| a - c));
                if d.norm() >= radius - ACTIVE_TOL {
                    hs.rows.push(d);
                    hs.rhs.push(0.0);
                }
            }
            ConvexSet::Box { lower, upper } => {
                for i in 0..m {
                    if (u[i] - lower[i]).abs() <= ACTIVE_TOL {
                        let mut r = DVector::zeros(m);
                        r[i] = -1.0;
                        hs.rows.push(r);
                        hs.rhs.push(0.0);
                    }
                    if (upper[i] - u[i]).abs() <= ACTIVE_TOL {
                        let mut r = DVector::zeros(m);
                        r[i] = 1.0;
                        hs.rows.push(r);
                        hs.rhs.push(0.0);
                    }
                }
            }
            ConvexSet::Polyhedron { a, b } => {
                for (row, bi) in a.iter().zip(b) {
                    let r = DVector::from_column_slice(row);
                    if bi - r.dot(&DVector::from_column_slice(u)) <= ACTIVE_TOL * (1.0 + r.norm()) {
                        hs.rows.push(r);
                        hs.rhs.push(0.0);
                    }
                }
            }
            ConvexSet::Product { parts } => {
                let mut off = 0;
                for p in parts {
                    let d = p.dim();
                    hs.append(p.tangent_halfspaces(&u[off..off + d])?, off);
                    off += d;
                }
            }
        }
        Ok(hs)
    }

    /// The second-order adjacent set at `(u, v)` as `{w : a w <= h}`.
    /// Requires `v` in the adjacent cone at `u`.
    pub fn second_order_halfspaces(&self, u: &[f64], v: &[f64]) -> Result<Halfspaces> {
        self.check_dim("point", u)?;
        self.check_dim("direction", v)?;
        let m = self.dim();
        let mut hs = Halfspaces::whole(m);
        match self {
            ConvexSet::Ball { center, radius } => {
                let d = DVector::from_iterator(m, u.iter().zip(center).map(|(a, c)| a - c));
                if d.norm() >= radius - ACTIVE_TOL {
                    let vv = DVector::from_column_slice(v);
                    // Tangent directions curve back into the ball; inward ones
                    // leave room in every direction.
                    if d.dot(&vv) >= -ACTIVE_TOL * d.norm() * (1.0 + vv.norm()) {
                        hs.rhs.push(-0.5 * vv.norm_squared());
                        hs.rows.push(d);
                    }
                }
            }
            ConvexSet::Box { .. } | ConvexSet::Polyhedron { .. } => {
                let t = self.tangent_halfspaces(u)?;
                let vv = DVector::from_column_slice(v);
                for r in t.rows {
                    if r.dot(&vv).abs() <= ACTIVE_TOL * r.norm() * (1.0 + vv.norm()) {
                        hs.rows.push(r);
                        hs.rhs.push(0.0);
                    }
                }
            }
            ConvexSet::Product { parts } => {
                let mut off = 0;
                for p in parts {
                    let d = p.dim();
                    hs.append(p.second_order_halfspaces(&u[off..off + d], &v[off..off + d])?, off);
                    off += d;
                }
            }
        }
        Ok(hs)
    }
}

/// Exact projection onto `{x : a x <= b}` by enumerating active sets of
/// linearly independent rows; `None` if the polyhedron is empty.
pub(crate) fn project_polyhedron(a: &[Vec<f64>], b: &[f64], x: &DVector<f64>) -> Option<DVector<f64>> {
    let m = x.len();
    let q = a.len();
    let rows: Vec<DVector<f64>> = a.iter().map(|r| DVector::from_column_slice(r)).collect();
    let feasible = |p: &DVector<f64>| {
        rows.iter()
            .zip(b)
            .all(|(r, bi)| r.dot(p) <= bi + 1e-12 * (1.0 + bi.abs() + r.norm() * p.norm()))
    };
    if feasible(x) {
        return Some(x.clone());
    }
    let mut subset: Vec<usize> = Vec::new();
    for size in 1..=q.min(m) {
        subset.clear();
        subset.extend(0..size);
        loop {
            let a_s = DMatrix::from_fn(size, m, |i, j| rows[subset[i]][j]);
            let gram = &a_s * a_s.transpose();
            if let Some(chol) = gram.clone().cholesky() {
                let bs = DVector::from_iterator(size, subset.iter().map(|&i| b[i]));
                let lambda = chol.solve(&(&a_s * x - bs));
                let cond_ok = gram.determinant().abs() > 1e-14 * gram.amax().powi(size as i32);
                if cond_ok && lambda.iter().all(|l| *l >= -1e-12) {
                    let p = x - a_s.transpose() * lambda;
                    if feasible(&p) {
                        return Some(p);
                    }
                }
            }
            if !next_combination(&mut subset, q) {
                break;
            }
        }
    }
    None
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_projection() {
        let b = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let p = b.project(&[3.0, 4.0]);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(b.distance(&[0.1, 0.2]), 0.0);
    }

    #[test]
    fn polyhedron_projection_matches_box() {
        let poly = ConvexSet::polyhedron(
            vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]],
            vec![1.0, 1.0, 2.0, 0.0],
        )
        .unwrap();
        let bx = ConvexSet::boxed(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        for x in [[3.0, 3.0], [0.5, -4.0], [-2.0, 1.0], [0.2, 0.3]] {
            assert!((poly.project(&x) - bx.project(&x)).amax() < 1e-14);
        }
    }

    #[test]
    fn polyhedron_projection_onto_slanted_face() {
        // triangle x >= 0, y >= 0, x + y <= 1
        let t = ConvexSet::polyhedron(
            vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
            vec![0.0, 0.0, 1.0],
        )
        .unwrap();
        let p = t.project(&[1.0, 1.0]);
        assert!((p[0] - 0.5).abs() < 1e-14 && (p[1] - 0.5).abs() < 1e-14);
        let p = t.project(&[2.0, -1.0]);
        assert!((p[0] - 1.0).abs() < 1e-14 && p[1].abs() < 1e-14);
    }

    #[test]
    fn invalid_sets_are_rejected() {
        assert!(ConvexSet::ball(vec![0.0], -1.0).is_err());
        assert!(ConvexSet::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(ConvexSet::polyhedron(vec![vec![1.0], vec![-1.0]], vec![-1.0, -1.0]).is_err());
    }

    #[test]
    fn tangent_and_second_order_rows() {
        let b = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let t = b.tangent_halfspaces(&[0.0, -1.0]).unwrap();
        assert_eq!(t.margin(&[1.0, 0.0]), 0.0);
        assert!(t.margin(&[0.0, -1.0]) < 0.0);
        let s = b.second_order_halfspaces(&[0.0, -1.0], &[1.0, 0.0]).unwrap();
        assert!(s.margin(&[0.0, 0.5]).abs() < 1e-15);
        assert!(s.margin(&[0.0, 0.4]) < 0.0);
        let inward = b.second_order_halfspaces(&[0.0, -1.0], &[0.0, 1.0]).unwrap();
        assert_eq!(inward.margin(&[5.0, -5.0]), f64::INFINITY);
        let interior = b.tangent_halfspaces(&[0.1, 0.1]).unwrap();
        assert_eq!(interior.margin(&[7.0, 7.0]), f64::INFINITY);
    }
}
