//! Generators of polyhedral cones and polyhedra by the double-description
//! method.
//!
//! A cone `{x : A x <= 0, E x = 0}` is written as `lineality + cone(rays)`;
//! a polyhedron `{x : G x <= h}` as `conv(points) + cone(rays) + lineality`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConeGenerators {
    pub rays: Vec<DVector<f64>>,
    pub lineality: Vec<DVector<f64>>,
}

impl ConeGenerators {
    /// True when the cone is `{0}`.
    pub fn is_trivial(&self) -> bool {
        self.rays.is_empty() && self.lineality.is_empty()
    }

    /// Rays plus both signs of each lineality vector.
    pub fn all_directions(&self) -> Vec<DVector<f64>> {
        let mut out = self.rays.clone();
        for l in &self.lineality {
            out.push(l.clone());
            out.push(-l);
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolyhedronGenerators {
    pub points: Vec<DVector<f64>>,
    pub rays: Vec<DVector<f64>>,
    pub lineality: Vec<DVector<f64>>,
}

impl PolyhedronGenerators {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Orthonormal bases `(row space, null space)` of `m`, with `dim` columns.
pub fn row_and_null_space(m: &DMatrix<f64>, dim: usize, tol: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    if m.nrows() == 0 {
        return (DMatrix::zeros(dim, 0), DMatrix::identity(dim, dim));
    }
    let rows = m.nrows().max(dim);
    let mut padded = DMatrix::zeros(rows, dim);
    padded.view_mut((0, 0), (m.nrows(), dim)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.amax();
    let cut = tol * smax.max(1.0);
    let mut range = Vec::new();
    let mut null = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        let v = vt.row(i).transpose();
        if *s > cut {
            range.push(v);
        } else {
            null.push(v);
        }
    }
    (columns(dim, &range), columns(dim, &null))
}

fn columns(dim: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    if cols.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(cols)
    }
}

fn rows_matrix(dim: usize, rows: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), dim);
    for (i, r) in rows.iter().enumerate() {
        m.set_row(i, &r.transpose());
    }
    m
}

/// Generators of `{x in R^dim : a.x <= 0 for a in ineq, e.x = 0 for e in eq}`.
pub fn cone_generators(
    dim: usize,
    ineq: &[DVector<f64>],
    eq: &[DVector<f64>],
    tol: f64,
) -> Result<ConeGenerators> {
    for r in ineq.iter().chain(eq) {
        if r.len() != dim {
            return Err(Error::dim("cone row", dim, r.len()));
        }
        if !r.iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateCone("non-finite constraint row".into()));
        }
    }
    // Equalities: restrict to their null space.
    let eq_rows: Vec<DVector<f64>> = eq
        .iter()
        .filter_map(|r| normalized(r, tol))
        .collect();
    let (_, basis) = row_and_null_space(&rows_matrix(dim, &eq_rows), dim, tol);
    let d = basis.ncols();
    if d == 0 {
        return Ok(ConeGenerators::default());
    }
    let reduced: Vec<DVector<f64>> = ineq
        .iter()
        .filter_map(|r| normalized(&(basis.transpose() * r), tol))
        .collect();
    // Lineality of the reduced cone and a basis of its complement.
    let (range, lin) = row_and_null_space(&rows_matrix(d, &reduced), d, tol);
    let lineality: Vec<DVector<f64>> = (0..lin.ncols())
        .map(|i| canonical_sign(&basis * lin.column(i)))
        .collect();
    let r = range.ncols();
    if r == 0 {
        return Ok(ConeGenerators {
            rays: vec![],
            lineality,
        });
    }
    let pointed: Vec<DVector<f64>> = reduced
        .iter()
        .filter_map(|a| normalized(&(range.transpose() * a), tol))
        .collect();
    let rays = pointed_cone_rays(r, &pointed, tol)?;
    let mut rays: Vec<DVector<f64>> = rays
        .into_iter()
        .map(|w| {
            let x = &basis * (&range * w);
            let n = x.norm();
            x / n
        })
        .collect();
    dedup(&mut rays, 1e3 * tol);
    Ok(ConeGenerators { rays, lineality })
}

/// Generators of `{x in R^dim : G x <= h}`.
pub fn polyhedron_generators(
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    tol: f64,
) -> Result<PolyhedronGenerators> {
    let dim = g.ncols();
    let mut ineq = Vec::with_capacity(g.nrows() + 1);
    for i in 0..g.nrows() {
        let mut row = DVector::zeros(dim + 1);
        row.rows_mut(0, dim).copy_from(&g.row(i).transpose());
        row[dim] = -h[i];
        ineq.push(row);
    }
    let mut t_row = DVector::zeros(dim + 1);
    t_row[dim] = -1.0;
    ineq.push(t_row);
    let cone = cone_generators(dim + 1, &ineq, &[], tol)?;
    let mut out = PolyhedronGenerators::default();
    for ray in cone.rays {
        let t = ray[dim];
        let x = ray.rows(0, dim).into_owned();
        if t > tol {
            out.points.push(x / t);
        } else if x.norm() > tol {
            let n = x.norm();
            out.rays.push(x / n);
        }
    }
    for l in cone.lineality {
        let x = l.rows(0, dim).into_owned();
        let n = x.norm();
        if n > tol {
            out.lineality.push(x / n);
        }
    }
    Ok(out)
}

fn normalized(r: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    let n = r.norm();
    (n > tol).then(|| r / n)
}

fn canonical_sign(v: DVector<f64>) -> DVector<f64> {
    let n = v.norm();
    let v = v / n;
    match v.iter().find(|x| x.abs() > 1e-9) {
        Some(x) if *x < 0.0 => -v,
        _ => v,
    }
}

fn dedup(rays: &mut Vec<DVector<f64>>, tol: f64) {
    let mut kept: Vec<DVector<f64>> = Vec::with_capacity(rays.len());
    for r in rays.drain(..) {
        if !kept.iter().any(|k| (k - &r).amax() <= tol) {
            kept.push(r);
        }
    }
    *rays = kept;
}

struct Ray {
    v: DVector<f64>,
    active: Vec<bool>,
}

/// Extreme rays of `{w in R^r : a.w <= 0}` where the rows (unit vectors)
/// span `R^r`.
fn pointed_cone_rays(r: usize, rows: &[DVector<f64>], tol: f64) -> Result<Vec<DVector<f64>>> {
    let q = rows.len();
    // Pick r well-conditioned independent rows by pivoted Gram-Schmidt.
    let mut chosen: Vec<usize> = Vec::with_capacity(r);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(r);
    while chosen.len() < r {
        let mut best = None;
        let mut best_norm = 0.0;
        for (i, a) in rows.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let mut res = a.clone();
            for o in &ortho {
                res -= o * o.dot(&res);
            }
            let n = res.norm();
            if n > best_norm {
                best_norm = n;
                best = Some((i, res));
            }
        }
        match best {
            Some((i, res)) if best_norm > 1e-12 => {
                chosen.push(i);
                ortho.push(res / best_norm);
            }
            _ => {
                return Err(Error::DegenerateCone(
                    "constraint rows do not span the reduced space".into(),
                ))
            }
        }
    }
    let a_s = rows_matrix(r, &chosen.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>());
    let inv = a_s
        .try_inverse()
        .ok_or_else(|| Error::DegenerateCone("initial rows are singular".into()))?;
    let mut order: Vec<usize> = chosen.clone();
    order.extend((0..q).filter(|i| !chosen.contains(i)));
    let mut rays: Vec<Ray> = (0..r)
        .map(|k| {
            let v = -inv.column(k).into_owned();
            let v = &v / v.norm();
            let active = order
                .iter()
                .take(r)
                .map(|&i| rows[i].dot(&v).abs() <= tol)
                .collect();
            Ray { v, active }
        })
        .collect();

    for (step, &ri) in order.iter().enumerate().skip(r) {
        let a = &rows[ri];
        let vals: Vec<f64> = rays.iter().map(|ray| a.dot(&ray.v)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&i| vals[i] > tol).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&i| vals[i] < -tol).collect();
        let mut next: Vec<Ray> = Vec::new();
        for (i, ray) in rays.iter().enumerate() {
            if vals[i] <= tol {
                let mut active = ray.active.clone();
                active.push(vals[i].abs() <= tol);
                next.push(Ray {
                    v: ray.v.clone(),
                    active,
                });
            }
        }
        for &p in &pos {
            for &n in &neg {
                let common: Vec<usize> = (0..step)
                    .filter(|&k| rays[p].active[k] && rays[n].active[k])
                    .collect();
                if common.len() + 2 < r {
                    continue;
                }
                let adjacent = (0..rays.len()).all(|o| {
                    o == p || o == n || !common.iter().all(|&k| rays[o].active[k])
                });
                if !adjacent {
                    continue;
                }
                let v = &rays[n].v * vals[p] - &rays[p].v * vals[n];
                let norm = v.norm();
                if norm <= tol {
                    continue;
                }
                let v = v / norm;
                let mut active: Vec<bool> = order[..step]
                    .iter()
                    .map(|&k| rows[k].dot(&v).abs() <= tol)
                    .collect();
                for &k in &common {
                    active[k] = true;
                }
                active.push(true);
                next.push(Ray { v, active });
            }
        }
        rays = next;
        if rays.is_empty() {
            break;
        }
    }
    Ok(rays.into_iter().map(|r| r.v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn contains(set: &[DVector<f64>], x: &[f64]) -> bool {
        let t = v(x).normalize();
        set.iter().any(|r| (r - &t).amax() < 1e-9)
    }

    #[test]
    fn orthant_rays() {
        let rows = [v(&[-1.0, 0.0, 0.0]), v(&[0.0, -1.0, 0.0]), v(&[0.0, 0.0, -1.0])];
        let g = cone_generators(3, &rows, &[], DEFAULT_TOL).unwrap();
        assert_eq!(g.rays.len(), 3);
        assert!(g.lineality.is_empty());
        assert!(contains(&g.rays, &[1.0, 0.0, 0.0]));
    }

    #[test]
    fn square_pyramid_has_four_rays() {
        // x3 >= |x1|, x3 >= |x2|
        let rows = [
            v(&[1.0, 0.0, -1.0]),
            v(&[-1.0, 0.0, -1.0]),
            v(&[0.0, 1.0, -1.0]),
            v(&[0.0, -1.0, -1.0]),
        ];
        let g = cone_generators(3, &rows, &[], DEFAULT_TOL).unwrap();
        assert_eq!(g.rays.len(), 4);
        for s in [[1.0, 1.0, 1.0], [1.0, -1.0, 1.0], [-1.0, 1.0, 1.0], [-1.0, -1.0, 1.0]] {
            assert!(contains(&g.rays, &s));
        }
    }

    #[test]
    fn halfspace_has_lineality() {
        let g = cone_generators(3, &[v(&[0.0, 0.0, 1.0])], &[], DEFAULT_TOL).unwrap();
        assert_eq!(g.lineality.len(), 2);
        assert_eq!(g.rays.len(), 1);
        assert!(contains(&g.rays, &[0.0, 0.0, -1.0]));
    }

    #[test]
    fn equalities_and_redundant_rows() {
        // x1 + x2 + x3 = 0, x1 <= 0, x2 <= 0, and a redundant x1 + x2 <= 0.
        let g = cone_generators(
            3,
            &[v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0]), v(&[1.0, 1.0, 0.0])],
            &[v(&[1.0, 1.0, 1.0])],
            DEFAULT_TOL,
        )
        .unwrap();
        assert_eq!(g.rays.len(), 2);
        assert!(contains(&g.rays, &[-1.0, 0.0, 1.0]));
        assert!(contains(&g.rays, &[0.0, -1.0, 1.0]));
    }

    #[test]
    fn trivial_cone() {
        let g = cone_generators(2, &[v(&[1.0, 0.0]), v(&[-1.0, 0.0]), v(&[0.0, 1.0]), v(&[0.0, -1.0])], &[], DEFAULT_TOL)
            .unwrap();
        assert!(g.is_trivial());
    }

    #[test]
    fn polyhedron_points_and_rays() {
        // y >= x^2 approximated by two tangents, plus x <= 1.
        let g = DMatrix::from_row_slice(3, 2, &[2.0, -1.0, -2.0, -1.0, 1.0, 0.0]);
        let h = v(&[1.0, 1.0, 1.0]);
        let p = polyhedron_generators(&g, &h, DEFAULT_TOL).unwrap();
        assert!(p.points.iter().any(|x| (x - v(&[0.0, -1.0])).amax() < 1e-9));
        assert!(p.points.iter().any(|x| (x - v(&[1.0, 1.0])).amax() < 1e-9));
        assert_eq!(p.points.len(), 2);
        assert_eq!(p.rays.len(), 2);
        assert!(contains(&p.rays, &[0.0, 1.0]));
        assert!(contains(&p.rays, &[-1.0, 2.0]));
        let empty = polyhedron_generators(
            &DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            &v(&[-1.0, -1.0]),
            DEFAULT_TOL,
        )
        .unwrap();
        assert!(empty.is_empty());
    }
}
