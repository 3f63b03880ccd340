use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{Binding, Expr};

/// Christoffel symbols `Γ^k_ij`, stored at `k*n*n + i*n + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Christoffel {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    /// Sets `Γ^k_ij` and `Γ^k_ji`.
    pub fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let n = self.n;
        self.data[(k * n + i) * n + j] = v;
        self.data[(k * n + j) * n + i] = v;
    }

    /// `Γ^k_ij a^i b^j`.
    pub fn contract(&self, a: &[f64], b: &[f64]) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |k, _| {
            let mut s = 0.0;
            for i in 0..n {
                if a[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    s += self.get(k, i, j) * a[i] * b[j];
                }
            }
            s
        })
    }

    /// The matrix `M^k_j = Γ^k_ij a^i`.
    pub fn along(&self, a: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |k, j| (0..n).map(|i| self.get(k, i, j) * a[i]).sum())
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }
}

/// Partial derivatives `∂_l Γ^k_ij`; entry `l` is the derivative along `x^l`.
pub type ChristoffelPartials = Vec<Christoffel>;

/// Riemann tensor `R^l_ijk`, the components of `R(∂_i, ∂_j)∂_k` with
/// `R(X, Y) = ∇_X∇_Y - ∇_Y∇_X - ∇_[X,Y]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curvature {
    n: usize,
    data: Vec<f64>,
}

impl Curvature {
    pub fn from_christoffel(g: &Christoffel, dg: &ChristoffelPartials) -> Self {
        let n = g.dim();
        let mut data = vec![0.0; n * n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = dg[i].get(l, j, k) - dg[j].get(l, i, k);
                        for m in 0..n {
                            v += g.get(l, i, m) * g.get(m, j, k) - g.get(l, j, m) * g.get(m, i, k);
                        }
                        data[((l * n + i) * n + j) * n + k] = v;
                    }
                }
            }
        }
        Curvature { n, data }
    }

    pub fn zeros(n: usize) -> Self {
        Curvature {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        let n = self.n;
        self.data[((l * n + i) * n + j) * n + k]
    }

    /// The vector `R(x, y)z`.
    pub fn apply(&self, x: &[f64], y: &[f64], z: &[f64]) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |l, _| {
            let mut s = 0.0;
            for i in 0..n {
                if x[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    if y[j] == 0.0 {
                        continue;
                    }
                    for k in 0..n {
                        s += self.get(l, i, j, k) * x[i] * y[j] * z[k];
                    }
                }
            }
            s
        })
    }
}

/// A user-supplied Riemannian metric on an open subset of `R^n`.
pub trait MetricField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn metric(&self, x: &[f64]) -> DMatrix<f64>;

    /// `∂_l g` for each `l`, when available in closed form.
    fn metric_partials(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        None
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
    }
}

/// A metric whose entries are expressions in `x1..xn`.
#[derive(Clone, Debug)]
pub struct ExprMetric {
    n: usize,
    entries: Vec<Expr>,
    partials: Vec<Vec<Expr>>,
}

impl ExprMetric {
    /// `rows` is the full `n x n` matrix of expression strings; it must be
    /// symmetric as written (checked numerically at use).
    pub fn parse(rows: &[Vec<String>], consts: &[(String, f64)]) -> Result<ExprMetric> {
        let n = rows.len();
        let resolve = |name: &str| {
            if let Some(rest) = name.strip_prefix('x') {
                if let Ok(i) = rest.parse::<usize>() {
                    if (1..=n).contains(&i) {
                        return Some(Binding::Var(i - 1));
                    }
                }
            }
            consts
                .iter()
                .find(|(c, _)| c == name)
                .map(|(_, v)| Binding::Const(*v))
        };
        let mut entries = Vec::with_capacity(n * n);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::input(
                    format!("chart.metric[{r}]"),
                    format!("expected {n} entries, got {}", row.len()),
                ));
            }
            for src in row {
                entries.push(Expr::parse(src, &resolve)?);
            }
        }
        let partials = (0..n)
            .map(|l| entries.iter().map(|e| e.derivative(l)).collect())
            .collect();
        Ok(ExprMetric {
            n,
            entries,
            partials,
        })
    }
}

impl MetricField for ExprMetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.entries[i * self.n + j].eval(x))
    }

    fn metric_partials(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        Some(
            self.partials
                .iter()
                .map(|p| DMatrix::from_fn(self.n, self.n, |i, j| p[i * self.n + j].eval(x)))
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SphereCoords {
    /// Colatitude and longitude on `S^2`.
    Spherical,
    /// Stereographic projection from the south pole; any dimension.
    Stereographic,
}

#[derive(Clone, Debug)]
pub enum ChartKind {
    Euclidean,
    Sphere { radius: f64, coords: SphereCoords },
    /// Upper half-space model with constant curvature `-c`.
    Hyperbolic { c: f64 },
    /// `base x R^flat` with the product metric.
    Product { base: Box<ManifoldChart>, flat: usize },
    Custom(Arc<dyn MetricField>),
}

#[derive(Clone, Debug)]
pub struct ManifoldChart {
    dim: usize,
    kind: ChartKind,
    trust_radius: f64,
    steps_per_unit: usize,
}

const POLE_MARGIN: f64 = 1e-9;
/// Step for differencing Christoffel symbols of custom metrics.
const CHRISTOFFEL_FD_STEP: f64 = 1e-4;
/// Step for differencing custom metrics without closed-form partials.
const METRIC_FD_STEP: f64 = 1e-5;

impl ManifoldChart {
    fn with_kind(dim: usize, kind: ChartKind, trust_radius: f64) -> Self {
        ManifoldChart {
            dim,
            kind,
            trust_radius,
            steps_per_unit: 256,
        }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::with_kind(dim, ChartKind::Euclidean, f64::INFINITY)
    }

    /// `S^2` of the given radius in colatitude/longitude coordinates.
    pub fn sphere_spherical(radius: f64) -> Result<Self> {
        check_positive("chart.radius", radius)?;
        Ok(Self::with_kind(
            2,
            ChartKind::Sphere {
                radius,
                coords: SphereCoords::Spherical,
            },
            0.45 * std::f64::consts::PI * radius,
        ))
    }

    /// `S^dim` of the given radius in stereographic coordinates.
    pub fn sphere_stereographic(dim: usize, radius: f64) -> Result<Self> {
        check_positive("chart.radius", radius)?;
        Ok(Self::with_kind(
            dim,
            ChartKind::Sphere {
                radius,
                coords: SphereCoords::Stereographic,
            },
            0.45 * std::f64::consts::PI * radius,
        ))
    }

    /// Hyperbolic space of constant negative `curvature` in the upper
    /// half-space model (last coordinate positive).
    pub fn hyperbolic(dim: usize, curvature: f64) -> Result<Self> {
        if !(curvature < 0.0 && curvature.is_finite()) {
            return Err(Error::input(
                "chart.curvature",
                format!("hyperbolic curvature must be negative, got {curvature}"),
            ));
        }
        Ok(Self::with_kind(
            dim,
            ChartKind::Hyperbolic { c: -curvature },
            f64::INFINITY,
        ))
    }

    pub fn product(base: ManifoldChart, flat: usize) -> Self {
        let trust = base.trust_radius;
        let steps = base.steps_per_unit;
        let mut c = Self::with_kind(
            base.dim + flat,
            ChartKind::Product {
                base: Box::new(base),
                flat,
            },
            trust,
        );
        c.steps_per_unit = steps;
        c
    }

    pub fn custom(field: Arc<dyn MetricField>, trust_radius: f64) -> Self {
        Self::with_kind(field.dim(), ChartKind::Custom(field), trust_radius)
    }

    pub fn with_trust_radius(mut self, r: f64) -> Self {
        self.trust_radius = r;
        self
    }

    pub fn with_steps_per_unit(mut self, k: usize) -> Self {
        self.steps_per_unit = k.max(1);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ChartKind {
        &self.kind
    }

    pub fn trust_radius(&self) -> f64 {
        self.trust_radius
    }

    pub fn steps_per_unit(&self) -> usize {
        self.steps_per_unit
    }

    /// True when Christoffel symbols vanish identically.
    pub fn is_flat(&self) -> bool {
        match &self.kind {
            ChartKind::Euclidean => true,
            ChartKind::Product { base, .. } => base.is_flat(),
            _ => false,
        }
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        if x.len() != self.dim || !x.iter().all(|v| v.is_finite()) {
            return false;
        }
        match &self.kind {
            ChartKind::Euclidean => true,
            ChartKind::Sphere { coords, .. } => match coords {
                SphereCoords::Spherical => {
                    x[0] > POLE_MARGIN && x[0] < std::f64::consts::PI - POLE_MARGIN
                }
                SphereCoords::Stereographic => true,
            },
            ChartKind::Hyperbolic { .. } => x[self.dim - 1] > 0.0,
            ChartKind::Product { base, .. } => base.in_domain(&x[..base.dim]),
            ChartKind::Custom(f) => f.in_domain(x),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::dim("point", self.dim, x.len()));
        }
        if !self.in_domain(x) {
            return Err(Error::ChartEscape { point: x.to_vec() });
        }
        Ok(())
    }

    fn raw_metric(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        match &self.kind {
            ChartKind::Euclidean => DMatrix::identity(n, n),
            ChartKind::Sphere { radius, coords } => match coords {
                SphereCoords::Spherical => {
                    let s = x[0].sin();
                    DMatrix::from_diagonal(&DVector::from_vec(vec![
                        radius * radius,
                        radius * radius * s * s,
                    ]))
                }
                SphereCoords::Stereographic => {
                    let q = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
                    let f = 2.0 * radius / q;
                    DMatrix::identity(n, n) * (f * f)
                }
            },
            ChartKind::Hyperbolic { c } => {
                let xn = x[n - 1];
                DMatrix::identity(n, n) / (c * xn * xn)
            }
            ChartKind::Product { base, flat } => {
                let b = base.raw_metric(&x[..base.dim]);
                let mut g = DMatrix::identity(n, n);
                g.view_mut((0, 0), (base.dim, base.dim)).copy_from(&b);
                let _ = flat;
                g
            }
            ChartKind::Custom(f) => f.metric(x),
        }
    }

    /// Metric matrix at `x`; fails if `x` is outside the chart or the matrix
    /// is not symmetric positive definite.
    pub fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let g = self.raw_metric(x);
        let asym = (&g - g.transpose()).amax();
        if asym > 1e-12 * (1.0 + g.amax()) || g.clone().cholesky().is_none() {
            return Err(Error::SingularMetric { point: x.to_vec() });
        }
        Ok(g)
    }

    pub fn inverse_metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.metric(x)?;
        g.cholesky()
            .map(|c| c.inverse())
            .ok_or(Error::SingularMetric { point: x.to_vec() })
    }

    pub fn inner(&self, x: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
        let g = self.metric(x)?;
        Ok(quad(&g, a, b))
    }

    pub fn norm(&self, x: &[f64], a: &[f64]) -> Result<f64> {
        Ok(self.inner(x, a, a)?.max(0.0).sqrt())
    }

    /// Christoffel symbols in closed form for the built-in kinds, from the
    /// metric and its partials for custom metrics.
    pub fn christoffel(&self, x: &[f64]) -> Result<Christoffel> {
        self.check_point(x)?;
        let n = self.dim;
        let mut gam = Christoffel::zeros(n);
        match &self.kind {
            ChartKind::Euclidean => {}
            ChartKind::Sphere { coords, .. } => match coords {
                SphereCoords::Spherical => {
                    let (s, c) = x[0].sin_cos();
                    gam.set(0, 1, 1, -s * c);
                    gam.set(1, 0, 1, c / s);
                }
                SphereCoords::Stereographic => {
                    let q = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
                    let dw: Vec<f64> = x.iter().map(|v| -2.0 * v / q).collect();
                    conformal_christoffel(&mut gam, &dw);
                }
            },
            ChartKind::Hyperbolic { .. } => {
                let mut dw = vec![0.0; n];
                dw[n - 1] = -1.0 / x[n - 1];
                conformal_christoffel(&mut gam, &dw);
            }
            ChartKind::Product { base, .. } => {
                let b = base.christoffel(&x[..base.dim])?;
                for k in 0..base.dim {
                    for i in 0..base.dim {
                        for j in 0..=i {
                            gam.set(k, i, j, b.get(k, i, j));
                        }
                    }
                }
            }
            ChartKind::Custom(f) => {
                let dg = match f.metric_partials(x) {
                    Some(p) => p,
                    None => self.metric_partials_fd(x, METRIC_FD_STEP)?,
                };
                gam = christoffel_from_metric(&self.metric(x)?, &dg)?;
            }
        }
        Ok(gam)
    }

    fn metric_partials_fd(&self, x: &[f64], step: f64) -> Result<Vec<DMatrix<f64>>> {
        let mut xp = x.to_vec();
        (0..self.dim)
            .map(|l| {
                let h = step * (1.0 + x[l].abs());
                xp[l] = x[l] + h;
                let gp = self.metric(&xp)?;
                xp[l] = x[l] - h;
                let gm = self.metric(&xp)?;
                xp[l] = x[l];
                Ok((gp - gm) / (2.0 * h))
            })
            .collect()
    }

    /// Christoffel symbols from central differences of the metric, for any
    /// chart kind. Used to cross-check the closed forms.
    pub fn christoffel_fd(&self, x: &[f64]) -> Result<Christoffel> {
        self.check_point(x)?;
        let dg = self.metric_partials_fd(x, METRIC_FD_STEP)?;
        christoffel_from_metric(&self.metric(x)?, &dg)
    }

    /// `∂_l Γ^k_ij`: closed form for the built-in kinds, central differences
    /// of Γ for custom metrics.
    pub fn christoffel_partials(&self, x: &[f64]) -> Result<ChristoffelPartials> {
        self.check_point(x)?;
        let n = self.dim;
        let mut out = vec![Christoffel::zeros(n); n];
        match &self.kind {
            ChartKind::Euclidean => {}
            ChartKind::Sphere { coords, .. } => match coords {
                SphereCoords::Spherical => {
                    let s = x[0].sin();
                    out[0].set(0, 1, 1, -(2.0 * x[0]).cos());
                    out[0].set(1, 0, 1, -1.0 / (s * s));
                }
                SphereCoords::Stereographic => {
                    let q = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
                    let hess = DMatrix::from_fn(n, n, |i, j| {
                        let d = if i == j { -2.0 / q } else { 0.0 };
                        d + 4.0 * x[i] * x[j] / (q * q)
                    });
                    conformal_christoffel_partials(&mut out, &hess);
                }
            },
            ChartKind::Hyperbolic { .. } => {
                let mut hess = DMatrix::zeros(n, n);
                hess[(n - 1, n - 1)] = 1.0 / (x[n - 1] * x[n - 1]);
                conformal_christoffel_partials(&mut out, &hess);
            }
            ChartKind::Product { base, .. } => {
                let b = base.christoffel_partials(&x[..base.dim])?;
                for (l, bl) in b.iter().enumerate() {
                    for k in 0..base.dim {
                        for i in 0..base.dim {
                            for j in 0..=i {
                                out[l].set(k, i, j, bl.get(k, i, j));
                            }
                        }
                    }
                }
            }
            ChartKind::Custom(_) => {
                out = self.christoffel_partials_fd(x)?;
            }
        }
        Ok(out)
    }

    /// `∂_l Γ` by central differences of [`Self::christoffel`].
    pub fn christoffel_partials_fd(&self, x: &[f64]) -> Result<ChristoffelPartials> {
        let mut xp = x.to_vec();
        (0..self.dim)
            .map(|l| {
                let h = CHRISTOFFEL_FD_STEP * (1.0 + x[l].abs());
                xp[l] = x[l] + h;
                let gp = self.christoffel(&xp)?;
                xp[l] = x[l] - h;
                let gm = self.christoffel(&xp)?;
                xp[l] = x[l];
                let mut d = Christoffel::zeros(self.dim);
                for (v, (a, b)) in d.data.iter_mut().zip(gp.data.iter().zip(&gm.data)) {
                    *v = (a - b) / (2.0 * h);
                }
                Ok(d)
            })
            .collect()
    }

    pub fn curvature(&self, x: &[f64]) -> Result<Curvature> {
        if self.is_flat() {
            self.check_point(x)?;
            return Ok(Curvature::zeros(self.dim));
        }
        Ok(Curvature::from_christoffel(
            &self.christoffel(x)?,
            &self.christoffel_partials(x)?,
        ))
    }

    /// `g(a, R(b, c)d)`.
    pub fn riemann_form(
        &self,
        x: &[f64],
        a: &[f64],
        b: &[f64],
        c: &[f64],
        d: &[f64],
    ) -> Result<f64> {
        if self.is_flat() {
            return Ok(0.0);
        }
        let r = self.curvature(x)?.apply(b, c, d);
        self.inner(x, a, r.as_slice())
    }

    /// Sectional curvature of the plane spanned by `u` and `v`.
    pub fn sectional_curvature(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        let g = self.metric(x)?;
        let area = quad(&g, u, u) * quad(&g, v, v) - quad(&g, u, v).powi(2);
        if area <= 0.0 {
            return Err(Error::input("sectional_curvature", "vectors are parallel"));
        }
        Ok(self.riemann_form(x, u, u, v, v)? / area)
    }

    /// Position in the ambient `R^(n+1)` for sphere charts.
    pub fn to_embedding(&self, x: &[f64]) -> Option<DVector<f64>> {
        let ChartKind::Sphere { radius, coords } = self.kind else {
            return None;
        };
        Some(match coords {
            SphereCoords::Spherical => {
                let (st, ct) = x[0].sin_cos();
                let (sp, cp) = x[1].sin_cos();
                DVector::from_vec(vec![radius * st * cp, radius * st * sp, radius * ct])
            }
            SphereCoords::Stereographic => {
                let r2 = x.iter().map(|v| v * v).sum::<f64>();
                let q = 1.0 + r2;
                let mut p: Vec<f64> = x.iter().map(|v| 2.0 * radius * v / q).collect();
                p.push(radius * (1.0 - r2) / q);
                DVector::from_vec(p)
            }
        })
    }

    /// Inverse of [`Self::to_embedding`] for points on the sphere.
    pub fn from_embedding(&self, p: &[f64]) -> Option<DVector<f64>> {
        let ChartKind::Sphere { radius, coords } = self.kind else {
            return None;
        };
        Some(match coords {
            SphereCoords::Spherical => {
                let theta = (p[2] / radius).clamp(-1.0, 1.0).acos();
                DVector::from_vec(vec![theta, p[1].atan2(p[0])])
            }
            SphereCoords::Stereographic => {
                let d = radius + p[self.dim];
                DVector::from_iterator(self.dim, p[..self.dim].iter().map(|v| v / d))
            }
        })
    }

    /// Jacobian of [`Self::to_embedding`], `(n+1) x n`.
    pub fn embedding_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let ChartKind::Sphere { radius, coords } = self.kind else {
            return None;
        };
        let n = self.dim;
        Some(match coords {
            SphereCoords::Spherical => {
                let (st, ct) = x[0].sin_cos();
                let (sp, cp) = x[1].sin_cos();
                DMatrix::from_row_slice(
                    3,
                    2,
                    &[
                        radius * ct * cp,
                        -radius * st * sp,
                        radius * ct * sp,
                        radius * st * cp,
                        -radius * st,
                        0.0,
                    ],
                )
            }
            SphereCoords::Stereographic => {
                let q = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
                DMatrix::from_fn(n + 1, n, |a, j| {
                    if a < n {
                        let d = if a == j { q } else { 0.0 };
                        2.0 * radius * (d - 2.0 * x[a] * x[j]) / (q * q)
                    } else {
                        -4.0 * radius * x[j] / (q * q)
                    }
                })
            }
        })
    }
}

fn check_positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::input(path, format!("must be positive, got {v}")))
    }
}

pub(crate) fn quad(g: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g[(i, j)] * a[i] * b[j];
        }
    }
    s
}

/// For `g = e^{2w} δ`: `Γ^k_ij = δ_ik ∂_j w + δ_jk ∂_i w - δ_ij ∂_k w`.
fn conformal_christoffel(gam: &mut Christoffel, dw: &[f64]) {
    let n = dw.len();
    for k in 0..n {
        for i in 0..n {
            for j in 0..=i {
                let mut v = 0.0;
                if i == k {
                    v += dw[j];
                }
                if j == k {
                    v += dw[i];
                }
                if i == j {
                    v -= dw[k];
                }
                gam.set(k, i, j, v);
            }
        }
    }
}

fn conformal_christoffel_partials(out: &mut [Christoffel], hess: &DMatrix<f64>) {
    let n = hess.nrows();
    for (l, d) in out.iter_mut().enumerate() {
        let col: Vec<f64> = (0..n).map(|a| hess[(a, l)]).collect();
        conformal_christoffel(d, &col);
    }
}

/// `Γ^k_ij = ½ g^{kl} (∂_i g_lj + ∂_j g_li - ∂_l g_ij)`.
pub fn christoffel_from_metric(g: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Result<Christoffel> {
    let n = g.nrows();
    let ginv = g
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::SingularMetric { point: vec![] })?;
    let mut gam = Christoffel::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..=i {
                let mut v = 0.0;
                for l in 0..n {
                    v += ginv[(k, l)] * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]);
                }
                gam.set(k, i, j, 0.5 * v);
            }
        }
    }
    Ok(gam)
}
