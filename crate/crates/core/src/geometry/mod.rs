//! Riemannian geometry in a single coordinate chart.

mod chart;
mod geodesic;

pub use chart::{
    christoffel_from_metric, ChartKind, Christoffel, ChristoffelPartials, Curvature, ExprMetric,
    ManifoldChart, MetricField, SphereCoords,
};
pub use geodesic::{distance, exp_map, geodesic, log_map, parallel_transport};

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub base: DVector<f64>,
    pub components: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CotangentVector {
    pub base: DVector<f64>,
    pub components: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: DVector<f64>, components: DVector<f64>) -> Self {
        TangentVector { base, components }
    }

    pub fn from_slices(base: &[f64], components: &[f64]) -> Self {
        Self::new(
            DVector::from_column_slice(base),
            DVector::from_column_slice(components),
        )
    }
}

impl CotangentVector {
    pub fn new(base: DVector<f64>, components: DVector<f64>) -> Self {
        CotangentVector { base, components }
    }

    pub fn from_slices(base: &[f64], components: &[f64]) -> Self {
        Self::new(
            DVector::from_column_slice(base),
            DVector::from_column_slice(components),
        )
    }

    /// The pairing `p(v)`.
    pub fn pair(&self, v: &TangentVector) -> Result<f64> {
        if !same_base(&self.base, &v.base) {
            return Err(Error::BasePointMismatch);
        }
        Ok(self.components.dot(&v.components))
    }
}

pub(crate) fn same_base(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b.iter())
            .all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
}

/// Index raising/lowering with the chart metric.
pub trait MusicalDual {
    type Dual;
    fn musical_dual(&self, chart: &ManifoldChart) -> Result<Self::Dual>;
}

impl MusicalDual for TangentVector {
    type Dual = CotangentVector;
    fn musical_dual(&self, chart: &ManifoldChart) -> Result<CotangentVector> {
        let g = chart.metric(self.base.as_slice())?;
        Ok(CotangentVector::new(self.base.clone(), g * &self.components))
    }
}

impl MusicalDual for CotangentVector {
    type Dual = TangentVector;
    fn musical_dual(&self, chart: &ManifoldChart) -> Result<TangentVector> {
        let ginv = chart.inverse_metric(self.base.as_slice())?;
        Ok(TangentVector::new(self.base.clone(), ginv * &self.components))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn charts() -> Vec<(ManifoldChart, Vec<f64>)> {
        vec![
            (ManifoldChart::euclidean(3), vec![0.3, -0.2, 1.0]),
            (ManifoldChart::sphere_spherical(1.0).unwrap(), vec![1.1, 0.4]),
            (ManifoldChart::sphere_stereographic(2, 2.0).unwrap(), vec![0.3, -0.5]),
            (ManifoldChart::sphere_stereographic(3, 1.0).unwrap(), vec![0.2, 0.1, -0.3]),
            (ManifoldChart::hyperbolic(2, -1.0).unwrap(), vec![0.4, 1.3]),
            (
                ManifoldChart::product(ManifoldChart::sphere_spherical(1.0).unwrap(), 1),
                vec![1.0, 0.2, 5.0],
            ),
        ]
    }

    #[test]
    fn closed_form_christoffel_matches_metric_differences() {
        for (chart, x) in charts() {
            let a = chart.christoffel(&x).unwrap();
            let b = chart.christoffel_fd(&x).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-8, "{:?}", chart.kind());
            let da = chart.christoffel_partials(&x).unwrap();
            let db = chart.christoffel_partials_fd(&x).unwrap();
            for (p, q) in da.iter().zip(&db) {
                assert!(p.max_abs_diff(q) < 1e-7, "{:?}", chart.kind());
            }
        }
    }

    #[test]
    fn constant_curvature_charts() {
        let s = ManifoldChart::sphere_spherical(2.0).unwrap();
        let k = s.sectional_curvature(&[0.9, 0.3], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((k - 0.25).abs() < 1e-10);
        let h = ManifoldChart::hyperbolic(3, -2.0).unwrap();
        let k = h
            .sectional_curvature(&[0.1, 0.2, 0.7], &[1.0, 0.5, 0.0], &[0.0, 0.3, 1.0])
            .unwrap();
        assert!((k + 2.0).abs() < 1e-10, "{k}");
    }

    #[test]
    fn musical_dual_round_trip() {
        let s = ManifoldChart::sphere_spherical(1.0).unwrap();
        let v = TangentVector::from_slices(&[0.7, 0.1], &[0.3, -1.2]);
        let p = v.musical_dual(&s).unwrap();
        let w = p.musical_dual(&s).unwrap();
        assert!((w.components - &v.components).amax() < 1e-14);
        let other = TangentVector::from_slices(&[0.8, 0.1], &[1.0, 0.0]);
        assert_eq!(p.pair(&other), Err(Error::BasePointMismatch));
    }

    #[test]
    fn exp_log_round_trip_on_sphere() {
        let s = ManifoldChart::sphere_spherical(1.0).unwrap();
        let v = TangentVector::from_slices(&[1.0, 0.2], &[0.4, 0.7]);
        let y = exp_map(&s, &v).unwrap();
        let w = log_map(&s, &[1.0, 0.2], y.as_slice()).unwrap();
        assert!((w.components - &v.components).amax() < 1e-12);
    }

    #[test]
    fn log_rejects_points_beyond_trust_radius() {
        let s = ManifoldChart::sphere_spherical(1.0).unwrap();
        let err = log_map(&s, &[PI / 2.0, 0.0], &[PI / 2.0, 0.95 * PI]).unwrap_err();
        assert!(matches!(err, Error::OutOfInjectivityTrust { .. }), "{err:?}");
    }

    #[test]
    fn chart_escape_at_pole() {
        let s = ManifoldChart::sphere_spherical(1.0).unwrap();
        let v = TangentVector::from_slices(&[0.5, 0.0], &[-1.0, 0.0]);
        assert!(matches!(exp_map(&s, &v), Err(Error::ChartEscape { .. })));
    }

    #[test]
    fn custom_metric_matches_builtin() {
        let m = ExprMetric::parse(
            &[
                vec!["1".into(), "0".into()],
                vec!["0".into(), "sin(x1)^2".into()],
            ],
            &[],
        )
        .unwrap();
        let c = ManifoldChart::custom(Arc::new(m), f64::INFINITY);
        let s = ManifoldChart::sphere_spherical(1.0).unwrap();
        let x = [0.8, 0.3];
        assert!(c.christoffel(&x).unwrap().max_abs_diff(&s.christoffel(&x).unwrap()) < 1e-12);
        let k = c.sectional_curvature(&x, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((k - 1.0).abs() < 1e-6, "{k}");
    }

    #[test]
    fn indefinite_metric_is_rejected() {
        let m = ExprMetric::parse(
            &[vec!["1".into(), "0".into()], vec!["0".into(), "x1".into()]],
            &[],
        )
        .unwrap();
        let c = ManifoldChart::custom(Arc::new(m), f64::INFINITY);
        assert!(matches!(
            c.metric(&[-1.0, 0.0]),
            Err(Error::SingularMetric { .. })
        ));
    }

    #[test]
    fn embedding_helpers_invert() {
        for chart in [
            ManifoldChart::sphere_spherical(1.5).unwrap(),
            ManifoldChart::sphere_stereographic(2, 1.5).unwrap(),
        ] {
            let x = [0.7, 0.4];
            let p = chart.to_embedding(&x).unwrap();
            assert!((p.norm() - 1.5).abs() < 1e-14);
            let back = chart.from_embedding(p.as_slice()).unwrap();
            assert!((back[0] - x[0]).abs() < 1e-13 && (back[1] - x[1]).abs() < 1e-13);
            // pullback of the ambient metric is the chart metric
            let j = chart.embedding_jacobian(&x).unwrap();
            let g = chart.metric(&x).unwrap();
            assert!((j.transpose() * &j - g).amax() < 1e-13);
        }
    }
}
