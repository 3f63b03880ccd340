use std::f64::consts::PI;

use nalgebra::DVector;
use noc_core::geometry::{exp_map, log_map, parallel_transport, ManifoldChart, TangentVector};
use proptest::prelude::*;

fn dv(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

/// Rotation angle of a vector transported once around the latitude circle
/// at colatitude `theta0`, measured in an orthonormal frame.
fn latitude_holonomy(theta0: f64) -> f64 {
    let chart = ManifoldChart::sphere_spherical(1.0).unwrap().with_steps_per_unit(400);
    let curve: Vec<DVector<f64>> = (0..=64).map(|k| dv(&[theta0, 2.0 * PI * k as f64 / 64.0])).collect();
    let v = TangentVector::new(curve[0].clone(), dv(&[1.0, 0.0]));
    let w = parallel_transport(&chart, &curve, &v).unwrap();
    let (a, b) = (w.components[0], w.components[1] * theta0.sin());
    b.atan2(a)
}

/// Distance between two angles modulo `2 pi`.
fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

#[test]
fn latitude_holonomy_is_two_pi_cos() {
    for theta0 in [0.3, 0.7, 1.0, PI / 2.0, 2.2] {
        let got = latitude_holonomy(theta0);
        let want = 2.0 * PI * theta0.cos();
        // The orientation of the frame fixes the sign only up to convention.
        let gap = angle_gap(got, want).min(angle_gap(got, -want));
        assert!(gap < 1e-4, "theta0 = {theta0}: {got} vs {want}");
    }
}

#[test]
fn euclidean_chart_reduces_exactly() {
    let chart = ManifoldChart::euclidean(3);
    let x = [0.3, -1.2, 2.0];
    let v = TangentVector::new(dv(&x), dv(&[1.5, 0.25, -0.75]));
    let y = exp_map(&chart, &v).unwrap();
    assert!((&y - dv(&[1.8, -0.95, 1.25])).amax() < 1e-12);
    let back = log_map(&chart, &x, y.as_slice()).unwrap();
    assert!((back.components - &v.components).amax() < 1e-12);
    let curve = vec![dv(&x), dv(&[1.0, 1.0, 1.0]), dv(&[-2.0, 0.5, 0.0])];
    let w = parallel_transport(&chart, &curve, &v).unwrap();
    assert!((w.components - &v.components).amax() < 1e-12);
    assert!(chart.christoffel(&x).unwrap().is_zero());
    let r = chart.curvature(&x).unwrap().apply(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[1.0, 1.0, 1.0]);
    assert!(r.amax() < 1e-12);
}

fn curved_charts() -> Vec<(ManifoldChart, [f64; 2])> {
    vec![
        (ManifoldChart::sphere_spherical(1.0).unwrap(), [1.2, 0.4]),
        (ManifoldChart::sphere_stereographic(2, 1.5).unwrap(), [0.2, -0.3]),
        (ManifoldChart::hyperbolic(2, -1.0).unwrap(), [0.1, 1.4]),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn transport_is_an_isometry(
        which in 0usize..3,
        pts in proptest::collection::vec((-0.3f64..0.3, -0.3f64..0.3), 1..4),
        a in (-1.0f64..1.0, -1.0f64..1.0),
        b in (-1.0f64..1.0, -1.0f64..1.0),
    ) {
        let (chart, base) = curved_charts().swap_remove(which);
        let mut curve = vec![dv(&base)];
        let mut cur = base;
        for (dx, dy) in pts {
            cur = [cur[0] + dx, cur[1] + dy];
            curve.push(dv(&cur));
        }
        let ta = parallel_transport(&chart, &curve, &TangentVector::new(curve[0].clone(), dv(&[a.0, a.1]))).unwrap();
        let tb = parallel_transport(&chart, &curve, &TangentVector::new(curve[0].clone(), dv(&[b.0, b.1]))).unwrap();
        let before = chart.inner(&base, &[a.0, a.1], &[b.0, b.1]).unwrap();
        let after = chart.inner(&cur, ta.components.as_slice(), tb.components.as_slice()).unwrap();
        prop_assert!((before - after).abs() < 1e-8, "{before} vs {after}");
    }

    #[test]
    fn unit_sphere_has_unit_sectional_curvature(
        theta in 0.3f64..2.8,
        phi in -3.0f64..3.0,
        u in (-1.0f64..1.0, -1.0f64..1.0),
        v in (-1.0f64..1.0, -1.0f64..1.0),
    ) {
        prop_assume!((u.0 * v.1 - u.1 * v.0).abs() > 1e-2);
        let chart = ManifoldChart::sphere_spherical(1.0).unwrap();
        let k = chart.sectional_curvature(&[theta, phi], &[u.0, u.1], &[v.0, v.1]).unwrap();
        prop_assert!((k - 1.0).abs() < 1e-6, "{k}");
    }

    #[test]
    fn exp_then_log_is_identity(
        which in 0usize..3,
        v in (-0.6f64..0.6, -0.6f64..0.6),
    ) {
        let (chart, base) = curved_charts().swap_remove(which);
        // The round trip is only defined inside the injectivity trust radius.
        let len = chart.norm(&base, &[v.0, v.1]).unwrap();
        prop_assume!(len < 0.9 * chart.trust_radius());
        let t = TangentVector::new(dv(&base), dv(&[v.0, v.1]));
        let y = exp_map(&chart, &t).unwrap();
        let back = log_map(&chart, &base, y.as_slice()).unwrap();
        prop_assert!((back.components - t.components).amax() < 1e-7);
    }
}
