mod common;

use common::*;
use nalgebra::DVector;
use noc_core::cones::ConvexSet;
use noc_core::conditions::*;
use noc_core::dynamics::{integrate_second_variation, integrate_variational, FieldAlongCurve, LagrangeData};
use noc_core::geometry::ManifoldChart;
use noc_core::Error;

const N: usize = 1000;

fn ccs126_setup(horizon: f64, theta: f64) -> (noc_core::dynamics::ControlProblem, noc_core::dynamics::Trajectory) {
    let p = ccs126(horizon, theta);
    let traj = integrate(&p, &[1.0, 0.0], &constant(N, &[0.0, -1.0]));
    (p, traj)
}

#[test]
fn ccs126_multiplier_is_unique_ray() {
    let (p, traj) = ccs126_setup(0.5, 3.0);
    let tol = Tolerances::default();
    let sets = active_sets(&p, &traj, &tol).unwrap();
    assert_eq!(sets.active, vec![0]);
    let cone = find_first_order_multipliers(&p, &traj, &sets, &tol).unwrap();
    assert_eq!(cone.multipliers.len(), 1);
    let m = &cone.multipliers[0];
    let expected = [-4.0 / 11.0, -1.0, 4.0 / 11.0];
    for (a, b) in m.values.iter().zip(expected) {
        assert!((a - b).abs() < 1e-9, "{:?}", m.values);
    }
    let rational: Vec<_> = m.rational.iter().map(|r| r.clone().unwrap()).collect();
    assert_eq!(rational, ["-4/11", "-1", "4/11"]);
    // l1 = (6T - T^2) l0 at the reporting scale l0 = -1.
    let scaled = m.reporting_scale();
    assert!((scaled[1] + (6.0 * 0.5 - 0.25)).abs() < 1e-9);
}

#[test]
fn ccs126_first_order_fails_past_threshold() {
    let threshold = 3.0 - 5f64.sqrt();
    for (horizon, ok) in [(threshold - 0.02, true), (threshold + 0.02, false), (0.9, false)] {
        let (p, traj) = ccs126_setup(horizon, 3.0);
        let tol = Tolerances::default();
        let sets = active_sets(&p, &traj, &tol).unwrap();
        let res = find_first_order_multipliers(&p, &traj, &sets, &tol);
        assert_eq!(res.is_ok(), ok, "T = {horizon}");
        if !ok {
            assert!(matches!(res, Err(Error::NoMultiplier)));
        }
    }
}

#[test]
fn ccs126_second_order_refutation() {
    let (horizon, theta) = (0.5, 3.0);
    let (p, traj) = ccs126_setup(horizon, theta);
    let tol = Tolerances::default();
    let sets = active_sets(&p, &traj, &tol).unwrap();
    let cone = find_first_order_multipliers(&p, &traj, &sets, &tol).unwrap();
    let v = constant(N, &[1.0, 0.0]);
    let dir = verify_singular_direction(&p, &traj, &sets, &v, &dv(&[0.0, 0.0]), &tol).unwrap();
    assert!(dir.x.values.iter().all(|x| x.norm() == 0.0));
    let sigma = constant(N, &[0.0, 0.5]);
    let cert = refute_optimality(&p, &traj, &cone, &dir, std::slice::from_ref(&sigma), &tol).unwrap();
    assert_eq!(cert.verdict, Verdict::Refuted);
    let closed = horizon * (-horizon * horizon / 3.0 + 2.5 * horizon + theta - 2.0);
    let lhs = cert.best_lhs.unwrap();
    assert!((lhs - closed).abs() < 1e-6, "{lhs} vs {closed}");
    assert!((lhs - 1.083333).abs() < 1e-6);
    // Oracle: with X = 0 the functional is dL(Y) = -Y2(T) at l0 = -1.
    let y = integrate_second_variation(&p, &traj, &v, &dir.x, &sigma, &dv(&[0.0, 0.0])).unwrap();
    assert!((lhs + y.values[N][1]).abs() < 1e-6);
    let terms = &cert.evaluations[0].per_multiplier[0];
    assert_eq!(terms.curvature, 0.0);
    assert_eq!(terms.hxx, 0.0);
    assert!(cert.stationarity[0] < 1e-9);
}

#[test]
fn ccs126_rejects_sigma_outside_second_order_set() {
    let (p, traj) = ccs126_setup(0.5, 3.0);
    let tol = Tolerances::default();
    let sets = active_sets(&p, &traj, &tol).unwrap();
    let cone = find_first_order_multipliers(&p, &traj, &sets, &tol).unwrap();
    let v = constant(N, &[1.0, 0.0]);
    let dir = verify_singular_direction(&p, &traj, &sets, &v, &dv(&[0.0, 0.0]), &tol).unwrap();
    let bad = constant(N, &[0.0, 0.25]);
    let cert = refute_optimality(&p, &traj, &cone, &dir, &[bad], &tol).unwrap();
    assert_eq!(cert.verdict, Verdict::Inconclusive);
    assert!(cert.evaluations[0].error.is_some());
    let outward = constant(N, &[0.0, -1.0]);
    assert!(matches!(
        verify_singular_direction(&p, &traj, &sets, &outward, &dv(&[0.0, 0.0]), &tol),
        Err(Error::ConeViolation { node: 0 })
    ));
}

/// On a curved chart the functional must equal the second-order change of
/// the endpoint Lagrangian, `d_1L(Y(0)) + d_2L(Y(T))` plus the endpoint
/// Hessian terms, for any multiplier and any perturbation.
#[test]
fn functional_matches_lagrangian_expansion_on_sphere() {
    let horizon = 0.8;
    let n_int = 800;
    let p = sphere_toy(horizon);
    let controls: Vec<DVector<f64>> = (0..n_int)
        .map(|i| {
            let t = horizon * (i as f64 + 0.5) / n_int as f64;
            dv(&[0.2 * (2.0 * t).cos(), 0.1 + 0.1 * t])
        })
        .collect();
    let traj = integrate(&p, &[1.2, 0.3], &controls);
    let v: Vec<DVector<f64>> = (0..n_int)
        .map(|i| {
            let t = horizon * (i as f64 + 0.5) / n_int as f64;
            dv(&[0.7 - t, 0.4 * (3.0 * t).sin()])
        })
        .collect();
    let sigma: Vec<DVector<f64>> = (0..n_int).map(|i| dv(&[0.3, -0.2 + 1e-4 * i as f64])).collect();
    let x0 = dv(&[0.25, -0.4]);
    let x = integrate_variational(&p, &traj, &v, &x0).unwrap();
    let dir = SingularDirection {
        v: v.clone(),
        x: x.clone(),
        rows: DVector::zeros(3),
        index_sets: IndexSets::default(),
    };
    let ell = [-1.0, 0.3, -0.7];
    let tol = Tolerances::default();
    let terms = second_order_lhs(&p, &traj, &ell, &dir, &sigma, &tol).unwrap();
    let y = integrate_second_variation(&p, &traj, &v, &x, &sigma, &DVector::zeros(2)).unwrap();
    let lag = LagrangeData::new(&p, traj.initial(), traj.terminal(), &ell).unwrap();
    let [a, b, c] = lag.second_order_terms(&x.values[0], &x.values[n_int]);
    let oracle = lag.d2.dot(&y.values[n_int]) + a + b + c;
    assert!(
        (terms.total - oracle).abs() < 1e-6 * (1.0 + oracle.abs()),
        "{} vs {oracle}",
        terms.total
    );
    assert!(terms.curvature.abs() > 1e-3, "curvature term should be active: {terms:?}");
    // Dropping the curvature term breaks the identity.
    assert!((terms.total - terms.curvature - oracle).abs() > 1e-4);
}

#[test]
fn mayer_augmentation_of_quadratic_cost() {
    let horizon = 2.0;
    let n_int = 200;
    let bolza = BolzaProblem {
        chart: ManifoldChart::euclidean(1),
        dynamics: dynamics(&["u1"], 1, 1, &[]),
        running_cost: dynamics(&["0.5*u1^2"], 1, 1, &[]),
        control_set: ConvexSet::whole_space(1),
        horizon,
        initial: dv(&[0.0]),
        terminal: dv(&[1.0]),
    };
    let p = mayer_augment(&bolza).unwrap();
    assert_eq!(p.state_dim(), 2);
    assert_eq!(p.num_multipliers(), 3);
    let traj = integrate(&p, &[0.0, 0.0], &constant(n_int, &[1.0 / horizon]));
    let tol = Tolerances::default();
    let sets = active_sets(&p, &traj, &tol).unwrap();
    let cone = find_first_order_multipliers(&p, &traj, &sets, &tol).unwrap();
    assert_eq!(cone.multipliers.len(), 1);
    let l = cone.multipliers[0].reporting_scale();
    for (a, b) in l.iter().zip([-1.0, -1.0 / horizon, 1.0 / horizon]) {
        assert!((a - b).abs() < 1e-9, "{l:?}");
    }
    // Zero-mean perturbations keep both endpoints and the first-order cost.
    let v: Vec<DVector<f64>> = (0..n_int)
        .map(|i| dv(&[(std::f64::consts::TAU * (i as f64 + 0.5) / n_int as f64).cos()]))
        .collect();
    let dir = verify_singular_direction(&p, &traj, &sets, &v, &DVector::zeros(2), &tol).unwrap();
    let cert = refute_optimality(&p, &traj, &cone, &dir, &[constant(n_int, &[0.0])], &tol).unwrap();
    assert_eq!(cert.verdict, Verdict::Consistent);
    let dt = horizon / n_int as f64;
    let expected = -0.5 * v.iter().map(|x| x[0] * x[0]).sum::<f64>() * dt;
    assert!((cert.best_lhs.unwrap() - expected).abs() < 1e-9);
    let _ = FieldAlongCurve::combine(&cone.basis.fields, &l);
}
