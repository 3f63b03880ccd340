use noc_core::conditions::Verdict;
use noc_core::optproblem::BruteForceVerdict;
use noc_core::pipeline::{run, sweep, write_sweep_csv, RunOptions, SweepAxis};
use noc_core::problem::ProblemFile;
use noc_core::{Error, Exec};

fn lhs_formula(t: f64, theta: f64) -> f64 {
    t * (-t * t / 3.0 + 2.5 * t + theta - 2.0)
}

fn ccs126(n: usize) -> ProblemFile {
    let mut f = ProblemFile::preset("ccs126").unwrap();
    f.set_grid(n).unwrap();
    f
}

#[test]
fn ccs126_preset_is_refuted() {
    let r = run(&ProblemFile::preset("ccs126").unwrap(), &RunOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Refuted);
    assert_eq!(r.exit_code(), 3);
    assert!((r.lhs().unwrap() - 1.083333).abs() < 1e-3);
    let first = r.first_order.as_ref().unwrap();
    assert!(first.normal);
    assert_eq!(first.multipliers.len(), 1);
    let rational: Vec<_> = first.multipliers[0].rational.iter().map(|r| r.clone().unwrap()).collect();
    assert_eq!(rational, ["-4/11", "-1", "4/11"]);
    // Only the correction on the boundary of the second-order set attains
    // the closed form; the deeper one gives less.
    let evals = &r.certificate.as_ref().unwrap().evaluations;
    assert_eq!(r.certificate.as_ref().unwrap().best_candidate, Some(0));
    assert!(evals[1].min_total.unwrap() < evals[0].min_total.unwrap());
    assert!(r.hypotheses.iter().all(|h| h.holds));
}

#[test]
fn linear_quadratic_preset_is_consistent() {
    let r = run(&ProblemFile::preset("linear-lq-euclid").unwrap(), &RunOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Consistent, "{}", r.reason);
    assert_eq!(r.exit_code(), 0);
    let l = &r.first_order.as_ref().unwrap().multipliers[0].reporting_scale;
    for (a, b) in l.iter().zip([-1.0, -0.5, 0.5]) {
        assert!((a - b).abs() < 1e-9, "{l:?}");
    }
    // Curvature vanishes on a flat chart.
    let terms = &r.certificate.unwrap().evaluations[0].per_multiplier[0];
    assert_eq!(terms.curvature, 0.0);
}

#[test]
fn disc_preset_agrees_with_exhaustive_search() {
    let r = run(&ProblemFile::preset("disc-op").unwrap(), &RunOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Consistent, "{}", r.reason);
    let op = r.op.unwrap();
    assert_eq!(op.bruteforce.unwrap().verdict, BruteForceVerdict::Confirmed);
    let sep = op.separation.unwrap();
    assert_eq!(sep.samples, 10_000);
    assert!(sep.sample_max.unwrap() <= 1e-9);
    assert!(r.notes.is_empty(), "{:?}", r.notes);
}

#[test]
fn saddle_on_a_line_is_refuted_and_improved() {
    let src = r#"
schema_version = 1
kind = "op"
[op]
objective = "e1*e2"
equalities = ["e1 + e2 - 2"]
point = [1.0, 1.0]
direction = [1.0, -1.0]
bruteforce_resolution = 1e-2
[op.set]
kind = "box"
lower = [-3.0, -3.0]
upper = [3.0, 3.0]
"#;
    let r = run(&ProblemFile::parse(src).unwrap(), &RunOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Refuted);
    assert_eq!(r.op.unwrap().bruteforce.unwrap().verdict, BruteForceVerdict::Improved);
    assert!(r.notes.is_empty());
}

#[test]
fn first_order_failure_past_threshold() {
    let mut f = ccs126(200);
    f.set_parameter("T", 0.9).unwrap();
    let r = run(&f, &RunOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Refuted);
    assert!(r.reason.contains("first-order"));
    assert!(r.notes.iter().any(|n| n.contains("T < 3 - sqrt(5)")));
}

#[test]
fn non_critical_direction_is_inconclusive() {
    let f = ProblemFile::parse("preset = \"ccs126\"\n[grid]\nN = 100\n[direction]\nv = [\"0\", \"-1\"]\n").unwrap();
    let r = run(&f, &RunOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Inconclusive);
    assert!(r.reason.contains("not critical"), "{}", r.reason);
}

#[test]
fn malformed_control_set_is_an_input_error() {
    let f = ProblemFile::parse("preset = \"ccs126\"\n[control_set]\nradius = -1.0\n").unwrap();
    match run(&f, &RunOptions::default()) {
        Err(e @ Error::Input { .. }) => {
            assert!(e.is_input_error());
            assert!(e.to_string().starts_with("control_set"), "{e}");
        }
        other => panic!("{other:?}"),
    }
    let f = ProblemFile::parse("preset = \"ccs126\"\n[dynamics]\nf = [\"u2\", \"y1 +* 2\"]\n").unwrap();
    let e = run(&f, &RunOptions::default()).unwrap_err();
    assert!(e.to_string().starts_with("dynamics.f[1]"), "{e}");
}

#[test]
fn reports_are_reproducible_and_echo_the_input() {
    let f = ccs126(200);
    let a = run(&f, &RunOptions::default()).unwrap();
    let b = run(&f, &RunOptions::default()).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let echoed = ProblemFile::parse(&a.problem).unwrap();
    assert_eq!(echoed, f);
    assert_eq!(echoed.digest(), a.input_digest);
    assert!(a.timing.is_none());
    let timed = run(&f, &RunOptions { timing: true, ..RunOptions::default() }).unwrap();
    assert!(timed.timing.is_some());
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let f = ccs126(300);
    let seq = run(&f, &RunOptions { exec: Exec::Sequential, timing: false }).unwrap();
    let par = run(&f, &RunOptions { exec: Exec::Parallel, timing: false }).unwrap();
    assert_eq!(seq.verdict, par.verdict);
    assert!((seq.lhs().unwrap() - par.lhs().unwrap()).abs() < 1e-12);
}

#[test]
fn sweep_tracks_the_closed_form() {
    let f = ccs126(400);
    let axes = [
        SweepAxis::parse("T=0.3:0.7:3").unwrap(),
        SweepAxis::parse("theta=2.5,4").unwrap(),
    ];
    let rows = sweep(&f, &axes, Exec::Parallel).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[1].parameters, vec![0.3, 4.0]);
    for r in &rows {
        assert_eq!(r.verdict, Some(Verdict::Refuted), "{r:?}");
        let want = lhs_formula(r.parameters[0], r.parameters[1]);
        assert!((r.lhs.unwrap() - want).abs() < 1e-3, "{r:?} vs {want}");
    }
    let mut out = Vec::new();
    write_sweep_csv(&axes, &rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("T,theta,verdict,lhs,multiplier,hypotheses_hold,reason\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn sweep_edge_cases() {
    let f = ccs126(200);
    let single = sweep(&f, &[SweepAxis::parse("T=0.4:0.4:1").unwrap()], Exec::Sequential).unwrap();
    assert_eq!(single.len(), 1);
    // The boundary theta = 2 is outside the hypotheses but still evaluated.
    let rows = sweep(&f, &[SweepAxis::parse("theta=2").unwrap()], Exec::Sequential).unwrap();
    assert!(!rows[0].hypotheses_hold);
    let want = lhs_formula(0.5, 2.0);
    assert!(want > 0.0);
    assert!((rows[0].lhs.unwrap() - want).abs() < 1e-3);
    assert!(sweep(&f, &[SweepAxis::parse("gamma=1").unwrap()], Exec::Sequential).is_err());
    assert!(SweepAxis::parse("T=0.1:0.7").is_err());
    assert!(SweepAxis::parse("T=0.1:0.7:0").is_err());
    assert_eq!(SweepAxis::parse("T=0.1:0.7:13").unwrap().values.len(), 13);
}

#[test]
fn numerical_failure_is_inconclusive() {
    // Drives the state into the pole of the spherical chart.
    let src = r#"
schema_version = 1
kind = "ocp"
[chart]
kind = "sphere"
[dynamics]
f = ["-u1", "u2"]
[endpoint]
cost = "yT_1"
[control_set]
kind = "ball"
center = [0.0, 0.0]
radius = 1.0
[grid]
N = 50
T = 2.0
[candidate]
y0 = [0.5, 0.0]
u = ["1", "0"]
"#;
    let r = run(&ProblemFile::parse(src).unwrap(), &RunOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Inconclusive);
    assert!(r.reason.contains("chart domain"), "{}", r.reason);
}
