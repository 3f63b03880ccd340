use std::process::{Command, Output};

fn noc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noc"))
        .args(args)
        .env_remove("NOC_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn check_ccs126_exits_refuted_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let o = noc(&["check", "preset:ccs126", "--report", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stdout(&o).contains("multiplier: (-4/11, -1, 4/11)"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["verdict"], "refuted");
    let lhs = report["certificate"]["best_lhs"].as_f64().unwrap();
    assert!((lhs - 1.083333).abs() < 1e-3);
    assert_eq!(report["input_digest"].as_str().unwrap().len(), 64);
    assert!(report.get("timing").is_none());
    let terms = &report["certificate"]["evaluations"][0]["per_multiplier"][0];
    for key in ["sigma", "hxx", "hux", "huu", "curvature", "endpoint_11", "endpoint_12", "endpoint_22", "total"] {
        assert!(terms[key].is_number(), "{key}");
    }
}

#[test]
fn check_true_optimum_exits_consistent() {
    let o = noc(&["check", "preset:linear-lq-euclid"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("verdict: consistent"));
}

#[test]
fn malformed_input_exits_two_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "preset = \"ccs126\"\n[control_set]\nkind = \"ball\"\ncenter = [0.0, 0.0]\nradius = \"oops(\"\n").unwrap();
    let o = noc(&["check", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("control_set.radius"), "{}", stderr(&o));
    let o = noc(&["check", "missing-file.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = noc(&["check", "preset:ccs126", "--tol", "nope=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn overrides_and_threads() {
    let o = Command::new(env!("CARGO_BIN_EXE_noc"))
        .args(["check", "preset:ccs126", "--grid", "100", "--tol", "refutation_margin=10", "--report", "-"])
        .env("NOC_THREADS", "2")
        .output()
        .unwrap();
    // A huge margin downgrades the refutation.
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["problem"].as_str().unwrap().contains("N = 100"));
    assert_eq!(report["tolerances"]["refutation_margin"], 10.0);
    let o = Command::new(env!("CARGO_BIN_EXE_noc"))
        .args(["check", "preset:ccs126"])
        .env("NOC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical() {
    let a = noc(&["check", "preset:ccs126", "--grid", "200", "--report", "-"]);
    let b = noc(&["--sequential", "check", "preset:ccs126", "--grid", "200", "--report", "-"]);
    assert_eq!(a.status.code(), Some(3));
    let c = noc(&["check", "preset:ccs126", "--grid", "200", "--report", "-"]);
    assert_eq!(a.stdout, c.stdout);
    let (ja, jb): (serde_json::Value, serde_json::Value) =
        (serde_json::from_slice(&a.stdout).unwrap(), serde_json::from_slice(&b.stdout).unwrap());
    assert_eq!(ja["verdict"], jb["verdict"]);
    assert_eq!(ja["input_digest"], jb["input_digest"]);
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = noc(&[
        "sweep",
        "preset:ccs126",
        "--grid",
        "200",
        "--param",
        "T=0.3:0.5:2",
        "--param",
        "theta=2,3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "T,theta,verdict,lhs,multiplier,hypotheses_hold,reason");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.3,2,refuted,"));
    assert!(lines[1].contains(",false,"));
    assert!(lines[2].contains(",true,"));
    let o = noc(&["sweep", "preset:ccs126", "--param", "gamma=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_cone_queries() {
    let disc = "{ kind = \"ball\", center = [0, 0], radius = 1 }";
    let o = noc(&["oracle", "cone", disc, "0,-1", "1,0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "member");
    // The second-order set at ((0,-1), (1,0)) is {w2 >= 1/2}.
    let inside: serde_json::Value =
        serde_json::from_slice(&noc(&["oracle", "cone", disc, "0,-1", "1,0", "0,0.6"]).stdout).unwrap();
    let outside: serde_json::Value =
        serde_json::from_slice(&noc(&["oracle", "cone", disc, "0,-1", "1,0", "0,0.4"]).stdout).unwrap();
    assert_eq!(inside["verdict"], "member");
    assert_eq!(outside["verdict"], "non_member");
    let o = noc(&["oracle", "cone", "{ kind = \"disc\" }", "0", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn presets_are_listed() {
    let o = noc(&["presets"]);
    assert_eq!(stdout(&o).lines().collect::<Vec<_>>(), ["ccs126", "linear-lq-euclid", "disc-op"]);
    let o = noc(&["presets", "ccs126"]);
    assert!(stdout(&o).contains("kind = \"ocp\""));
    let o = noc(&["check", "preset:disc-op"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}
