use std::process::Command;

fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_coverage-lab"));
    c.env_remove("COVERAGE_LAB_JOBS");
    c
}

#[test]
fn gen_then_coverage_reports_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let st = cli().args(["gen", "random_tabular", "S=2", "A=2", "H=2", "seed=3", "-o"]).arg(&model).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let out = cli().arg("coverage").arg(&model).args(["--p", "2", "--zeta", "0.5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let cov = v["c_cov"]["value"].as_f64().unwrap();
    let cw = v["c_cw"]["value"].as_f64().unwrap();
    assert!(cw.sqrt() <= cov + 1e-9);
    assert!(v["p_cov"]["value"].as_f64().unwrap() <= cov + 1e-9);
}

#[test]
fn agents_write_traces() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    cli().args(["gen", "closed_class", "seed=1", "-o"]).arg(&model).status().unwrap();
    for agent in ["golf", "hybridq", "lsvi"] {
        let csv = dir.path().join(format!("{agent}.csv"));
        let st = cli().arg(agent).arg(&model).args(["-T", "50", "-o"]).arg(&csv).status().unwrap();
        assert_eq!(st.code(), Some(0), "{agent}");
        assert_eq!(coverage_lab::trace::read_trace_rows(&csv).unwrap().last().unwrap().t, 50);
    }
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"kind":"tabular","H":1,"S":2,"A":1,"s_init":0,"P":[[[[0.5,0.4]],[[1.0,0.0]]]],"r":[[[0.0],[0.0]]]}"#,
    )
    .unwrap();
    let out = cli().arg("coverage").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("P[0][0][0]"));
    assert_eq!(cli().arg("frobnicate").status().unwrap().code(), Some(1));
    assert_eq!(cli().args(["verify", "--suite", "nope"]).status().unwrap().code(), Some(1));
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"environment": {"generator": "chain"}, "algorithm": "golf", "episodes": 5, "seeds": [], "output_dir": "x"}"#).unwrap();
    assert_eq!(cli().arg("run").arg(&cfg).status().unwrap().code(), Some(1));
    let out = cli().args(["run"]).arg(&cfg).env("COVERAGE_LAB_JOBS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_single_suite_passes() {
    let out = cli().args(["verify", "--suite", "per_sa_potential"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["results"][0]["pass"], serde_json::Value::Bool(true));
}

#[test]
fn help_exits_with_zero() {
    assert_eq!(cli().arg("--help").output().unwrap().status.code(), Some(0));
}
