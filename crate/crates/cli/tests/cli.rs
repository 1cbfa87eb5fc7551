use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_selab"))
}

fn cfg(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn selab")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn solve_theorem1_writes_field_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs/t1");
    let o = run(&["solve", "--config", cfg("theorem1.cfg").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("u.csv")).unwrap();
    assert!(csv.starts_with("x,value\n"));
    assert_eq!(csv.lines().count(), 256);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "converged");
    assert!(report["residual"].as_f64().unwrap() < 1e-8);
    assert!(report["min_interior"].as_f64().unwrap() > 0.0);
}

#[test]
fn solve_theorem2_reports_nonexistence() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("r.json");
    let o = run(&["solve", "--config", cfg("theorem2.cfg").to_str().unwrap(), "--report", rep.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(rep).unwrap()).unwrap();
    assert_eq!(report["verdict"], "nonexistence-indicated");
}

#[test]
fn usage_errors_exit_3() {
    let o = run(&["frobnicate"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(code(&run(&["solve", "--bogus"])), 3);
    assert_eq!(code(&run(&["verify", "--only", "nothing-matches"])), 3);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.cfg");
    std::fs::write(&p, "domain.kind = interval\nDomain.n = 3\n").unwrap();
    assert_eq!(code(&run(&["solve", "--config", p.to_str().unwrap()])), 1);
    assert_eq!(code(&run(&["hode", "--alpha", "1.5"])), 1);
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("theorem3.cfg");
    let mut texts = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("s{k}.csv"));
        let o = run(&["sweep", "--config", c.to_str().unwrap(), "--lambdas", "5,20,40", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        let star = run(&["lambda-star", "--config", c.to_str().unwrap(), "--iters", "6"]);
        assert_eq!(code(&star), 0);
        texts.push((std::fs::read(out).unwrap(), star.stdout));
    }
    assert_eq!(texts[0], texts[1]);
    let s = String::from_utf8(texts[0].0.clone()).unwrap();
    assert!(s.starts_with("lambda,verdict,max_u,min_u,mass_integral\n"));
    let j: serde_json::Value = serde_json::from_slice(&texts[0].1).unwrap();
    let mut keys: Vec<&String> = j.as_object().unwrap().keys().collect();
    keys.sort();
    assert_eq!(keys, ["grid_n", "hi", "iters", "lambda0", "lo"]);
}

#[test]
fn construct_and_compare_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("theorem3.cfg");
    let v = dir.path().join("v.csv");
    let w = dir.path().join("w.csv");
    let vm = dir.path().join("v.json");
    let o = run(&["construct", "--config", c.to_str().unwrap(), "--kind", "sub-eigen", "--lambda", "200", "--out", v.to_str().unwrap(), "--meta", vm.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&vm).unwrap()).unwrap();
    for key in ["kind", "M", "delta", "lambda_threshold", "c1", "c2", "residual_max"] {
        assert!(meta.get(key).is_some(), "missing {key}");
    }
    assert_eq!(meta["kind"], "sub-eigen");
    let o = run(&["construct", "--config", c.to_str().unwrap(), "--kind", "super", "--lambda", "200", "--out", w.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = run(&["compare", "--config", c.to_str().unwrap(), "--lambda", "200", "--sub", v.to_str().unwrap(), "--super", w.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["ordered"], true);
    assert_eq!(rep["conclusion"], "confirmed");
    // Below the certification threshold the construction refuses.
    let o = run(&["construct", "--config", c.to_str().unwrap(), "--kind", "sub-eigen", "--lambda", "1"]);
    assert_eq!(code(&o), 1);
    // Convection sub-solution needs K < 0.
    let o = run(&["construct", "--config", c.to_str().unwrap(), "--kind", "sub-conv"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn verify_subset_and_coarsened() {
    let o = run(&["verify", "--only", "hprofile"]);
    assert_eq!(code(&o), 0);
    let s = String::from_utf8_lossy(&o.stdout);
    assert_eq!(s.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count(), 1);
    let o = run(&["verify", "--n", "8"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL [1] eigen"));
}
