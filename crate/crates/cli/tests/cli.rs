use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ssprofile"));
    c.env_remove("SSPROFILE_OUT");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn out_arg(dir: &Path) -> String {
    format!("--output.dir={}", dir.display())
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

#[test]
fn solve_expander_demo_writes_five_deterministic_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = config("demo.conf");
    for dir in [&a, &b] {
        let o = run(&["solve-expander", "-c", cfg.to_str().unwrap(), &out_arg(dir)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    }
    let files = listing(&a);
    assert_eq!(files, ["history.jsonl", "plot.csv", "profile.csv", "report.json", "residual.csv"]);
    for f in &files {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let rep = json(&a.join("report.json"));
    assert_eq!(rep["status"], "pass");
    assert!(rep["residual"]["max_rel"][1].as_f64().unwrap() <= 1e-5);
    let hist = std::fs::read_to_string(a.join("history.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(hist.lines().next().unwrap()).unwrap();
    assert_eq!(first["iter"], 1);
    assert!(first["distance"].is_number() && first["contraction"].is_null());
    let profile = std::fs::read_to_string(a.join("profile.csv")).unwrap();
    assert!(profile.starts_with("r,P,U,Theta,Uprime,Thetaprime\n"));
    let plot = std::fs::read_to_string(a.join("plot.csv")).unwrap();
    assert_eq!(plot.lines().count(), profile.lines().count());
    assert!(plot.lines().next().unwrap().contains("U_bound"));
}

#[test]
fn enabled_monitor_fails_the_demo() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["solve-expander", "-c", config("demo.conf").to_str().unwrap(), &out_arg(tmp.path()), "--checks.monitor=true"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&tmp.path().join("report.json"))["status"], "fail");
}

#[test]
fn verify_residuals_reads_profile_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("demo.conf");
    let solved = tmp.path().join("solved");
    assert!(run(&["solve-expander", "-c", cfg.to_str().unwrap(), &out_arg(&solved)]).status.success());
    let profile = format!("--input.profile={}", solved.join("profile.csv").display());
    let o = run(&["verify-residuals", "-c", cfg.to_str().unwrap(), &profile, &out_arg(tmp.path()), "--tol.residual=1e-4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let rep = json(&tmp.path().join("residual.json"));
    assert_eq!(rep["mode"], "expander");
    assert!(rep["residual"]["max_rel"][0].as_f64().unwrap() < 1e-4);
    assert!(std::fs::read_to_string(tmp.path().join("residual.csv")).unwrap().starts_with("r,res_mass,res_mom,res_energy\n"));
}

#[test]
fn shrinker_audit_zero_candidate_is_trivial() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["shrinker-audit", "-c", config("audit.conf").to_str().unwrap(), "--audit.candidate=zero", &out_arg(tmp.path())]);
    assert!(o.status.success());
    let rep = json(&tmp.path().join("audit.json"));
    assert_eq!(rep["report"]["verdict"]["kind"], "trivial");
    assert_eq!(rep["verdict_message"], "trivial: identically zero velocity and temperature");
}

#[test]
fn shrinker_audit_family_and_violator() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("audit.conf");
    let o = run(&["shrinker-audit", "-c", cfg.to_str().unwrap(), &out_arg(tmp.path())]);
    assert!(o.status.success());
    assert_eq!(json(&tmp.path().join("audit.json"))["report"]["verdict"]["kind"], "no-such-shrinker");
    let o = run(&["shrinker-audit", "-c", cfg.to_str().unwrap(), "--audit.u_ratio=0.2", &out_arg(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
    let rep = json(&tmp.path().join("audit.json"));
    assert!(rep["verdict_message"].as_str().unwrap().contains("sup |U/(r Theta)|"));
}

#[test]
fn scan_reports_every_point_and_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("scan.conf");
    let (a, b) = (tmp.path().join("serial"), tmp.path().join("parallel"));
    let o = run(&["scan", "-c", cfg.to_str().unwrap(), "--scan.boundary.a=1e-3 0.4 3 log", &out_arg(&a)]);
    assert!(o.status.success());
    let o = run(&["scan", "-c", cfg.to_str().unwrap(), "--scan.boundary.a=1e-3 0.4 3 log", "--jobs", "3", &out_arg(&b)]);
    assert!(o.status.success());
    for f in ["scan.csv", "scan.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    let rep = json(&a.join("scan.json"));
    assert_eq!(rep["points"], 3);
    let rows = rep["rows"].as_array().unwrap();
    assert_eq!(rows[2]["values"][0], 0.4);
    assert!(rows[2]["status"].as_str().unwrap().starts_with("fail"));
    assert_eq!(rows[2]["bootstrap_feasible"], false);
    let table = std::fs::read_to_string(a.join("scan.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.starts_with("index,boundary.a,status,"));
}

#[test]
fn constants_reports_infeasible_demo() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["constants", "-c", config("demo.conf").to_str().unwrap(), &out_arg(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
    let rep = json(&tmp.path().join("constants.json"));
    assert_eq!(rep["search"]["feasible"], false);
    assert!(rep["search"]["tightest"]["name"].is_string());
    let o = run(&[
        "constants",
        "-c",
        config("demo.conf").to_str().unwrap(),
        "--boundary.a=1e-13",
        "--boundary.p_delta=1e-4",
        "--boundary.theta0=1e-19",
        &out_arg(tmp.path()),
    ]);
    assert!(o.status.success());
    assert_eq!(json(&tmp.path().join("constants.json"))["search"]["feasible"], true);
}

#[test]
fn validation_error_is_machine_readable() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["solve-expander", "-c", config("demo.conf").to_str().unwrap(), "--physics.alpha=1.5", &out_arg(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["kind"], "validation-error");
    assert_eq!(err["field"], "physics.alpha");
    assert!(!tmp.path().join("failure.json").exists());
}

#[test]
fn parse_error_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.conf");
    std::fs::write(&path, "physics.d = 3\nphysics.colour = red\n").unwrap();
    let o = run(&["constants", "-c", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["kind"], "parse-error");
    assert_eq!(err["line"], 2);
}

#[test]
fn computation_error_writes_failure_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["shrinker-audit", "-c", config("audit.conf").to_str().unwrap(), "--physics.c_v=1", &out_arg(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    let rep = json(&tmp.path().join("failure.json"));
    assert_eq!(rep["status"], "error");
    assert_eq!(rep["kind"], "computation-error");
}

#[test]
fn environment_overrides_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["constants", "-c", config("demo.conf").to_str().unwrap()])
        .env("SSPROFILE_OUT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(listing(tmp.path()), ["constants.json"]);
}
