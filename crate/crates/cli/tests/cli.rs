use std::path::Path;
use std::process::{Command, Output};

use externa::audit::AuditReport;
use externa::experiments::VcgReport;
use externa::{BoundaryResult, Outcome, PaymentTable};

fn externa(args: &[&str]) -> Output {
    externa_env(args, &[])
}

fn externa_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_externa"));
    cmd.args(args).env_remove("EXTERNA_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Parses `text` as `T` and checks that serializing it again reproduces
/// the same JSON value.
fn round_trip<T: serde::de::DeserializeOwned + serde::Serialize>(text: &str) -> T {
    let parsed: T = serde_json::from_str(text).unwrap();
    let again: serde_json::Value = serde_json::to_value(&parsed).unwrap();
    let original: serde_json::Value = serde_json::from_str(text).unwrap();
    assert_eq!(again, original);
    parsed
}

#[test]
fn audit_of_mep_passes() {
    let o = externa(&["audit", "--mechanism", "mep+efficient-linear", "--model", "linear", "--grid", "D=1,eps=0.25"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let reports: Vec<AuditReport> = round_trip(&stdout(&o));
    assert_eq!(reports.len(), 2);
    assert!(reports.iter().all(|r| r.passed));
}

#[test]
fn audit_of_vcg_fails_with_csv_violations() {
    let o = externa(&[
        "audit", "--mechanism", "vcg", "--model", "proportional", "--D", "10", "--eps", "1", "--property", "ic",
        "--format", "csv",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let csv = stdout(&o);
    assert!(csv.starts_with("property,check,profile,agent,deviation,margin,detail\n"));
    assert!(csv.lines().any(|l| l.starts_with("IC,IC,10;1,0,3,")), "{csv}");
}

#[test]
fn existence_of_fixed_market_is_infeasible() {
    let o = externa(&["existence", "--model", "power-market", "--alpha", "-1", "--D", "5", "--eps", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("infeasible"));
    assert!(stdout(&o).starts_with("agent,t_i,others,p_max\n"));

    let o = externa(&[
        "existence", "--model", "power-market", "--alpha", "-1", "--D", "5", "--eps", "1", "--format", "json",
    ]);
    let table: PaymentTable = round_trip(&stdout(&o));
    assert!(!table.is_feasible());
    assert!(table.witness().is_some());
}

#[test]
fn existence_without_competition_is_feasible() {
    let o = externa(&["existence", "--model", "power-market", "--alpha", "0", "--grid", "D=4,eps=1"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn vcg_example_reports_exact_utilities() {
    let o = externa(&["vcg-example"]);
    assert_eq!(o.status.code(), Some(1));
    let report: VcgReport = round_trip(&stdout(&o));
    assert_eq!(report.truthful_utility, "10/11");
    assert_eq!(report.deviating_utility, "27/28");
    assert_eq!(externa(&["vcg-example", "--format", "csv"]).status.code(), Some(2));
}

#[test]
fn mep_run_outputs() {
    let o = externa(&["mep", "--model", "linear", "--alpha-matrix", "1,0.5;-0.2,0.8", "--types", "0.5,0.3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let outcome: Outcome = round_trip(&stdout(&o));
    assert_eq!(outcome.payments.len(), 2);

    let o = externa(&[
        "mep", "--model", "linear", "--alpha-matrix", "1,0.5;-0.2,0.8", "--types", "0.5,0.3", "--reports", "0.5,none",
        "--format", "csv",
    ]);
    let csv = stdout(&o);
    assert!(csv.starts_with("agent,allocation,payment,quality,value,utility\n"));
    assert!(csv.contains("\n1,0,0,"), "{csv}");

    let o = externa(&["mep", "--model", "linear", "--alpha-matrix", "1,0;0,1", "--types", "0.5,0.3", "--reports", "0.6,0.3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn boundary_json_round_trips() {
    let o = externa(&["boundary", "--alpha", "-0.8", "--cap", "20", "--full"]);
    assert_eq!(o.status.code(), Some(0));
    let r: BoundaryResult = round_trip(&stdout(&o));
    assert_eq!(r.boundary, 3);
    assert_eq!(r.sequence.len(), 20);
    assert!(r.is_monotone());
}

#[test]
fn config_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("audit.toml");
    std::fs::write(
        &path,
        "mechanism = \"free\"\n[model]\nfamily = \"power-market\"\nalpha = 0.0\n[grid]\nupper_bound = 2.0\nstep = 1.0\n[audit]\nproperties = [\"ic\"]\n",
    )
    .unwrap();
    let cfg = path.to_str().unwrap();
    let base = externa(&["audit", "--config", cfg]);
    assert_eq!(base.status.code(), Some(0), "{}", stderr(&base));
    let reports: Vec<AuditReport> = serde_json::from_str(&stdout(&base)).unwrap();
    assert_eq!(reports[0].grid.intervals(), 2);

    let o = externa(&["audit", "--config", cfg, "--eps", "0.5", "--property", "ic,wbb"]);
    let reports: Vec<AuditReport> = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].grid.intervals(), 4);
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[model]\nfamily = \"linear\"\nagnets = 3\n").unwrap();
    let o = externa(&["audit", "--config", path.to_str().unwrap(), "--grid", "D=1,eps=0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("agnets"), "{err}");

    std::fs::write(&path, "[model\nfamily = 1\n").unwrap();
    let o = externa(&["existence", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"));

    let missing = externa(&["audit", "--config", "/nonexistent/x.toml"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn usage_errors() {
    assert_eq!(externa(&[]).status.code(), Some(2));
    assert_eq!(externa(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        externa(&["audit", "--model", "linear", "--mechanism", "auction", "--grid", "D=1,eps=0.5"]).status.code(),
        Some(2)
    );
    assert_eq!(externa(&["audit", "--model", "linear"]).status.code(), Some(2));
    assert_eq!(externa(&["existence", "--model", "power-market", "--D", "2", "--eps", "1"]).status.code(), Some(2));
    assert_eq!(
        externa(&["audit", "--model", "proportional", "--mechanism", "mep+efficient-linear", "--grid", "D=1,eps=1"])
            .status
            .code(),
        Some(2)
    );
}

fn sweep_to(dir: &Path, name: &str, threads: &str, experiment: &str) -> Vec<u8> {
    let path = dir.join(name);
    let o = externa_env(
        &["sweep", "--experiment", experiment, "--seed", "3", "--samples", "10", "--cap", "40", "--out", path.to_str().unwrap()],
        &[("EXTERNA_THREADS", threads)],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    std::fs::read(path).unwrap()
}

#[test]
fn sweep_csv_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    for experiment in ["scaling", "types"] {
        let a = sweep_to(dir.path(), "a.csv", "1", experiment);
        let b = sweep_to(dir.path(), "b.csv", "4", experiment);
        assert_eq!(a, b, "{experiment}");
        let text = String::from_utf8(a).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.lines().skip(1).all(|l| !l.contains(' ')));
    }
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(&cfg, "[sweep]\nexperiment = \"boundary\"\n[sweep.boundary]\nalpha_stop = -0.7\nalpha_step = 0.1\ncap = 60\n").unwrap();
    let o = externa(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "alpha,boundary,open_above\n-1,1,false\n-0.9,1,false\n-0.8,3,false\n-0.7,38,false\n");
}
