use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use airyphase::airy::airy_eval;
use airyphase::coeff::builtin;
use airyphase::extend::SolverOptions;
use airyphase::reference::{reference_solve, REFERENCE_MAX_PANELS};
use serde_json::Value;

const AI_D0: f64 = 0.4587454489416301304495841;
const BI_D0: f64 = -0.7945704253078976327526653;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airyphase"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// The single JSON error line printed on failure.
fn error_line(o: &Output) -> Value {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {err}");
    serde_json::from_str(lines[0]).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn phase_from_expression() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "p.json");
    let o = run(&["phase", "--q0", "1 + t^2", "--omega", "256", "--domain", "-5", "5", "--out", &out]);
    assert!(o.status.success(), "{o:?}");
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["meta"]["iterations"].as_u64().unwrap() <= 8);
    assert_eq!(v["omega"], 256.0);
}

#[test]
fn airy_phase_has_few_pieces() {
    let o = run(&["phase", "--builtin", "airy", "--omega", "1024", "--domain", "-5", "5"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let pieces = v["gamma"]["breakpoints"].as_array().unwrap().len() - 1;
    assert!(pieces <= 4, "{pieces}");
}

#[test]
fn q_instead_of_q0_is_a_usage_error() {
    let o = run(&["phase", "--q0", "t"]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_line(&o);
    assert_eq!(e["error"], "usage");
    let msg = e["message"].as_str().unwrap();
    assert!(msg.contains("q0 must be supplied as the positive factor, not q"), "{msg}");
    assert!(e["usage"].as_str().unwrap().contains("airyphase phase"));
}

#[test]
fn flag_errors_exit_2() {
    for args in [
        &["phase", "--builtin", "airy", "--omega", "64", "--k", "15"][..],
        &["phase", "--builtin", "no-such", "--omega", "64"],
        &["phase", "--builtin", "airy"],
        &["phase", "--builtin", "airy", "--q0", "1", "--omega", "64"],
        &["phase", "--q0", "1 +", "--omega", "64"],
        &["solve", "--builtin", "airy", "--omega", "64", "--ivp", "0", "1", "0", "--bvp", "0", "1", "3", "1", "--at", "1"],
        &["solve", "--builtin", "airy", "--omega", "64", "--at", "1"],
        &["solve", "--builtin", "airy", "--omega", "64", "--ivp", "0", "1", "0"],
        &["bench", "--suite", "ivp", "--omegas", "9..8"],
        &["frobnicate"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert_eq!(error_line(&o)["error"], "usage", "{args:?}");
    }
    assert!(run(&["--help"]).status.success());
    assert!(run(&["solve", "--help"]).status.success());
}

#[test]
fn numerical_failure_exits_1_with_history() {
    // the window solve needs a moderate frequency away from pure Airy
    let o = run(&["phase", "--builtin", "ivp-q1", "--omega", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let e = error_line(&o);
    assert_eq!(e["error"], "numerical");
    assert_eq!(e["kind"], "NonConvergence");
    assert!(!e["zeta_history"].as_array().unwrap().is_empty());
}

#[test]
fn ivp_matches_airy_closed_form() {
    let o = run(&[
        "solve", "--builtin", "airy", "--omega", "1", "--domain", "-16", "5", "--ivp", "0", "1", "0", "--at", "-15",
    ]);
    assert!(o.status.success(), "{o:?}");
    let r = rows(&stdout(&o));
    assert_eq!(r[0], ["t", "y", "dy"]);
    let y: f64 = r[1][1].parse().unwrap();
    let a = airy_eval(-15.0).unwrap();
    let want = AI_D0 * a.bi - BI_D0 * a.ai;
    assert!(((y - want) / want).abs() <= 1e-12, "{y} vs {want}");
}

#[test]
fn empty_points_file_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let pts = path(dir.path(), "pts.txt");
    fs::write(&pts, "").unwrap();
    let o = run(&["solve", "--builtin", "airy", "--omega", "64", "--ivp", "0", "1", "0", "--points", &pts]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o), "t,y,dy\n");
}

#[test]
fn bvp_matches_reference() {
    let w = 256.0;
    let o = run(&["solve", "--builtin", "bvp-q1", "--omega", "256", "--bvp", "0", "1", "3", "1", "--grid", "0", "3", "301"]);
    assert!(o.status.success(), "{o:?}");
    let c = builtin("bvp-q1").unwrap();
    let mut opts = SolverOptions::default();
    opts.max_panels = REFERENCE_MAX_PANELS;
    let y1 = reference_solve(&c, w, (0.0, 3.0), 0.0, 1.0, 0.0, opts).unwrap();
    let y2 = reference_solve(&c, w, (0.0, 3.0), 0.0, 0.0, 1.0, opts).unwrap();
    let alpha = (1.0 - y1.eval(3.0).unwrap()[0]) / y2.eval(3.0).unwrap()[0];
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 302);
    for row in &r[1..] {
        let t: f64 = row[0].parse().unwrap();
        let y: f64 = row[1].parse().unwrap();
        let want = y1.eval(t).unwrap()[0] + alpha * y2.eval(t).unwrap()[0];
        assert!((y - want).abs() <= 1e-8, "t={t}: {y} vs {want}");
    }
}

#[test]
fn saved_phase_gives_the_same_solution() {
    let dir = tempfile::tempdir().unwrap();
    let p = path(dir.path(), "p.json");
    assert!(run(&["phase", "--builtin", "ivp-q3", "--omega", "512", "--out", &p]).status.success());
    let tail = ["--ivp", "0", "1", "0", "--grid", "-1", "5", "50"];
    let a = run(&[&["solve", "--phase", &p][..], &tail].concat());
    let b = run(&[&["solve", "--builtin", "ivp-q3", "--omega", "512"][..], &tail].concat());
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn restricted_scaled_and_unrestricted_output() {
    let base = ["solve", "--builtin", "ivp-q1", "--omega", "256", "--ivp", "0", "1", "0", "--grid", "-5", "5", "11"];
    let o = run(&base);
    assert!(o.status.success());
    let kept = rows(&stdout(&o));
    assert!(kept.len() - 1 < 11);
    assert!(String::from_utf8(o.stderr.clone()).unwrap().contains("omitted"));
    // far on the nonoscillatory side y is beyond double range
    let o = run(&[&base[..], &["--unrestricted"]].concat());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["kind"], "Range");
    let o = run(&[&base[..], &["--unrestricted", "--scaled"]].concat());
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    assert_eq!(r[0], ["t", "log10_abs_y", "sign_y"]);
    assert_eq!(r.len(), 12);
    let first: f64 = r[1][1].parse().unwrap();
    assert!(first > 308.0, "{first}");
    assert_eq!(r[1][2], "1");
}

fn without_time(csv: &str) -> Vec<Vec<String>> {
    rows(csv)
        .into_iter()
        .map(|mut r| {
            r.remove(2);
            r
        })
        .collect()
}

#[test]
fn bench_counts_records() {
    let o = run(&["bench", "--suite", "ivp", "--omegas", "8..12", "--runs", "1", "--ref-cap", "0"]);
    assert!(o.status.success(), "{o:?}");
    let r = rows(&stdout(&o));
    assert_eq!(
        r[0],
        ["coeff", "omega", "time_ms", "n_coeffs", "max_abs_err_osc", "max_rel_err_nonosc", "newton_iters", "status"]
    );
    assert_eq!(r.len() - 1, 15);
    assert!(r[1..].iter().all(|row| row[7] == "ok" && row[4].is_empty()));
    let o = run(&["bench", "--suite", "ivp", "--omegas", "8..12", "--runs", "1", "--ref-cap", "0", "--include-q2"]);
    // the verbatim q2 is not positive, so its cells fail
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(rows(&stdout(&o)).len() - 1, 20);
}

#[test]
fn bench_is_deterministic() {
    let args = ["bench", "--suite", "bvp", "--omegas", "8..9", "--runs", "2", "--ref-cap", "8", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{a:?}");
    let (ra, rb) = (without_time(&stdout(&a)), without_time(&stdout(&b)));
    assert_eq!(ra, rb);
    assert_eq!(ra.len(), 7);
    for row in &ra[1..] {
        let err = &row[3];
        if row[1] == "256" {
            assert!(err.parse::<f64>().unwrap() <= 1e-8, "{row:?}");
        } else {
            assert!(err.is_empty());
        }
        assert!(row[4].is_empty());
    }
}

#[test]
fn bench_failure_keeps_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "b.csv");
    let o = run(&["bench", "--suite", "ivp", "--omegas", "0..0", "--runs", "1", "--ref-cap", "-1", "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["failed"], 2);
    let csv = fs::read_to_string(&out).unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let recs: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(recs.len(), 3);
    assert_eq!(&recs[0][7], "ok");
    assert!(recs[1][7].starts_with("NonConvergence"));
}
