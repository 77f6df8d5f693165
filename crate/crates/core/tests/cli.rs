use std::path::{Path, PathBuf};

use blepi::cli::{main_with_args, EXIT_FAIL, EXIT_INPUT, EXIT_PASS};
use blepi::{builtin_datum, BLDatum, Builtin};
use nalgebra::DMatrix;
use serde_json::Value;
use tempfile::TempDir;

fn write_datum(dir: &Path, name: &str, which: Builtin) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, builtin_datum(&which).unwrap().to_json()).unwrap();
    path
}

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("blepi").chain(args.iter().copied()))
}

fn run_report(args: &[&str], out: &Path) -> (i32, Value) {
    let mut full = args.to_vec();
    let out_s = out.to_str().unwrap();
    full.extend(["--out", out_s]);
    let code = run(&full);
    let text = std::fs::read_to_string(out).unwrap();
    (code, serde_json::from_str(&text).unwrap())
}

#[test]
fn validate_reports_balance_without_judging_finiteness() {
    let dir = TempDir::new().unwrap();
    let datum = write_datum(dir.path(), "unbalanced.json", Builtin::Unbalanced);
    let (code, doc) = run_report(&["validate", "--datum", datum.to_str().unwrap()], &dir.path().join("r.json"));
    assert_eq!(code, EXIT_PASS);
    assert_eq!(doc["report"]["balance"], 1.0);
    assert_eq!(doc["report"]["ok"], true);
    assert_eq!(doc["command"], "validate");
    assert_eq!(doc["seed"], 0);
}

#[test]
fn solve_epi_and_write_trace() {
    let dir = TempDir::new().unwrap();
    let datum = write_datum(dir.path(), "epi.json", Builtin::Epi(0.5));
    let csv = dir.path().join("trace.csv");
    let (code, doc) = run_report(
        &["solve", "--datum", datum.to_str().unwrap(), "--trace-csv", csv.to_str().unwrap()],
        &dir.path().join("r.json"),
    );
    assert_eq!(code, EXIT_PASS);
    assert_eq!(doc["report"]["status"], "Converged");
    assert!(doc["report"]["value"].as_f64().unwrap().abs() < 1e-6);
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iteration,objective,stationarity"));
    assert!(lines.all(|l| l.split(',').count() == 3));
}

#[test]
fn identity_trace_is_short_and_ends_at_zero() {
    let dir = TempDir::new().unwrap();
    let datum = write_datum(dir.path(), "id.json", Builtin::Identity(2));
    let csv = dir.path().join("trace.csv");
    let code = run(&["solve", "--datum", datum.to_str().unwrap(), "--trace-csv", csv.to_str().unwrap(), "--out", dir.path().join("r.json").to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS);
    let text = std::fs::read_to_string(csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(!rows.is_empty() && rows.len() < 10);
    let last: f64 = rows.last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(last, 0.0);
}

#[test]
fn verify_gaussian_epi_gap() {
    let dir = TempDir::new().unwrap();
    let datum = write_datum(dir.path(), "epi.json", Builtin::Epi(0.5));
    let (code, doc) = run_report(
        &["verify-gaussian", "--datum", datum.to_str().unwrap(), "--sigmas", "[[1]],[[4]]", "--mg", "0"],
        &dir.path().join("r.json"),
    );
    assert_eq!(code, EXIT_PASS);
    let gap = doc["report"]["gap"].as_f64().unwrap();
    assert!((gap - 0.5 * (2.5f64 / 2.0).ln()).abs() < 1e-12, "{gap}");
    assert!((gap - 0.1115718).abs() < 1e-7);
}

#[test]
fn dump_datum_round_trips_bitwise() {
    let dir = TempDir::new().unwrap();
    let a = DMatrix::from_row_slice(2, 3, &[0.1, 1.0 / 3.0, -2.5e-7, 1e10, 0.7, 2f64.sqrt()]);
    let original = BLDatum::new(vec![1, 2], vec![0.3, 1.0 / 7.0], vec![0.9], vec![a]).unwrap();
    let path = dir.path().join("in.json");
    std::fs::write(&path, original.to_json()).unwrap();
    let out = dir.path().join("out.json");
    let code = run(&["validate", "--dump-datum", "--datum", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS);
    let back = BLDatum::from_json(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(back, original);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(back.maps()[0].as_slice()), bits(original.maps()[0].as_slice()));
    assert_eq!(bits(back.block_coeffs()), bits(original.block_coeffs()));
}

fn strip_timestamp(mut doc: Value) -> String {
    doc.as_object_mut().unwrap().remove("timestamp");
    serde_json::to_string(&doc).unwrap()
}

#[test]
fn identical_runs_give_identical_reports() {
    let dir = TempDir::new().unwrap();
    let datum = write_datum(dir.path(), "epi.json", Builtin::Epi(0.5));
    let targets = dir.path().join("t.json");
    std::fs::write(&targets, r#"[{"kind":"exponential","rate":1.0},{"kind":"exponential","rate":1.0}]"#).unwrap();
    let args = ["verify-sampled", "--datum", datum.to_str().unwrap(), "--targets", targets.to_str().unwrap(), "--samples", "5000", "--seed", "3"];
    let (c1, d1) = run_report(&args, &dir.path().join("a.json"));
    let (c2, d2) = run_report(&args, &dir.path().join("b.json"));
    assert_eq!(c1, c2);
    assert_eq!(d1["seed"], 3);
    assert_eq!(strip_timestamp(d1), strip_timestamp(d2));
}

#[test]
fn lemma_exit_codes_follow_the_check() {
    let dir = TempDir::new().unwrap();
    let datum = write_datum(dir.path(), "epi.json", Builtin::Epi(0.5));
    let targets = dir.path().join("t.json");
    std::fs::write(&targets, r#"[{"kind":"exponential","rate":1.0},{"kind":"exponential","rate":1.0}]"#).unwrap();
    let d = datum.to_str().unwrap();
    let (code, doc) = run_report(&["lemma1", "--datum", d, "--targets", targets.to_str().unwrap()], &dir.path().join("a.json"));
    assert_eq!(code, EXIT_FAIL);
    assert_eq!(doc["pass"], false);
    let (code, _) = run_report(&["lemma1", "--datum", d, "--sigmas", "[[2]],[[2]]"], &dir.path().join("b.json"));
    assert_eq!(code, EXIT_PASS);
    let (code, doc) = run_report(&["audit", "--datum", d, "--targets", targets.to_str().unwrap()], &dir.path().join("c.json"));
    assert_eq!(code, EXIT_PASS);
    assert!(doc["report"]["a_minus_c"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn bad_inputs_exit_with_input_error() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"r":[1],"c":[1],"d":[1],"maps":[[[1]]],"extra":0}"#).unwrap();
    assert_eq!(run(&["validate", "--datum", bad.to_str().unwrap()]), EXIT_INPUT);
    assert_eq!(run(&["validate", "--datum", dir.path().join("missing.json").to_str().unwrap()]), EXIT_INPUT);
    let datum = write_datum(dir.path(), "epi.json", Builtin::Epi(0.5));
    assert_eq!(run(&["verify-gaussian", "--datum", datum.to_str().unwrap(), "--sigmas", "[[1]],[[-4]]", "--mg", "0"]), EXIT_INPUT);
    assert_eq!(run(&["frobnicate"]), EXIT_INPUT);
}
