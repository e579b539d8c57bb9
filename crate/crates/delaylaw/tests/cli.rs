use std::path::PathBuf;
use std::process::Command;

use delaylaw::cli::{run_args, Outcome};
use delaylaw::laws::LawReport;

fn run(args: &[&str]) -> Outcome {
    run_args(std::iter::once("delaylaw").chain(args.iter().copied()))
}

fn golden(name: &str) -> String {
    let file: String = name.chars().filter(|c| !"()=".contains(*c)).collect();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/classify_{file}.txt"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn classify_matches_golden_files() {
    for name in ["magma", "monoid", "cmonoid", "semilattice", "convex", "exceptions(E=2)", "idem-bang"] {
        let out = run(&["classify", name]);
        assert_eq!(out.code, 0);
        assert_eq!(out.stdout, golden(name), "classify {name}");
    }
}

#[test]
fn monoid_sequential_strict_passes() {
    let out = run(&["check", "monoid", "--lift", "seq", "--upto", "strict", "--max-steps", "2", "--json"]);
    assert_eq!(out.code, 0);
    let r: LawReport = serde_json::from_str(&out.stdout).unwrap();
    assert!(r.all_yes());
    assert_eq!(r.axioms.len(), 7);
}

#[test]
fn semilattice_parallel_strict_failure_is_predicted() {
    let out = run(&["check", "semilattice", "--lift", "par", "--upto", "strict", "--json"]);
    assert_eq!(out.code, 0);
    let r: LawReport = serde_json::from_str(&out.stdout).unwrap();
    let mult_t = r.axioms.iter().find(|e| e.name.to_string() == "MultT").unwrap();
    assert!(mult_t.verdict.is_no());
    assert!(mult_t.predicted);
    assert!(r.unexpected_failures().is_empty());
}

#[test]
fn powerset_prints_thirty_two_traces() {
    let out = run(&["nogo", "powerset"]);
    assert_eq!(out.code, 0);
    assert_eq!(out.stdout.matches("\nverified\n").count(), 32);
    assert!(out.stdout.contains("CLASH: StepEqDoubleStep: step(x) = step²(x)"));
    let json = run(&["nogo", "powerset", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&json.stdout).unwrap();
    assert_eq!(v["candidates"].as_array().unwrap().len(), 32);
    assert_eq!(v["surviving"], 0);
}

#[test]
fn distributions_json_reports_n() {
    let out = run(&["nogo", "distributions", "--p", "63/64", "--json"]);
    assert_eq!(out.code, 0);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["n"], 6);
    assert_eq!(v["first"]["verified"], true);
    assert_eq!(v["second"]["verified"], true);
}

#[test]
fn combos_report_through_the_cli() {
    let out = run(&["combo", "continuation", "--max-steps", "1"]);
    assert_eq!(out.code, 0, "{}", out.stdout);
    assert!(out.stdout.contains("(predicted)"));
    let sum = run(&["combo", "sum", "--theory", "magma", "--max-steps", "1"]);
    assert_eq!(sum.code, 0);
    assert!(sum.stdout.starts_with("theory sum(magma ⊕ D)"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_delaylaw");
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code().unwrap();
    assert_eq!(code(&["demo", "parallel-magma"]), 0);
    assert_eq!(code(&["check", "monoid", "--lift", "seq", "--fuel", "1", "--max-steps", "2"]), 2);
    assert_eq!(code(&["classify", "nonsense"]), 3);

    let dir = std::env::temp_dir().join(format!("delaylaw-exit-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("flat.theory");
    std::fs::write(&path, "theory flat\nop mul : 2\nop bang : 1\neq idem : mul(x, x) = x\neq flat : bang(x) = x\n").unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(code(&["check", p, "--lift", "custom", "--max-steps", "1"]), 1);
    std::fs::remove_dir_all(&dir).unwrap();
}
