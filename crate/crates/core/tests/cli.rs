use std::path::Path;
use std::process::{Command, Output};

use moment_split::decomposition::SolveOptions;
use moment_split::io::{read_moment_file, to_json_string};
use moment_split::scenarios::{reproduce, Scenario};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moment-split")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn gen(dir: &Path, name: &str, spec: &str, degree: usize) -> String {
    let path = dir.join(name);
    let out = run(&["gen-moments", "--spec", spec, "--degree", &degree.to_string(), "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path.to_str().unwrap().to_string()
}

#[test]
fn generated_files_have_the_expected_size_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let uniform = gen(dir.path(), "u.json", "uniform:0.1:0.7", 18);
    assert_eq!(read_moment_file(&uniform).unwrap().len(), 19);
    let gauss = gen(dir.path(), "g.json", "gaussian2", 18);
    let z = read_moment_file(&gauss).unwrap();
    assert_eq!(z.len(), 190);
    assert_eq!(to_json_string(&z), std::fs::read_to_string(&gauss).unwrap());

    let two = gen(dir.path(), "psi.json", "mix:0.5=dirac:0.4,0.5=dirac:0.5", 4);
    let values = read_moment_file(two).unwrap().values().to_vec();
    assert_eq!(values[1], 0.45);
}

#[test]
fn decompose_writes_text_and_json_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mu = gen(dir.path(), "mu.json", "mix:0.1=uniform:0.1:0.7,0.9=dirac:0.4", 18);
    let lambda = gen(dir.path(), "lambda.json", "uniform:0:1", 18);
    let report = dir.path().join("report.json");
    let out = run(&[
        "decompose", "--mu", &mu, "--lambda", &lambda, "--gamma", "0.2", "--order", "9",
        "--ref-psi", "dirac:0.4", "--atoms", "--out", report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("candidate atoms"), "{text}");

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    let errors: Vec<f64> = json["rows"].as_array().unwrap().iter().map(|r| r["psi_rel_error"].as_f64().unwrap()).collect();
    assert_eq!(errors.len(), 5);
    // first row is the mass itself
    assert_eq!(errors[0], 0.0);
    assert!(errors.iter().all(|e| *e < 0.0152), "{errors:?}");
    assert!(json["certificate"]["passed"].as_bool().unwrap());
}

#[test]
fn reproduce_matches_the_library_pipeline() {
    let out = run(&["reproduce", "--example", "ex1", "--p", "0.5", "--order", "6"]);
    assert!(out.status.success());
    let direct = reproduce(Scenario::Ex1, 0.5, Some(6), &SolveOptions::default(), None).unwrap();
    assert_eq!(stdout(&out), direct.table());

    let json = run(&["reproduce", "--example", "ex1", "--p", "0.5", "--order", "6", "--json"]);
    let value: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(value["rho"].as_f64().unwrap(), direct.solution.rho);
}

#[test]
fn reproduce_finds_two_atoms() {
    let out = run(&["reproduce", "--example", "ex2", "--p", "0.3", "--atoms"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let points: Vec<f64> = text
        .lines()
        .filter(|l| l.contains("weight"))
        .map(|l| l.trim().trim_start_matches('(').split(')').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(points.len(), 2, "{text}");
    assert!((points[0] - 0.4).abs() < 1e-2 && (points[1] - 0.5).abs() < 1e-2, "{points:?}");
}

#[test]
fn density_bound_command() {
    let dir = tempfile::tempdir().unwrap();
    let nu = gen(dir.path(), "nu.json", "scale:0.5=(uniform:0.1:0.7)", 8);
    let lambda = gen(dir.path(), "lambda.json", "uniform:0:1", 8);
    let holds = run(&["check-density-bound", "--nu", &nu, "--lambda", &lambda, "--gamma", "1", "--order", "4"]);
    assert!(holds.status.success());
    assert!(stdout(&holds).contains("bound holds at every order"));
    let fails = run(&["check-density-bound", "--nu", &nu, "--lambda", &lambda, "--gamma", "0.5", "--order", "4"]);
    assert!(stdout(&fails).contains("bound fails"));
}

#[test]
fn errors_are_machine_readable() {
    let bad = run(&["gen-moments", "--spec", "uniform:1", "--degree", "2"]);
    assert_eq!(bad.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&bad.stderr).unwrap();
    assert_eq!(err["error"], "parse");

    let dir = tempfile::tempdir().unwrap();
    let lambda = gen(dir.path(), "lambda.json", "uniform:0:1", 6);
    let short = run(&["decompose", "--mu", &lambda, "--lambda", &lambda, "--gamma", "1", "--order", "4"]);
    assert_eq!(short.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&short.stderr).unwrap();
    assert_eq!(err["error"], "degree-too-low");

    let missing = run(&["decompose", "--mu", "/nonexistent.json", "--lambda", &lambda, "--gamma", "1", "--order", "2"]);
    assert_eq!(missing.status.code(), Some(2));
}
