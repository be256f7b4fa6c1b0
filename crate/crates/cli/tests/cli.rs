use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn stackel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stackel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn spec(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "specs", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn verify_example1_passes() {
    let out = stackel(&["verify", &spec("example1.stk"), "--samples", "20"]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), String::from_utf8_lossy(&out.stderr));
}

#[test]
fn impossible_tolerance_fails_checks() {
    let out = stackel(&["verify", "builtin:example1", "--samples", "5", "--tol", "1e-300"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| -> Vec<u8> {
        let path = dir.path().join(name);
        let out = stackel(&[
            "verify",
            &spec("example3.stk"),
            "--samples",
            "10",
            "--seed",
            "7",
            "--report",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        std::fs::read(&path).unwrap()
    };
    let (a, b) = (run("a.json"), run("b.json"));
    assert_eq!(a, b);
    let json: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(json["pass"], serde_json::Value::Bool(true));
    assert_eq!(json["environment"]["seed"], 7);
}

#[test]
fn hj_slopes_on_harmonic_benenti() {
    let out = stackel(&["hj", &spec("benenti2_harmonic.stk"), "--flow", "1", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("slope"));
}

#[test]
fn hj_rejects_non_quadratic_systems() {
    let out = stackel(&["hj", "builtin:example3", "--flow", "1", "--seed", "3"]);
    assert_eq!(code(&out), 2);
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn malformed_specs_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let syntax = write(dir.path(), "syntax.stk", "[system]\nname = bad\nn = 2\n[block 1]\nphi = 1\n[psi]\npsi = m^2 +* l\n");
    let out = stackel(&["verify", &syntax]);
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("syntax.stk:7:") && stderr.contains("column 6"), "{stderr}");
    let partition = write(dir.path(), "partition.stk", "[system]\nname = bad\nn = 2\npartition = 1, 2\n");
    assert_eq!(code(&stackel(&["verify", &partition])), 2);
    assert_eq!(code(&stackel(&["verify", "/nonexistent/x.stk"])), 2);
    assert_eq!(code(&stackel(&["verify", "builtin:nope"])), 2);
}

#[test]
fn integrate_writes_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let out = stackel(&[
        "integrate",
        "builtin:example1",
        "--chart",
        "--flow",
        "1",
        "--seed",
        "1",
        "--t-max",
        "0.5",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().count() > 400);
}

#[test]
fn export_round_trips_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.stk");
    let out = stackel(&["export", "builtin:exponential2", "--output", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let out = stackel(&["verify", path.to_str().unwrap(), "--samples", "10"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}
