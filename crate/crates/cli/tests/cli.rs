//! End-to-end tests of the `pvi` binary: exit codes, artifact shapes, and
//! flag/file precedence.

use std::path::Path;
use std::process::{Command, Output};

fn pvi(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvi"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to launch pvi")
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1) // column header
        .collect()
}

#[test]
fn integrate_writes_full_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = pvi(
        &[
            "integrate",
            "--system",
            "rotor-oscillator",
            "--order",
            "inf",
            "--epsilon",
            "0.01",
            "--steps",
            "100",
            "--out",
            "run.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert!(csv.starts_with("# pvi "));
    assert!(csv.contains("# config: {"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 101, "100 steps give 101 points");
    let first: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(first[0], "0");
    assert_eq!(
        csv.lines().find(|l| !l.starts_with('#')).unwrap(),
        "step,t,z0,z1,newton_iters,residual"
    );
    // 17 significant digits round-trip f64 exactly.
    let z0: f64 = first[2].parse().unwrap();
    assert_eq!(z0, 1.2);
}

#[test]
fn unknown_system_is_exit_1_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = pvi(
        &["integrate", "--system", "nonsense", "--out", "run.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("run.csv").exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));
}

#[test]
fn missing_system_is_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = pvi(&["integrate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing system"));
}

#[test]
fn list_systems_names_both_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let out = pvi(&["list-systems"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("rotor-oscillator"));
    assert!(text.contains("fieldline"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        r#"
system = "rotor-oscillator"
epsilon = 0.01
order = "1"
steps = 5
"#,
    )
    .unwrap();
    let out = pvi(
        &[
            "integrate",
            "--config",
            "run.toml",
            "--steps",
            "7",
            "--out",
            "run.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert_eq!(data_rows(&csv).len(), 8, "--steps 7 overrides steps = 5");
    assert!(csv.contains("\"steps\":7"));
}

#[test]
fn poincare_at_zero_epsilon_conserves_radius() {
    let dir = tempfile::tempdir().unwrap();
    let out = pvi(
        &[
            "poincare",
            "--system",
            "fieldline",
            "--epsilon",
            "0",
            "--steps",
            "20",
            "--seed-grid",
            "0.5:1.5:3",
            "--out",
            "map.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("map.csv")).unwrap();
    assert_eq!(
        csv.lines().find(|l| !l.starts_with('#')).unwrap(),
        "seed_id,iterate,R,Theta"
    );
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 3 * 21);
    let mut first_radius = [f64::NAN; 3];
    for row in &rows {
        let f: Vec<&str> = row.split(',').collect();
        let id: usize = f[0].parse().unwrap();
        let radius: f64 = f[2].parse().unwrap();
        if first_radius[id].is_nan() {
            first_radius[id] = radius;
        }
        assert!(
            (radius - first_radius[id]).abs() < 1e-9,
            "seed {id}: radius drifted by {:.2e}",
            (radius - first_radius[id]).abs()
        );
    }
    assert!(!dir.path().join("map.failures.json").exists());
}

#[test]
fn converge_rejects_nonpositive_epsilons() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        r#"
system = "rotor-oscillator"
epsilons = [1e-3, -1e-4]
"#,
    )
    .unwrap();
    let out = pvi(
        &["converge", "--config", "bad.toml", "--out", "c.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("c.json").exists());
}

#[test]
fn converge_reports_first_order_slope() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        r#"
system = "rotor-oscillator"
order = "1"
tau = 1.0
epsilons = [1e-4, 3.16e-4, 1e-3, 3.16e-3, 1e-2]
"#,
    )
    .unwrap();
    let out = pvi(
        &["converge", "--config", "c.toml", "--out", "c.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.json")).unwrap())
            .unwrap();
    let slope = report["convergence"]["slope"].as_f64().unwrap();
    assert!(
        (slope - 2.0).abs() < 0.25,
        "order 1 local error should scale like eps^2, fitted slope {slope}"
    );
}

#[test]
fn check_passes_on_healthy_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = pvi(
        &[
            "check",
            "--system",
            "rotor-oscillator",
            "--epsilon",
            "0.01",
            "--tau",
            "1.0",
            "--steps",
            "20",
            "--out",
            "check.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("check.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(true));
}

#[test]
fn check_flags_a_broken_solver_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // An absurd residual tolerance accepts the predictor unmodified, so the
    // map is no longer variational and the two-form transport defect blows
    // past its bound.
    std::fs::write(
        dir.path().join("sloppy.toml"),
        r#"
system = "rotor-oscillator"
epsilon = 0.5
tau = 1.0
steps = 10

[solver]
residual_tol = 1e6
stagnation_tol = 1e6
"#,
    )
    .unwrap();
    let out = pvi(
        &["check", "--config", "sloppy.toml", "--out", "check.json"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("symplectic-defect"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("check.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(false));
}

#[test]
fn nonconvergent_run_exits_2_with_partial_artifact() {
    let dir = tempfile::tempdir().unwrap();
    // One Newton iteration with heavy damping cannot converge to 1e-12.
    std::fs::write(
        dir.path().join("stall.toml"),
        r#"
system = "fieldline"
epsilon = 0.0075
steps = 50

[solver]
max_iterations = 1
damping = 0.01
stagnation_tol = 1e-14
"#,
    )
    .unwrap();
    let out = pvi(
        &["integrate", "--config", "stall.toml", "--out", "run.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let rows = data_rows(&csv);
    assert!(rows.len() >= 2 && rows.len() < 51, "partial prefix, got {}", rows.len());
}
