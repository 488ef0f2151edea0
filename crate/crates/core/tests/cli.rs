use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pinchsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinchsim"))
        .args(args)
        .env("PINCHSIM_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn figure_run_writes_csv_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fig4.json",
        r#"{"schema_version": 1, "trials": 500, "sweep_dbm": [0, 30], "figure": {"kind": "fig4", "sides_m": [10]}}"#,
    );
    let out = dir.path().join("fig4.csv");
    let o = pinchsim(&["fig4", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(!text.contains('\r'));
    for key in ["# pinchsim_version:", "# config_sha256:", "# seed: 9", "# config: {"] {
        assert!(text.contains(key), "missing {key}");
    }
    // Defaults that were not in the file are logged in the header.
    assert!(text.contains("\"noise_power_dbm\":-90.0"));
    assert!(text.contains("scheme,power_dbm,mean_rate,stderr,n_trials,side_m"));
    assert_eq!(body(&text).lines().count(), 1 + 5 * 2);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "gap.json",
        r#"{"schema_version": 1, "trials": 700, "sweep_dbm": [20, 40], "figure": {"kind": "gap", "d1_m": [20]}}"#,
    );
    let a = pinchsim(&["gap", "--config", &cfg]);
    let b = Command::new(env!("CARGO_BIN_EXE_pinchsim"))
        .args(["gap", "--config", &cfg])
        .env("PINCHSIM_WORKERS", "1")
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn schema_errors_exit_2_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"schema_version": 1, "figure": {"kind": "fig6", "antenna_count": [1]}}"#,
    );
    let o = pinchsim(&["fig6", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("figure") && err.contains("antenna_count"), "{err}");

    let cfg = write(dir.path(), "type.json", r#"{"schema_version": 1, "seed": "x", "figure": {"kind": "fig6"}}"#);
    let o = pinchsim(&["fig6", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn mismatched_figure_kind_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.json", r#"{"schema_version": 1, "figure": {"kind": "fig4"}}"#);
    let o = pinchsim(&["fig5", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("figure.kind"));
}

#[test]
fn placement_capacity_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // A guard distance larger than the waveguide leaves room for one antenna only.
    let cfg = write(
        dir.path(),
        "cap.json",
        r#"{"schema_version": 1, "trials": 5, "sweep_dbm": [10],
            "physical": {"guard_distance_m": 100},
            "figure": {"kind": "fig6", "antenna_counts": [2]}}"#,
    );
    let o = pinchsim(&["fig6", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_passes_and_detects_fault() {
    let o = pinchsim(&["validate", "--trials", "200000"]);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{out}");
    assert!(out.contains("PASS g closed form vs quadrature"));

    let o = pinchsim(&["validate", "--trials", "200000", "--debug-eta-scale", "1.01"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL ergodic rate vs Monte Carlo"));
}

#[test]
fn trials_flag_overrides_config() {
    let o = pinchsim(&["fig5", "--trials", "50", "--seed", "3"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let row = body(&text).lines().nth(1).unwrap().to_string();
    assert_eq!(row.split(',').nth(4), Some("50"));
}

#[test]
fn table1_exit_code_tracks_ordering_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "t1.json",
        r#"{"schema_version": 1, "figure": {"kind": "table1", "realizations": 12,
            "search": {"kind": "local", "half_width_wavelengths": 2, "step_wavelengths": 0.25}}}"#,
    );
    let out = dir.path().join("t1.csv");
    let o = pinchsim(&["table1", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let err = String::from_utf8_lossy(&o.stderr);
    let violated = err.contains("ordering violated");
    assert_eq!(o.status.code(), Some(if violated { 3 } else { 0 }), "{err}");
    // The table is written either way.
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(body(&text).lines().count(), 1 + 12 * 5);
}
