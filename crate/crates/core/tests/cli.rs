use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qkr_core::io::Outcome;
use qkr_core::io::{read_series, RunManifest};

fn qkr(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkr"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("qkr runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

const SMALL: &str = r#"
schedule = "quasiperiodic"
L = 512
t_star = 100
epsilon = 0.05
"#;

#[test]
fn no_arguments_prints_usage_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = qkr(&[], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn minimal_config_echoes_every_default() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "min.toml", "schedule = \"quasiperiodic\"\n");
    let out = qkr(&["show-plan", "-c", "min.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let golden = include_str!("golden/minimal_plan.toml");
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("t_star = 600\ntotal_kicks = 1000\n", "t_star"),
        ("epsilon = -1.0\n", "epsilon"),
        ("K = 5.0\nKK = 1.0\n", "KK"),
        (
            "[schedule]\nmode = \"quasiperiodic\"\nt1 = 1.0\nt2 = 1.5\n",
            "commensurate",
        ),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let name = format!("bad{i}.toml");
        write(dir.path(), &name, text);
        let out = qkr(&["show-plan", "-c", &name], dir.path());
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(2), "{text}: {err}");
        assert!(err.contains(needle), "{text}: {err}");
    }
    let out = qkr(&["forward", "-c", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reverse_writes_artifacts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "small.toml", SMALL);
    for o in ["a", "b"] {
        let out = qkr(&["reverse", "-c", "small.toml", "-o", o], dir.path());
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for f in ["series.csv", "baseline.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let series = read_series(fs::File::open(a.join("series.csv")).unwrap()).unwrap();
    assert_eq!(series.len(), 201);
    assert!(series.samples.iter().all(|s| s.fidelity.is_some()));

    let manifest = RunManifest::from_toml(&fs::read_to_string(a.join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(manifest.outcome, Outcome::Completed);
    assert_eq!(manifest.command, "reverse");
    assert_eq!(manifest.plan.t_star, 100);
    assert!(manifest.artifacts.contains(&"series.csv".to_string()));
    assert!(manifest.results.contains_key("final_fidelity"));
    assert!(fs::read_to_string(a.join("plot.gp"))
        .unwrap()
        .contains("series.csv"));
}

#[test]
fn overrides_on_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "small.toml", SMALL);
    let out = qkr(
        &[
            "reverse",
            "-c",
            "small.toml",
            "-o",
            "o",
            "--epsilon",
            "0",
            "--t-star",
            "50",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = RunManifest::from_toml(&fs::read_to_string(dir.path().join("o/manifest.toml")).unwrap()).unwrap();
    assert_eq!((m.plan.t_star, m.plan.epsilon), (50, 0.0));
}

#[test]
fn leakage_aborts_with_three_and_keeps_partial_series() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "tight.toml", "L = 32\nt_star = 100\n");
    let out = qkr(&["forward", "-c", "tight.toml", "-o", "o"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("leakage"));
    let m = RunManifest::from_toml(&fs::read_to_string(dir.path().join("o/manifest.toml")).unwrap()).unwrap();
    assert_eq!(m.outcome, Outcome::Aborted);
    assert!(m.reason.unwrap().contains("leakage"));
    let partial = read_series(fs::File::open(dir.path().join("o/partial.csv")).unwrap()).unwrap();
    assert!(!partial.is_empty());
}

#[test]
fn degenerate_scan_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "small.toml", SMALL);
    let out = qkr(
        &["scan-eps", "-c", "small.toml", "-o", "o", "--eps", "1e-9,2e-9"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = RunManifest::from_toml(&fs::read_to_string(dir.path().join("o/manifest.toml")).unwrap()).unwrap();
    assert_eq!(m.outcome, Outcome::Inconclusive);
}

#[test]
fn validate_reports_deviations() {
    let dir = tempfile::tempdir().unwrap();
    let out = qkr(&["validate", "--half-width", "16"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("dense matrix"), "{text}");
    assert!(text.contains("spectral"), "{text}");
}
