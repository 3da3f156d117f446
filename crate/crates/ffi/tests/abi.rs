use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use qkr_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(qkr_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn plan_round_trip_and_errors() {
    unsafe {
        let text = CString::new("schedule = \"periodic\"\nL = 64\nt_star = 20\n").unwrap();
        let mut plan = ptr::null_mut();
        assert_eq!(qkr_plan_from_toml(text.as_ptr(), &mut plan), QkrStatus::Ok);
        let mut echo = ptr::null_mut();
        assert_eq!(qkr_plan_to_toml(plan, &mut echo), QkrStatus::Ok);
        let s = CStr::from_ptr(echo).to_str().unwrap().to_owned();
        assert!(s.contains("L = 64"), "{s}");
        qkr_string_free(echo);
        qkr_plan_free(plan);

        let bad = CString::new("K = -1.0\n").unwrap();
        let mut plan = ptr::null_mut();
        assert_eq!(qkr_plan_from_toml(bad.as_ptr(), &mut plan), QkrStatus::Config);
        assert!(plan.is_null());
        assert!(last_error().contains("`K`"), "{}", last_error());

        let comm = CString::new("[schedule]\nmode = \"quasiperiodic\"\nt2 = 2.0\n").unwrap();
        assert_eq!(qkr_plan_from_toml(comm.as_ptr(), &mut plan), QkrStatus::Config);

        assert_eq!(qkr_plan_from_toml(ptr::null(), &mut plan), QkrStatus::NullPointer);
    }
}

#[test]
fn state_step_and_reverse() {
    unsafe {
        let mut state = ptr::null_mut();
        assert_eq!(qkr_state_new_eigenstate(512, 0, 1.0, &mut state), QkrStatus::Ok);
        assert_eq!(qkr_state_dim(state), 1025);
        let mut initial = ptr::null_mut();
        assert_eq!(qkr_state_clone(state, &mut initial), QkrStatus::Ok);

        let mut sched = ptr::null_mut();
        assert_eq!(
            qkr_schedule_new_quasiperiodic(1.0, 0.0, 30, &mut sched),
            QkrStatus::Ok
        );
        let n = qkr_schedule_len(sched);
        assert_eq!(n, 30);
        let mut gaps = vec![0.0; n];
        assert_eq!(qkr_schedule_gaps(sched, gaps.as_mut_ptr(), n), QkrStatus::Ok);
        assert_eq!(
            qkr_schedule_gaps(sched, gaps.as_mut_ptr(), n - 1),
            QkrStatus::Invalid
        );

        let mut prop = ptr::null_mut();
        assert_eq!(
            qkr_propagator_new(QkrPropagatorKind::Spectral, 5.0, 1.0, 512, &mut prop),
            QkrStatus::Ok
        );
        for &g in &gaps {
            assert_eq!(qkr_propagator_forward(prop, state, g), QkrStatus::Ok);
        }
        let mut n2 = 0.0;
        assert_eq!(qkr_state_n2(state, &mut n2), QkrStatus::Ok);
        assert!(n2 > 10.0);
        for &g in gaps.iter().rev() {
            assert_eq!(qkr_propagator_adjoint(prop, state, g), QkrStatus::Ok);
        }
        let mut f = 0.0;
        assert_eq!(qkr_state_fidelity(state, initial, &mut f), QkrStatus::Ok);
        assert!((1.0 - f).abs() < 1e-12, "{f}");

        let mut buf = vec![0.0; 2 * 1025];
        assert_eq!(
            qkr_state_amplitudes(state, buf.as_mut_ptr(), buf.len()),
            QkrStatus::Ok
        );
        assert!((buf[2 * 512] - 1.0).abs() < 1e-12);

        let mut lmax = 0u64;
        assert_eq!(qkr_state_lmax(state, 0.0, &mut lmax), QkrStatus::Invalid);
        assert!(last_error().contains("delta"), "{}", last_error());

        qkr_propagator_free(prop);
        qkr_schedule_free(sched);
        qkr_state_free(initial);
        qkr_state_free(state);
        qkr_state_free(ptr::null_mut());
    }
}

#[test]
fn perturbation_through_abi() {
    unsafe {
        let mut a = ptr::null_mut();
        assert_eq!(qkr_state_new_gaussian(128, 0, 20.0, 1.0, &mut a), QkrStatus::Ok);
        let mut b = ptr::null_mut();
        qkr_state_clone(a, &mut b);
        assert_eq!(qkr_state_perturb(b, 0.2), QkrStatus::Ok);
        let (mut na, mut nb) = (0.0, 0.0);
        qkr_state_n2(a, &mut na);
        qkr_state_n2(b, &mut nb);
        assert_eq!(na.to_bits(), nb.to_bits());
        let mut f = 0.0;
        qkr_state_fidelity(a, b, &mut f);
        assert!(f < 0.5, "{f}");
        qkr_state_free(a);
        qkr_state_free(b);
    }
}

#[test]
fn reversal_through_abi() {
    unsafe {
        let text = CString::new("schedule = \"periodic\"\nL = 512\nt_star = 40\nepsilon = 0.0\n").unwrap();
        let mut plan = ptr::null_mut();
        assert_eq!(qkr_plan_from_toml(text.as_ptr(), &mut plan), QkrStatus::Ok);
        let mut rev = ptr::null_mut();
        assert_eq!(qkr_run_reversal(plan, &mut rev), QkrStatus::Ok);
        let mut sum = std::mem::zeroed::<QkrReversalSummary>();
        assert_eq!(qkr_reversal_summary(rev, &mut sum), QkrStatus::Ok);
        assert_eq!(sum.t_star, 40);
        assert_eq!(sum.resume_kick, -1);
        assert!(sum.final_fidelity > 1.0 - 1e-10);

        let mut series = ptr::null_mut();
        assert_eq!(qkr_reversal_series(rev, &mut series), QkrStatus::Ok);
        assert_eq!(qkr_series_len(series), 81);
        let mut s = std::mem::zeroed::<QkrSample>();
        assert_eq!(qkr_series_get(series, 80, &mut s), QkrStatus::Ok);
        assert_eq!(s.kick, 80);
        assert_eq!(qkr_series_get(series, 81, &mut s), QkrStatus::Invalid);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("s.csv").to_str().unwrap()).unwrap();
        assert_eq!(qkr_series_write_csv(series, path.as_ptr()), QkrStatus::Ok);
        let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
        assert_eq!(text.lines().count(), 82);

        qkr_series_free(series);
        qkr_reversal_free(rev);
        qkr_plan_free(plan);
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/qkr.h")
}

#[test]
fn header_is_valid_c_and_cpp() {
    let h = header();
    let c = Command::new("cc")
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-x", "c"])
        .arg(&h)
        .status()
        .expect("C compiler");
    assert!(c.success());
    let cpp = Command::new("c++")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c++"])
        .arg(&h)
        .status()
        .expect("C++ compiler");
    assert!(cpp.success());
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 20);
    for name in exports {
        assert!(text.contains(&format!("{name}(")), "{name} missing from header");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "qkr.h"

int main(void) {
    QkrState *s = NULL;
    QkrPropagator *p = NULL;
    double n2 = 0.0, norm = 0.0;
    if (qkr_state_new_eigenstate(32, 0, 1.0, &s) != QKR_STATUS_OK) return 1;
    if (qkr_propagator_new(QKR_PROPAGATOR_KIND_SPECTRAL, 2.0, 1.0, 32, &p) != QKR_STATUS_OK) return 2;
    for (int i = 0; i < 5; i++) qkr_propagator_forward(p, s, 1.0);
    qkr_state_n2(s, &n2);
    qkr_state_norm(s, &norm);
    if (qkr_state_new_eigenstate(4, 10, 1.0, NULL) != QKR_STATUS_INVALID) return 3;
    printf("%s %.6f %.12f\n", qkr_version(), n2, norm);
    qkr_propagator_free(p);
    qkr_state_free(s);
    return 0;
}
"#;

/// Directory holding the static library built alongside this test binary.
fn lib_dir() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let deps = exe.parent()?.to_path_buf();
    deps.join("libqkr_ffi.a").exists().then_some(deps)
}

#[test]
fn c_program_links_against_static_lib() {
    let Some(lib) = lib_dir() else {
        panic!("libqkr_ffi.a not found next to the test binary");
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(lib.join("libqkr_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = text.split_whitespace().collect();
    assert_eq!(fields[0], env!("CARGO_PKG_VERSION"));
    assert!(fields[1].parse::<f64>().unwrap() > 0.0);
    assert!((fields[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
}
