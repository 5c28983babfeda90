//! End-to-end runs of the `dcgm` binary.

use std::path::Path;
use std::process::Command;

fn dcgm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dcgm")).args(args).output().expect("spawn dcgm")
}

fn run_in(dir: &Path, args: &[&str]) -> std::process::Output {
    let out = dir.to_str().unwrap();
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", out]);
    dcgm(&full)
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn assert_reproducible(args: &[&str], expected: &[&str]) {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let out = run_in(dir, args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    for e in expected {
        assert!(names.contains(e), "{args:?}: missing {e} in {names:?}");
    }
    assert_eq!(fa, fb, "{args:?}: outputs differ between runs");
}

#[test]
fn help_and_version_exit_zero() {
    assert!(dcgm(&["--help"]).status.success());
    assert!(dcgm(&["--version"]).status.success());
    assert!(dcgm(&["heston", "--help"]).status.success());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(dcgm(&[]).status.code(), Some(2));
    assert_eq!(dcgm(&["spin"]).status.code(), Some(2));
    assert_eq!(dcgm(&["bell", "--scheme", "upwind"]).status.code(), Some(2));
    assert_eq!(dcgm(&["bell", "--sigma", "3"]).status.code(), Some(2));
    assert_eq!(dcgm(&["bell", "--no-boundary-integral"]).status.code(), Some(2));
}

#[test]
fn invalid_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["bell", "--N", "40", "--nu=-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn mesh_is_reproducible() {
    assert_reproducible(&["mesh", "--N", "40"], &["mesh.msh", "manifest.txt"]);
    assert_reproducible(&["mesh", "--rect", "5,4", "--x-max", "2"], &["mesh.msh"]);
}

#[test]
fn bell_is_reproducible() {
    assert_reproducible(
        &["bell", "--N", "40", "--nu", "1e-3", "--samples", "21"],
        &["table1.csv", "diagnostics.csv", "field.csv", "cut40.csv", "manifest.txt"],
    );
    assert_reproducible(&["bell", "--N", "40", "--dirichlet", "--steps", "5"], &["table1.csv"]);
}

#[test]
fn compare_convergence_and_discont_are_reproducible() {
    assert_reproducible(&["compare", "--N", "40", "--samples", "11"], &["table2.csv", "cut40.csv"]);
    assert_reproducible(&["convergence", "--N", "30,40,50", "--nu", "1e-3"], &["convergence.csv", "table1.csv"]);
    assert_reproducible(&["discont", "--N", "40"], &["diagnostics.csv", "field.csv"]);
}

#[test]
fn heston_is_reproducible() {
    assert_reproducible(
        &["heston", "--nx", "12", "--ny", "12", "--steps", "10", "--snapshot-every", "5"],
        &["heston_diag.csv", "heston_u_final.csv", "heston_u_00005.csv", "manifest.txt"],
    );
}

#[test]
fn bell_table_reports_conserved_mass() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), &["bell", "--N", "40", "--nu", "1e-3"]).status.success());
    let diag = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    let mut lines = diag.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "mass").expect("mass column");
    let mass: Vec<f64> = lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert!(mass.len() > 2);
    for m in &mass {
        assert!((m - mass[0]).abs() <= 1e-10 * mass[0].abs());
    }
}
