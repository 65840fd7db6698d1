//! End-to-end checks of the command-line runner: exit codes, output trees,
//! config layering and reproducibility contracts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sigmc"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sigmc_cli_{name}_{}", std::process::id()));
    fs::remove_dir_all(&dir).ok();
    dir
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn sigmc");
    assert!(
        out.status.success(),
        "sigmc {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn snapshot_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut map = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().into_string().unwrap();
        if name.starts_with("snap_") || name == "diagnostics.dat" {
            map.insert(name, fs::read(entry.path()).unwrap());
        }
    }
    map
}

#[test]
fn free_packet_runs_without_creation() {
    let dir = tmp("free");
    let cwd = tmp("free_cwd");
    fs::create_dir_all(&cwd).unwrap();
    let out = bin()
        .current_dir(&cwd)
        .args([
            "--preset",
            "free_packet",
            "--out",
            dir.to_str().unwrap(),
            "--seed",
            "5",
            "--set",
            "run.n0=5000",
            "--set",
            "time.total_fs=4",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = fs::read_to_string(dir.join("run_manifest.txt")).unwrap();
    assert!(manifest.contains("outcome = completed"), "{manifest}");
    assert!(manifest.contains("creation_events = 0"), "{manifest}");
    assert!(manifest.contains("conservation_residual = 0"), "{manifest}");
    let resolved = fs::read_to_string(dir.join("resolved_config.cfg")).unwrap();
    assert!(resolved.contains("potential.kind = zero"), "{resolved}");
    // nothing written outside the output directory
    assert_eq!(fs::read_dir(&cwd).unwrap().count(), 0);
    fs::remove_dir_all(&dir).ok();
    fs::remove_dir_all(&cwd).ok();
}

#[test]
fn invalid_dt_names_the_key_and_exits_2() {
    let out = bin()
        .args(["--preset", "free_packet", "--set", "time.dt_fs=0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("time.dt_fs"), "{stderr}");
    assert!(stderr.contains("positive"), "{stderr}");
}

#[test]
fn unknown_key_is_rejected() {
    let out = bin()
        .args(["--preset", "free_packet", "--set", "grid.bogus=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.bogus"));
}

#[test]
fn barrier_height_override_reaches_the_resolved_config() {
    let dir = tmp("height");
    run_ok(&[
        "--preset",
        "gaussian_barrier",
        "--out",
        dir.to_str().unwrap(),
        "--set",
        "potential.height_ev=0.10",
        "--set",
        "run.n0=2000",
        "--set",
        "time.total_fs=1",
    ]);
    let resolved = fs::read_to_string(dir.join("resolved_config.cfg")).unwrap();
    assert!(resolved.contains("potential.height_ev = 0.1"), "{resolved}");
    assert!(
        resolved.contains("potential.kind = gaussian_barrier"),
        "{resolved}"
    );
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn same_seed_same_config_byte_identical_snapshots() {
    let args_for = |dir: &Path| {
        vec![
            "--preset".to_owned(),
            "abrupt_barrier".to_owned(),
            "--out".to_owned(),
            dir.to_str().unwrap().to_owned(),
            "--seed".to_owned(),
            "42".to_owned(),
            "--workers".to_owned(),
            "1".to_owned(),
            "--set".to_owned(),
            "run.n0=20000".to_owned(),
            "--set".to_owned(),
            "time.total_fs=6".to_owned(),
        ]
    };
    let dir_a = tmp("det_a");
    let dir_b = tmp("det_b");
    run_ok(
        &args_for(&dir_a)
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    run_ok(
        &args_for(&dir_b)
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    let a = snapshot_bytes(&dir_a);
    let b = snapshot_bytes(&dir_b);
    assert!(!a.is_empty());
    assert_eq!(a, b);
    fs::remove_dir_all(&dir_a).ok();
    fs::remove_dir_all(&dir_b).ok();
}

#[test]
fn worker_count_does_not_change_results() {
    // stronger than the statistical-equivalence contract: fixed-size random
    // blocks make the ensemble independent of the worker count
    let run_with = |dir: &Path, workers: &str| {
        run_ok(&[
            "--preset",
            "abrupt_barrier",
            "--out",
            dir.to_str().unwrap(),
            "--seed",
            "9",
            "--workers",
            workers,
            "--set",
            "run.n0=20000",
            "--set",
            "time.total_fs=6",
        ]);
    };
    let dir_1 = tmp("w1");
    let dir_4 = tmp("w4");
    run_with(&dir_1, "1");
    run_with(&dir_4, "4");
    assert_eq!(snapshot_bytes(&dir_1), snapshot_bytes(&dir_4));
    fs::remove_dir_all(&dir_1).ok();
    fs::remove_dir_all(&dir_4).ok();
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir_a = tmp("echo_a");
    run_ok(&[
        "--preset",
        "gaussian_barrier",
        "--out",
        dir_a.to_str().unwrap(),
        "--seed",
        "11",
        "--set",
        "run.n0=10000",
        "--set",
        "time.total_fs=4",
    ]);
    let resolved = dir_a.join("resolved_config.cfg");
    let dir_b = tmp("echo_b");
    run_ok(&[
        "--config",
        resolved.to_str().unwrap(),
        "--out",
        dir_b.to_str().unwrap(),
    ]);
    assert_eq!(snapshot_bytes(&dir_a), snapshot_bytes(&dir_b));
    fs::remove_dir_all(&dir_a).ok();
    fs::remove_dir_all(&dir_b).ok();
}

#[test]
fn kernel_report_emits_tables() {
    let dir = tmp("report");
    run_ok(&["--preset", "kernel_report", "--out", dir.to_str().unwrap()]);
    for name in [
        "kernel_table.dat",
        "kernel_gamma.dat",
        "gamma_partial_sums.dat",
    ] {
        assert!(dir.join(name).exists(), "missing {name}");
    }
    let sums = fs::read_to_string(dir.join("gamma_partial_sums.dat")).unwrap();
    assert!(sums.contains("s4_per_fs") && sums.contains("s32_per_fs"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn classical_limit_emits_scan() {
    let dir = tmp("scan");
    run_ok(&[
        "--preset",
        "classical_limit",
        "--out",
        dir.to_str().unwrap(),
    ]);
    let table = fs::read_to_string(dir.join("classical_limit.dat")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 5); // default scales
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn particle_cap_aborts_with_exit_3() {
    let dir = tmp("cap");
    let out = bin()
        .args([
            "--preset",
            "abrupt_barrier",
            "--out",
            dir.to_str().unwrap(),
            "--set",
            "run.n0=5000",
            "--set",
            "run.particle_cap=5100",
            "--set",
            "time.total_fs=20",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let manifest = fs::read_to_string(dir.join("run_manifest.txt")).unwrap();
    assert!(manifest.contains("particle_cap_abort"), "{manifest}");
    // partial snapshots preserved
    assert!(dir.join("snap_000000_density_electron.dat").exists());
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn hydrogen_scenario_emits_species_files() {
    let dir = tmp("hyd");
    run_ok(&[
        "--preset",
        "hydrogen_1d",
        "--out",
        dir.to_str().unwrap(),
        "--set",
        "run.n0=2000",
        "--set",
        "time.total_fs=0.001",
        "--set",
        "time.snapshot_period=5",
    ]);
    for name in [
        "snap_000000_density_electron.dat",
        "snap_000000_density_proton.dat",
        "snap_000000_quasi_electron.dat",
        "epsilon_proton.dat",
        "epsilon_electron.dat",
        "separation.dat",
    ] {
        assert!(dir.join(name).exists(), "missing {name}");
    }
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn oracle_reference_files_appear_when_enabled() {
    let dir = tmp("oracle");
    run_ok(&[
        "--preset",
        "free_packet",
        "--out",
        dir.to_str().unwrap(),
        "--set",
        "run.n0=2000",
        "--set",
        "time.total_fs=2",
        "--set",
        "oracle.enabled=true",
    ]);
    assert!(dir.join("oracle_000000_density.dat").exists());
    assert!(dir.join("oracle_000000_quasi.dat").exists());
    fs::remove_dir_all(&dir).ok();
}
