//! End-to-end checks of the command-line interface: artifact layout,
//! determinism of written files, and the documented exit codes.

use std::fs;
use std::process::{Command, Output};

fn ctol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctol"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn out_dir(tag: &str) -> tempfile::TempDir {
    tempfile::Builder::new()
        .prefix(tag)
        .tempdir()
        .expect("tempdir")
}

#[test]
fn run_writes_telemetry_and_phase_log() {
    let dir = out_dir("ctol-run");
    let out = ctol(&["run", "--out", dir.path().to_str().unwrap()]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let telemetry = fs::read_to_string(dir.path().join("telemetry.csv")).unwrap();
    assert!(telemetry.starts_with(
        "t,phase,phi_deg,beta_deg,h,va,gamma_deg,theta_deg,alpha_deg,fp,omega_q_degs,fl,fd,ft,grounded\n"
    ));
    assert!(telemetry.lines().count() > 50_000);

    let log = fs::read_to_string(dir.path().join("phase_log.csv")).unwrap();
    let phases: Vec<&str> = log
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        phases,
        ["Rest", "P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "Rest"]
    );

    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("completed at"), "stdout: {stdout}");
}

#[test]
fn identical_runs_write_identical_bytes() {
    let a = out_dir("ctol-det-a");
    let b = out_dir("ctol-det-b");
    assert!(ctol(&["run", "--out", a.path().to_str().unwrap()])
        .status
        .success());
    assert!(ctol(&["run", "--out", b.path().to_str().unwrap()])
        .status
        .success());
    let ta = fs::read(a.path().join("telemetry.csv")).unwrap();
    let tb = fs::read(b.path().join("telemetry.csv")).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = out_dir("ctol-badcfg");
    let cfg = dir.path().join("windy.toml");
    let text =
        ctol_core::config::DEFAULT_CONFIG_TOML.replace("wind_speed = 0.0", "wind_speed = 2.0");
    fs::write(&cfg, text).unwrap();
    let out = ctol(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("wind_speed"), "stderr: {stderr}");
}

#[test]
fn scenario_timeout_exits_with_code_four() {
    let dir = out_dir("ctol-timeout");
    let cfg = dir.path().join("idle.toml");
    let text = ctol_core::config::DEFAULT_CONFIG_TOML
        .replace("takeoff_at = 0.0", "takeoff_at = 50.0")
        .replace("land_at = 20.0", "land_at = 60.0")
        .replace("max_time = 75.0", "max_time = 0.05");
    fs::write(&cfg, text).unwrap();
    let out = ctol(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Rest"), "stderr: {stderr}");
    // Partial telemetry still lands on disk.
    assert!(dir.path().join("telemetry.csv").exists());
}

#[test]
fn linearize_dumps_all_three_designs() {
    let dir = out_dir("ctol-lin");
    let out = ctol(&["linearize", "--out", dir.path().to_str().unwrap()]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.path().join("designs.txt")).unwrap();
    for phase in ["phase: P3", "phase: P4", "phase: P6"] {
        assert!(text.contains(phase), "missing {phase}");
    }
    for key in [
        "A[0]:",
        "B[3]:",
        "K[1]:",
        "P[3]:",
        "closed_loop_eigenvalues:",
        "care_residual:",
    ] {
        assert!(text.contains(key), "missing {key}");
    }
    // The glide reference is reported as a non-trim with its thrust demand.
    assert!(text.contains("path_balance_thrust_demand"));
}

#[test]
fn envelope_emits_grids_and_bound() {
    let dir = out_dir("ctol-env");
    let out = ctol(&[
        "envelope",
        "--out",
        dir.path().to_str().unwrap(),
        "--alpha-deg",
        "0,9",
        "--r-min",
        "1.2",
        "--r-max",
        "3.6",
        "--r-count",
        "3",
        "--beta-max-deg",
        "24",
        "--beta-count",
        "25",
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let bound = fs::read_to_string(dir.path().join("beta_max.csv")).unwrap();
    assert!(bound.starts_with("alpha_deg,r,beta_max_deg\n"));
    // 2 alphas x 3 radii.
    assert_eq!(bound.lines().count(), 1 + 6);

    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    let grids: Vec<&String> = names
        .iter()
        .filter(|n| n.starts_with("level_speed_alpha_"))
        .collect();
    assert_eq!(grids.len(), 2, "files: {names:?}");
    let grid = fs::read_to_string(dir.path().join(grids[0].as_str())).unwrap();
    assert!(grid.starts_with("r,beta_deg,va,feasible\n"));
    assert_eq!(grid.lines().count(), 1 + 3 * 25);
    // Infeasible rows carry an empty speed and a zero flag.
    assert!(grid.lines().any(|l| l.ends_with(",,0")));
    assert!(grid.lines().any(|l| l.ends_with(",1")));
}

#[test]
fn sweep_runs_grid_points_and_summarizes() {
    let dir = out_dir("ctol-sweep");
    let out = ctol(&[
        "sweep",
        "--key",
        "scenario.land_at",
        "--values",
        "5,6",
        "--dt",
        "0.002",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary =
        fs::read_to_string(dir.path().join("sweep_scenario_land_at_summary.csv")).unwrap();
    assert!(summary.starts_with("value,exit,final_phase,end_time,records\n"));
    assert_eq!(summary.lines().count(), 3);
    for v in ["5", "6"] {
        let point = dir.path().join(format!("sweep_scenario_land_at_{v}"));
        assert!(
            point.join("telemetry.csv").exists(),
            "missing {}",
            point.display()
        );
        assert!(point.join("phase_log.csv").exists());
    }
}

#[test]
fn sweep_addresses_array_entries() {
    let dir = out_dir("ctol-sweep-arr");
    // Vary the post-stall drag estimate; both points must run.
    let out = ctol(&[
        "sweep",
        "--key",
        "aero.polar.3.cd",
        "--values",
        "0.2,0.3",
        "--dt",
        "0.002",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = fs::read_to_string(dir.path().join("sweep_aero_polar_3_cd_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(
        summary.lines().skip(1).all(|l| l.contains("completed")),
        "{summary}"
    );
}

#[test]
fn sweep_rejects_unknown_or_non_numeric_keys() {
    let dir = out_dir("ctol-sweep-bad");
    let out = ctol(&[
        "sweep",
        "--key",
        "scenario.does_not_exist",
        "--values",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = ctol(&[
        "sweep",
        "--key",
        "tether.attachment",
        "--values",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_check_passes_on_defaults() {
    let out = ctol(&["--seed-check"]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("all checks passed"), "stdout: {stdout}");
    assert!(!stdout.contains("FAIL"), "stdout: {stdout}");
}

#[test]
fn dt_override_is_honored() {
    let dir = out_dir("ctol-dt");
    let out = ctol(&[
        "run",
        "--dt",
        "0.002",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let telemetry = fs::read_to_string(dir.path().join("telemetry.csv")).unwrap();
    let second = telemetry.lines().nth(2).unwrap();
    assert!(second.starts_with("0.002,"), "row: {second}");
}

#[test]
fn land_at_override_moves_the_loiter_exit() {
    let dir = out_dir("ctol-land");
    let out = ctol(&[
        "run",
        "--land-at",
        "10",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let log = fs::read_to_string(dir.path().join("phase_log.csv")).unwrap();
    let p4 = log.lines().find(|l| l.starts_with("P4,")).unwrap();
    let exit: f64 = p4.split(',').nth(2).unwrap().parse().unwrap();
    assert!((exit - 10.0).abs() <= 2e-3, "P4 exit {exit}");
}
