use std::path::Path;
use std::process::{Command, Output};

fn opotwin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opotwin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn dir_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let o = opotwin(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for sub in ["gain-curve", "noise-scan", "squeeze-run", "fit", "serve"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    for flag in ["--config", "--seed", "--out", "--filter", "--time-factor"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn noise_scan_writes_csv_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let o = opotwin(&["noise-scan", "--out", dir_arg(dir.path()), "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((report["electronic_floor_dbm"].as_f64().unwrap() + 70.75).abs() < 0.1);
    let csv = std::fs::read_to_string(dir.path().join("noise_scan.csv")).unwrap();
    assert!(csv.starts_with("lo_mw,noise_dbm\n"));
    assert_eq!(csv.lines().count(), 14);
    assert!(dir.path().join("noise_scan_report.json").exists());

    let refit = opotwin(&["fit", dir.path().join("noise_scan.csv").to_str().unwrap(), "--json"]);
    assert!(refit.status.success());
    let r: serde_json::Value = serde_json::from_str(&stdout(&refit)).unwrap();
    assert_eq!(r["electronic_floor_dbm"], report["electronic_floor_dbm"]);
}

#[test]
fn gain_curve_needs_three_points() {
    let dir = tempfile::tempdir().unwrap();
    let o = opotwin(&["gain-curve", "--pumps", "0.1", "--out", dir_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 3"));
}

#[test]
fn gain_curve_skips_points_above_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let o = opotwin(&[
        "gain-curve",
        "--pumps",
        "0.05,0.1,1.0,0.15,0.2",
        "--out",
        dir_arg(dir.path()),
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["points"], 4);
    let errs = r["point_errors"].as_array().unwrap();
    assert_eq!(errs.len(), 1);
    assert!(errs[0].as_str().unwrap().starts_with("1 W"));
    let csv = std::fs::read_to_string(dir.path().join("gain_curve.csv")).unwrap();
    assert!(csv.starts_with("pump_w,gain\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn fit_reads_gain_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    let p_th: f64 = 0.87;
    let mut body = String::from("pump_w,gain\n");
    for p in [0.03, 0.1, 0.2, 0.3] {
        body += &format!("{p},{}\n", (1.0 - (p / p_th).sqrt()).powi(-2));
    }
    std::fs::write(&path, body).unwrap();
    let o = opotwin(&["fit", path.to_str().unwrap(), "--json"]);
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((r["p_th_w"].as_f64().unwrap() - 0.87).abs() < 1e-6);
}

#[test]
fn unreadable_inputs_exit_two() {
    assert_eq!(opotwin(&["fit", "/nonexistent.csv"]).status.code(), Some(2));
    assert_eq!(
        opotwin(&["noise-scan", "--config", "/nonexistent.toml"]).status.code(),
        Some(2)
    );
    assert_eq!(opotwin(&["squeeze-run", "--filter", "2.0"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[cavity]\noutput_coupler = 1.5\n").unwrap();
    assert_eq!(
        opotwin(&["noise-scan", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(opotwin(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn lost_resonance_is_a_simulation_fault() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dark.toml");
    std::fs::write(&cfg, "[initial]\nseed_power_mw = 0.0\n").unwrap();
    let o = opotwin(&[
        "gain-curve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn squeeze_run_with_filter_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let o = opotwin(&[
        "squeeze-run",
        "--duration",
        "8",
        "--filter",
        "0.5",
        "--seed",
        "4",
        "--out",
        dir_arg(dir.path()),
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["filter_transmission"], 0.5);
    assert!((r["raw_sq_db"].as_f64().unwrap() + 0.47).abs() < 0.1);
    let trace = std::fs::read_to_string(dir.path().join("squeeze_trace.csv")).unwrap();
    assert!(trace.starts_with("time_s,phase_rad,power_dbm,mems_pos\n"));
    assert!(trace.contains(",seed\n") && trace.contains(",lo\n"));
}

#[test]
fn config_round_trips_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let o = opotwin(&["config", "--seed", "42"]);
    assert!(o.status.success());
    let path = dir.path().join("c.toml");
    std::fs::write(&path, stdout(&o)).unwrap();
    let again = opotwin(&["config", "--config", path.to_str().unwrap()]);
    assert_eq!(stdout(&again), stdout(&o));
    assert!(stdout(&o).contains("rng_seed = 42"));
}
