//! End-to-end checks of the subcommands through `run_args`.

use std::fs;
use std::path::{Path, PathBuf};

use hoc_cli::run_args;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("uavhoc-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_cfg(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &str, cfg: Option<&Path>, out: &Path, extra: &[&str]) -> i32 {
    let mut args: Vec<String> = vec!["uavhoc".into(), cmd.into(), "--out".into(), out.display().to_string()];
    if let Some(c) = cfg {
        args.push("--config".into());
        args.push(c.display().to_string());
    }
    args.extend(extra.iter().map(|s| s.to_string()));
    run_args(args)
}

fn read_csv_column(path: &Path, column: &str) -> Vec<String> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == column).unwrap();
    rdr.records().map(|r| r.unwrap()[idx].to_string()).collect()
}

#[test]
fn fit_reproduces_reference_coefficients() {
    let out = scratch("fit-ref");
    assert_eq!(run("fit", Some(&fixtures().join("reference_fit.cfg")), &out, &[]), 0);
    for file in ["coefficients.csv", "pmf_fits.csv"] {
        assert_eq!(
            fs::read(out.join(file)).unwrap(),
            fs::read(fixtures().join("reference_fit").join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = scratch("sim-repro");
    let cfg = write_cfg(&dir, "speed_kmh=60,120\nwindow_s=6\npadding_km=2\n");
    let a = dir.join("a");
    let b = dir.join("b");
    assert_eq!(run("simulate", Some(&cfg), &a, &["--runs", "15", "--seed", "4", "--threads", "1"]), 0);
    assert_eq!(run("simulate", Some(&cfg), &b, &["--runs", "15", "--seed", "4", "--threads", "2"]), 0);
    for file in ["summary.csv", "samples_000.csv", "samples_001.csv", "pmf_000.csv", "pmf_001.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let manifest = fs::read_to_string(a.join("manifest.txt")).unwrap();
    for key in ["base_seed=4", "runs=15", "config.speed_kmh=60,120", "config.001.speed_kmh=120.0", "config.000.f_c_ghz=1.5"] {
        assert!(manifest.contains(key), "{key}");
    }
    let c = dir.join("c");
    assert_eq!(run("simulate", Some(&cfg), &c, &["--runs", "15", "--seed", "5"]), 0);
    assert_ne!(fs::read(a.join("samples_001.csv")).unwrap(), fs::read(c.join("samples_001.csv")).unwrap());
}

#[test]
fn default_simulation_runs_end_to_end() {
    let out = scratch("sim-default");
    assert_eq!(run("simulate", None, &out, &["--runs", "3"]), 0);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    for key in ["p_gbs_dbm=46.0", "n_t=8", "downtilt_deg=6.0", "h_uav=100.0", "h_gbs=30.0", "f_c_ghz=1.5", "t_mg=40.0"] {
        assert!(manifest.contains(key), "{key}");
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = scratch("cfg-errors");
    let out = dir.join("out");
    let cases = [
        ("crlb", "speeed_kmh=60\n"),
        ("simulate", "t_ttt=50\n"),
        ("crlb", "speed_kmh=0,60\n"),
        ("msd", "speed_trace=missing.csv\n"),
        ("trace-replay", "m_hyst=2\n"),
        ("crlb", "t_ttt=80\n"),
        ("simulate", "channel_model=free-space\n"),
    ];
    for (cmd, text) in cases {
        let cfg = write_cfg(&dir, text);
        assert_eq!(run(cmd, Some(&cfg), &out, &["--runs", "2"]), 2, "{cmd}: {text}");
    }
    assert_eq!(run("crlb", Some(&dir.join("absent.cfg")), &out, &[]), 2);
    assert_eq!(run_args(["uavhoc", "crlb", "--bogus"]), 2);
    assert_eq!(run_args(["uavhoc", "simulate", "--runs", "0", "--out", out.to_str().unwrap()]), 2);

    fs::create_dir_all(dir.join("empty")).unwrap();
    let cfg = write_cfg(&dir, "samples_dir=empty\n");
    assert_eq!(run("fit", Some(&cfg), &out, &[]), 2);
}

#[test]
fn runtime_errors_exit_with_three() {
    // A hovering UAV never hands over, so every sample is equal and the
    // Gaussian fit has nothing to work with.
    let dir = scratch("runtime");
    let cfg = write_cfg(&dir, "speed_kmh=0\nwindow_s=2\n");
    assert_eq!(run("simulate", Some(&cfg), &dir.join("s"), &["--runs", "3"]), 0);
    let cfg = write_cfg(&dir, "samples_dir=s\n");
    assert_eq!(run("fit", Some(&cfg), &dir.join("f"), &[]), 3);
}

#[test]
fn crlb_table_contents() {
    let dir = scratch("crlb");
    let cfg = write_cfg(&dir, "speed_kmh=68\nwindow_s=6,12,24,48\n");
    assert_eq!(run("crlb", Some(&cfg), &dir, &[]), 0);
    let rmse: Vec<f64> = read_csv_column(&dir.join("crlb.csv"), "crlb_rmse")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(rmse.len(), 4);
    assert!(rmse.windows(2).all(|w| w[1] < w[0]));
    assert!((rmse[2] - 26.0).abs() <= 0.5);
    let text = fs::read_to_string(dir.join("crlb.csv")).unwrap();
    assert!(!text.contains(",,"));
}

#[test]
fn estimate_reports_states() {
    let dir = scratch("estimate");
    let cfg = write_cfg(&dir, "hoc=0,12,40\n");
    assert_eq!(run("estimate", Some(&cfg), &dir, &[]), 0);
    assert_eq!(read_csv_column(&dir.join("estimates.csv"), "state"), vec!["LOW", "MEDIUM", "HIGH"]);
}

#[test]
fn msd_echoes_thresholds_and_hover_stays_low() {
    let dir = scratch("msd");
    fs::write(dir.join("hover.csv"), "t_s,v_kmh\n0,0\n60,0\n").unwrap();
    let cfg = write_cfg(&dir, "speed_trace=hover.csv\n");
    let out = dir.join("out");
    assert_eq!(run("msd", Some(&cfg), &out, &[]), 0);
    assert_eq!(read_csv_column(&out.join("thresholds.csv"), "h_l"), vec!["7"]);
    assert_eq!(read_csv_column(&out.join("thresholds.csv"), "h_u"), vec!["15"]);
    for scheme in ["discrete", "sliding"] {
        let states = read_csv_column(&out.join(format!("windows_{scheme}.csv")), "state");
        assert!(!states.is_empty());
        assert!(states.iter().all(|s| s == "LOW"), "{scheme}");
    }
    assert_eq!(read_csv_column(&out.join("windows_discrete.csv"), "t_s").len(), 5);
    assert_eq!(read_csv_column(&out.join("windows_sliding.csv"), "t_s").len(), 49);
}

#[test]
fn trace_replay_writes_event_log() {
    let dir = scratch("replay");
    fs::write(
        dir.join("t.csv"),
        "time_ms,cell_id,rsrp_dbm\n0,0,-70\n0,1,-80\n40,0,-70\n40,1,-60\n",
    )
    .unwrap();
    let cfg = write_cfg(&dir, "trace=t.csv\nm_hyst=2\n");
    assert_eq!(run("trace-replay", Some(&cfg), &dir, &[]), 0);
    assert_eq!(
        fs::read_to_string(dir.join("events.csv")).unwrap(),
        "time_ms,event,from_cell,to_cell\n40,A3_ENTER,0,1\n40,HANDOVER,0,1\n"
    );
}
