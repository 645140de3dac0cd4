use hoc_core::format::fmt_f64;
use hoc_core::montecarlo::{empirical_pmf, run_hoc_campaign, Scenario};

use super::{create, RunOptions};
use crate::error::CliResult;
use crate::manifest::write_manifest;
use crate::params::{base_scenario, RUN_KEYS, SCENARIO_KEYS};

pub const SUMMARY_HEADER: [&str; 14] = [
    "index",
    "speed_kmh",
    "density",
    "h_uav_m",
    "t_ttt_ms",
    "t_mg_ms",
    "n_t",
    "window_s",
    "d_km",
    "runs",
    "mean",
    "variance",
    "samples_file",
    "pmf_file",
];

/// Cartesian product of the list-valued keys, innermost over speed.
pub fn scenario_grid(base: &Scenario, cfg: &crate::config::Config) -> CliResult<Vec<Scenario>> {
    let speeds = cfg.list("speed_kmh", &[base.speed_kmh])?;
    let densities = cfg.list("density", &[base.deployment.density])?;
    let heights = cfg.list("h_uav", &[base.h_uav])?;
    let ttts = cfg.list("t_ttt", &[base.handover.t_ttt])?;
    let arrays = cfg.list("n_t", &[base.antenna.n_t])?;
    let mut grid = Vec::new();
    for &n_t in &arrays {
        for &t_ttt in &ttts {
            for &h_uav in &heights {
                for &density in &densities {
                    for &speed in &speeds {
                        let mut s = base.clone();
                        s.antenna.n_t = n_t;
                        s.handover.t_ttt = t_ttt;
                        s.h_uav = h_uav;
                        s.deployment.density = density;
                        s.speed_kmh = speed;
                        grid.push(s);
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// Runs the campaign grid; writes per-configuration samples and PMFs,
/// `summary.csv` and the manifest.
pub fn cmd_simulate(opts: &RunOptions) -> CliResult<()> {
    let cfg = &opts.config;
    cfg.check_keys(&[SCENARIO_KEYS, RUN_KEYS])?;
    // Lists are expanded below; parse a scalar view with their first entries.
    let mut scalar = cfg.clone();
    for key in ["speed_kmh", "density", "h_uav", "t_ttt", "n_t"] {
        scalar.truncate_list(key);
    }
    let base = base_scenario(&scalar)?;
    let grid = scenario_grid(&base, cfg)?;
    for s in &grid {
        s.validate()?;
    }
    let runs = opts.runs()?;
    let seed = opts.seed()?;
    let results = run_hoc_campaign(&grid, runs, seed)?;

    let out = opts.out_dir()?;
    let mut summary = csv::Writer::from_writer(create(out, "summary.csv")?);
    summary
        .write_record(SUMMARY_HEADER)
        .map_err(hoc_core::Error::from)?;
    let mut resolved = vec![
        ("base_seed".to_string(), seed.to_string()),
        ("runs".to_string(), runs.to_string()),
        ("configurations".to_string(), grid.len().to_string()),
    ];
    for (i, (s, samples)) in grid.iter().zip(&results).enumerate() {
        let samples_file = format!("samples_{i:03}.csv");
        let pmf_file = format!("pmf_{i:03}.csv");
        samples.write_csv(create(out, &samples_file)?)?;
        empirical_pmf(samples)?.write_csv(create(out, &pmf_file)?)?;
        summary
            .write_record([
                i.to_string(),
                fmt_f64(s.speed_kmh),
                fmt_f64(s.deployment.density),
                fmt_f64(s.h_uav),
                fmt_f64(s.handover.t_ttt),
                fmt_f64(s.handover.t_mg),
                s.antenna.n_t.to_string(),
                fmt_f64(s.window_s),
                fmt_f64(s.distance_km()),
                samples.samples.len().to_string(),
                fmt_f64(samples.mean()),
                fmt_f64(samples.variance()),
                samples_file,
                pmf_file,
            ])
            .map_err(hoc_core::Error::from)?;
        for (k, v) in s.fingerprint().lines().filter_map(|l| l.split_once('=')) {
            resolved.push((format!("config.{i:03}.{k}"), v.to_string()));
        }
    }
    summary.flush().map_err(hoc_core::Error::from)?;
    write_manifest(out, "simulate", cfg, &resolved)
}
