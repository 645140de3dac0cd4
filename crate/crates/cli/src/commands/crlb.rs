use hoc_core::estimation::{
    crlb_speed_variance, estimator_mean, estimator_variance, fisher_information, model_mu,
    model_sigma2, EstimatorConfig,
};
use hoc_core::format::fmt_f64;

use super::{create, RunOptions};
use crate::error::CliResult;
use crate::manifest::write_manifest;
use crate::params::{coefficient_table, table_row, ESTIMATOR_KEYS, TABLE_KEYS};

const KEYS: &[&str] = &["speed_kmh"];

pub const CRLB_HEADER: [&str; 14] = [
    "t_mg_ms",
    "t_ttt_ms",
    "h_uav_m",
    "n_t",
    "density",
    "window_s",
    "v_kmh",
    "mu",
    "sigma2",
    "fisher_information",
    "crlb_variance",
    "crlb_rmse",
    "estimator_mean",
    "estimator_variance",
];

/// Bound and estimator moments over every combination of the listed
/// table rows, densities, windows and speeds; writes `crlb.csv`.
pub fn cmd_crlb(opts: &RunOptions) -> CliResult<()> {
    let cfg = &opts.config;
    cfg.check_keys(&[KEYS, TABLE_KEYS, ESTIMATOR_KEYS])?;
    let table = coefficient_table(cfg)?;
    let t_mg: f64 = cfg.get("t_mg", 40.0)?;
    let ttts = cfg.list("t_ttt", &[0.0])?;
    let heights = cfg.list("h_uav", &[100.0])?;
    let arrays = cfg.list("n_t", &[8u32])?;
    let densities = cfg.list("density", &[1.0])?;
    let windows = cfg.list("window_s", &[12.0])?;
    let default_speeds: Vec<f64> = (1..=16).map(|k| f64::from(k) * 10.0).collect();
    let speeds = cfg.list("speed_kmh", &default_speeds)?;

    let mut records = Vec::new();
    for &t_ttt in &ttts {
        for &h_uav in &heights {
            for &n_t in &arrays {
                let row = table_row(&table, t_mg, t_ttt, h_uav, n_t)?;
                for &density in &densities {
                    for &window in &windows {
                        let est = EstimatorConfig::from_row(&row, density, window)?;
                        for &v in &speeds {
                            records.push(vec![
                                fmt_f64(t_mg),
                                fmt_f64(t_ttt),
                                fmt_f64(h_uav),
                                n_t.to_string(),
                                fmt_f64(density),
                                fmt_f64(window),
                                fmt_f64(v),
                                fmt_f64(model_mu(v, &est)?),
                                fmt_f64(model_sigma2(v, &est)?),
                                fmt_f64(fisher_information(v, &est)?),
                                fmt_f64(crlb_speed_variance(v, &est)?),
                                fmt_f64(crlb_speed_variance(v, &est)?.sqrt()),
                                fmt_f64(estimator_mean(v, &est)?),
                                fmt_f64(estimator_variance(v, &est)?),
                            ]);
                        }
                    }
                }
            }
        }
    }

    let out = opts.out_dir()?;
    let mut w = csv::Writer::from_writer(create(out, "crlb.csv")?);
    w.write_record(CRLB_HEADER).map_err(hoc_core::Error::from)?;
    for r in records {
        w.write_record(r).map_err(hoc_core::Error::from)?;
    }
    w.flush().map_err(hoc_core::Error::from)?;
    write_manifest(out, "crlb", cfg, &Vec::new())
}
