use hoc_core::estimation::estimate_speed;
use hoc_core::format::fmt_f64;
use hoc_core::msd::{detect_state, MobilityConfig};

use super::{create, RunOptions};
use crate::error::{config, CliResult};
use crate::manifest::write_manifest;
use crate::params::{single_estimator, ESTIMATOR_KEYS, MOBILITY_KEYS, TABLE_KEYS};

const KEYS: &[&str] = &["hoc"];

/// Speed estimate and mobility state for each listed handover count;
/// writes `estimates.csv`.
pub fn cmd_estimate(opts: &RunOptions) -> CliResult<()> {
    let cfg = &opts.config;
    cfg.check_keys(&[KEYS, TABLE_KEYS, ESTIMATOR_KEYS, MOBILITY_KEYS])?;
    let est = single_estimator(cfg)?;
    let d = MobilityConfig::default();
    let mob = MobilityConfig::new(cfg.get("v_l", d.v_l)?, cfg.get("v_u", d.v_u)?)?;
    let counts: Vec<u32> = cfg.list("hoc", &[])?;
    if counts.is_empty() {
        return Err(config("missing required key 'hoc'"));
    }

    let out = opts.out_dir()?;
    let mut w = csv::Writer::from_writer(create(out, "estimates.csv")?);
    w.write_record(["hoc", "v_hat_kmh", "state"])
        .map_err(hoc_core::Error::from)?;
    for h in counts {
        let v = estimate_speed(h, &est);
        w.write_record([h.to_string(), fmt_f64(v), detect_state(v, &mob).to_string()])
            .map_err(hoc_core::Error::from)?;
    }
    w.flush().map_err(hoc_core::Error::from)?;
    write_manifest(out, "estimate", cfg, &Vec::new())
}
