use hoc_core::format::fmt_f64;
use hoc_core::montecarlo::simulate_profile_flight;
use hoc_core::msd::{
    average_detection_probability, detect_state, hoc_thresholds, read_speed_trace,
    state_probabilities, window_scheme, windowed_estimation, write_window_estimates,
    MobilityConfig, DEFAULT_STRIDE_S,
};

use super::{create, open_input, RunOptions};
use crate::error::{config, CliResult};
use crate::manifest::write_manifest;
use crate::params::{base_scenario, single_estimator, MOBILITY_KEYS, RUN_KEYS, SCENARIO_KEYS};

const KEYS: &[&str] = &[
    "coefficients",
    "speed_min",
    "speed_max",
    "speed_step",
    "avg_h_max",
    "avg_speed_min",
    "avg_speed_max",
    "speed_trace",
    "schemes",
    "stride",
];

fn grid(min: f64, max: f64, step: f64) -> CliResult<Vec<f64>> {
    if !(min > 0.0 && max >= min && step > 0.0) {
        return Err(config(format!(
            "speed grid needs 0 < min <= max and step > 0, got ({min}, {max}, {step})"
        )));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| min + k as f64 * step).collect())
}

/// Thresholds, state and detection probabilities over a speed grid, the
/// average detection surface over count thresholds, and, given
/// `speed_trace`, windowed estimates along a simulated variable-speed flight.
pub fn cmd_msd(opts: &RunOptions) -> CliResult<()> {
    let cfg = &opts.config;
    let scenario_keys: Vec<&str> = SCENARIO_KEYS
        .iter()
        .copied()
        .filter(|k| *k != "speed_kmh")
        .collect();
    cfg.check_keys(&[KEYS, MOBILITY_KEYS, RUN_KEYS, &scenario_keys])?;
    let est = single_estimator(cfg)?;
    let d = MobilityConfig::default();
    let mob = MobilityConfig::new(cfg.get("v_l", d.v_l)?, cfg.get("v_u", d.v_u)?)?;
    let th = hoc_thresholds(&mob, &est)?;
    let speeds = grid(
        cfg.get("speed_min", 1.0)?,
        cfg.get("speed_max", 160.0)?,
        cfg.get("speed_step", 1.0)?,
    )?;
    let avg_speeds = grid(
        cfg.get("avg_speed_min", 10.0)?,
        cfg.get("avg_speed_max", 160.0)?,
        1.0,
    )?;
    let h_max: u32 = cfg.get("avg_h_max", 30)?;

    let out = opts.out_dir()?;
    let csv_err = hoc_core::Error::from;

    let mut w = csv::Writer::from_writer(create(out, "thresholds.csv")?);
    w.write_record(["v_l_kmh", "v_u_kmh", "h_l", "h_u"]).map_err(csv_err)?;
    w.write_record([fmt_f64(mob.v_l), fmt_f64(mob.v_u), th.h_l.to_string(), th.h_u.to_string()])
        .map_err(csv_err)?;
    w.flush().map_err(hoc_core::Error::from)?;

    let mut w = csv::Writer::from_writer(create(out, "detection.csv")?);
    w.write_record(["v_kmh", "true_state", "p_low", "p_medium", "p_high", "p_detect", "p_false_alarm"])
        .map_err(csv_err)?;
    for &v in &speeds {
        let p = state_probabilities(v, &est, &mob)?;
        let truth = detect_state(v, &mob);
        let pd = p.of(truth);
        w.write_record([
            fmt_f64(v),
            truth.to_string(),
            fmt_f64(p.low),
            fmt_f64(p.medium),
            fmt_f64(p.high),
            fmt_f64(pd),
            fmt_f64(1.0 - pd),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(hoc_core::Error::from)?;

    let mut w = csv::Writer::from_writer(create(out, "average_detection.csv")?);
    w.write_record(["h_l", "h_u", "average_p_detect"]).map_err(csv_err)?;
    for h_l in 0..h_max {
        for h_u in (h_l + 1)..=h_max {
            let avg = average_detection_probability(h_l, h_u, &est, &avg_speeds)?;
            w.write_record([h_l.to_string(), h_u.to_string(), fmt_f64(avg)])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(hoc_core::Error::from)?;

    let mut resolved = vec![
        ("h_l".to_string(), th.h_l.to_string()),
        ("h_u".to_string(), th.h_u.to_string()),
    ];
    if let Some(path) = cfg.path("speed_trace") {
        let profile = read_speed_trace(open_input(&path)?)
            .map_err(|e| config(format!("{}: {e}", path.display())))?;
        let mut scalar = cfg.clone();
        scalar.truncate_list("density");
        let scenario = base_scenario(&scalar)?;
        let seed = opts.seed()?;
        let times = simulate_profile_flight(&scenario, &profile, seed)?;
        resolved.push(("base_seed".to_string(), seed.to_string()));

        let mut w = csv::Writer::from_writer(create(out, "handover_times.csv")?);
        w.write_record(["t_s"]).map_err(csv_err)?;
        for t in &times {
            w.write_record([fmt_f64(*t)]).map_err(csv_err)?;
        }
        w.flush().map_err(hoc_core::Error::from)?;

        let stride: f64 = cfg.get("stride", DEFAULT_STRIDE_S)?;
        let schemes: Vec<String> =
            cfg.list("schemes", &["discrete".to_string(), "sliding".to_string()])?;
        for name in schemes {
            let scheme = window_scheme(&name, stride)?;
            let series = windowed_estimation(
                &times,
                profile.total_s(),
                est.t_window,
                scheme.as_ref(),
                &est,
                &mob,
            )?;
            write_window_estimates(&series, create(out, &format!("windows_{name}.csv"))?)?;
        }
    }
    write_manifest(out, "msd", cfg, &resolved)
}
