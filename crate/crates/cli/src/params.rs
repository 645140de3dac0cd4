//! Config keys shared across subcommands and the structures built from them.

use hoc_core::antenna::AntennaConfig;
use hoc_core::channel::{ChannelConfig, ShadowingConfig};
use hoc_core::estimation::EstimatorConfig;
use hoc_core::fitting::{CoefficientRow, CoefficientTable};
use hoc_core::geometry::DeploymentConfig;
use hoc_core::handover::HandoverConfig;
use hoc_core::montecarlo::Scenario;

use crate::config::Config;
use crate::error::{config, CliResult};

/// Keys describing the simulated network, channel, handover logic and flight.
pub const SCENARIO_KEYS: &[&str] = &[
    "density",
    "h_gbs",
    "p_gbs_dbm",
    "n_t",
    "downtilt_deg",
    "theta_3db",
    "g_e_max",
    "g_m",
    "spacing",
    "channel_model",
    "f_c_ghz",
    "alpha_0",
    "eps_r",
    "shadowing",
    "shadow_rho",
    "shadow_x_c",
    "shadow_sigma_los",
    "shadow_sigma_nlos",
    "m_hyst",
    "t_ttt",
    "t_mg",
    "ttt_binding",
    "speed_kmh",
    "h_uav",
    "window_s",
    "padding_km",
    "core_km",
];

pub const RUN_KEYS: &[&str] = &["runs", "seed"];

/// Keys selecting a row of the coefficient table.
pub const TABLE_KEYS: &[&str] = &["coefficients", "t_mg", "t_ttt", "h_uav", "n_t"];

pub const ESTIMATOR_KEYS: &[&str] = &["density", "window_s"];

pub const MOBILITY_KEYS: &[&str] = &["v_l", "v_u"];

/// Scenario with every key read as a scalar; list-valued keys are left to
/// the caller.
pub fn base_scenario(cfg: &Config) -> CliResult<Scenario> {
    let d = Scenario::default();
    let dep = DeploymentConfig {
        density: cfg.get("density", d.deployment.density)?,
        h_gbs: cfg.get("h_gbs", d.deployment.h_gbs)?,
        p_gbs_dbm: cfg.get("p_gbs_dbm", d.deployment.p_gbs_dbm)?,
    };
    let ant = AntennaConfig {
        n_t: cfg.get("n_t", d.antenna.n_t)?,
        downtilt_deg: cfg.get("downtilt_deg", d.antenna.downtilt_deg)?,
        theta_3db: cfg.get("theta_3db", d.antenna.theta_3db)?,
        g_e_max: cfg.get("g_e_max", d.antenna.g_e_max)?,
        g_m: cfg.get("g_m", d.antenna.g_m)?,
        spacing: cfg.get("spacing", d.antenna.spacing)?,
    };
    let sd = ShadowingConfig::default();
    let shadowing = ShadowingConfig {
        mode: cfg.get("shadowing", sd.mode)?,
        rho: cfg.get("shadow_rho", sd.rho)?,
        x_c: cfg.get("shadow_x_c", sd.x_c)?,
        sigma_los: cfg.get_opt("shadow_sigma_los")?,
        sigma_nlos: cfg.get("shadow_sigma_nlos", sd.sigma_nlos)?,
    };
    let cd = ChannelConfig::default();
    let channel = ChannelConfig {
        model: cfg.get("channel_model", cd.model)?,
        f_c_ghz: cfg.get("f_c_ghz", cd.f_c_ghz)?,
        alpha_0: cfg.get("alpha_0", cd.alpha_0)?,
        eps_r: cfg.get("eps_r", cd.eps_r)?,
        shadowing,
    };
    let hd = HandoverConfig::default();
    let handover = HandoverConfig {
        m_hyst: cfg.get("m_hyst", hd.m_hyst)?,
        t_ttt: cfg.get("t_ttt", hd.t_ttt)?,
        t_mg: cfg.get("t_mg", hd.t_mg)?,
        binding: cfg.get("ttt_binding", hd.binding)?,
    };
    Ok(Scenario {
        deployment: dep,
        antenna: ant,
        channel,
        handover,
        speed_kmh: cfg.get("speed_kmh", d.speed_kmh)?,
        h_uav: cfg.get("h_uav", d.h_uav)?,
        window_s: cfg.get("window_s", d.window_s)?,
        padding_km: cfg.get("padding_km", d.padding_km)?,
        core_km: cfg.get("core_km", d.core_km)?,
    })
}

/// Coefficient table from `coefficients=` or the bundled one.
pub fn coefficient_table(cfg: &Config) -> CliResult<CoefficientTable> {
    match cfg.path("coefficients") {
        None => Ok(CoefficientTable::bundled().clone()),
        Some(p) => {
            let f = std::fs::File::open(&p)
                .map_err(|e| config(format!("cannot open {}: {e}", p.display())))?;
            CoefficientTable::from_csv(f).map_err(|e| config(format!("{}: {e}", p.display())))
        }
    }
}

pub fn table_row(table: &CoefficientTable, t_mg: f64, t_ttt: f64, h_uav: f64, n_t: u32) -> CliResult<CoefficientRow> {
    Ok(*table.lookup(t_mg, t_ttt, h_uav, n_t)?)
}

/// Estimator for the single table row and density selected by `cfg`.
pub fn single_estimator(cfg: &Config) -> CliResult<EstimatorConfig> {
    let table = coefficient_table(cfg)?;
    let row = table_row(
        &table,
        cfg.get("t_mg", 40.0)?,
        cfg.get("t_ttt", 0.0)?,
        cfg.get("h_uav", 100.0)?,
        cfg.get("n_t", 8u32)?,
    )?;
    Ok(EstimatorConfig::from_row(
        &row,
        cfg.get("density", 1.0)?,
        cfg.get("window_s", 12.0)?,
    )?)
}
