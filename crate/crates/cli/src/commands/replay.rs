use hoc_core::handover::{replay_trace, write_event_log, HandoverConfig, RsrpTrace};

use super::{create, open_input, required_path, RunOptions};
use crate::error::{config, CliResult};
use crate::manifest::write_manifest;

const KEYS: &[&str] = &["trace", "m_hyst", "t_ttt", "t_mg", "ttt_binding"];

/// Replays a recorded RSRP trace and writes `events.csv`.
pub fn cmd_trace_replay(opts: &RunOptions) -> CliResult<()> {
    let cfg = &opts.config;
    cfg.check_keys(&[KEYS])?;
    let d = HandoverConfig::default();
    let hcfg = HandoverConfig {
        m_hyst: cfg.get("m_hyst", d.m_hyst)?,
        t_ttt: cfg.get("t_ttt", d.t_ttt)?,
        t_mg: cfg.get("t_mg", d.t_mg)?,
        binding: cfg.get("ttt_binding", d.binding)?,
    };
    hcfg.validate()?;
    let path = required_path(cfg, "trace")?;
    let trace = RsrpTrace::from_csv(open_input(&path)?)
        .map_err(|e| config(format!("{}: {e}", path.display())))?;
    let log = replay_trace(&trace, &hcfg)?;
    let out = opts.out_dir()?;
    write_event_log(&log, create(out, "events.csv")?)?;
    write_manifest(out, "trace-replay", cfg, &Vec::new())
}
