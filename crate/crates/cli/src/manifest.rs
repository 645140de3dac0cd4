use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::Config;
use crate::error::{runtime, CliResult};

/// Extra `key=value` lines describing what a command resolved.
pub type Resolved = Vec<(String, String)>;

pub fn write_manifest(
    out: &Path,
    command: &str,
    cfg: &Config,
    resolved: &Resolved,
) -> CliResult<()> {
    let ts = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut text = String::new();
    text.push_str(&format!("tool={}\n", env!("CARGO_PKG_NAME")));
    text.push_str(&format!("version={}\n", env!("CARGO_PKG_VERSION")));
    text.push_str(&format!("command={command}\n"));
    text.push_str(&format!("timestamp_unix={ts}\n"));
    for (k, v) in cfg.entries() {
        text.push_str(&format!("config.{k}={v}\n"));
    }
    for (k, v) in resolved {
        text.push_str(&format!("{k}={v}\n"));
    }
    let path = out.join("manifest.txt");
    let mut f = fs::File::create(&path)
        .map_err(|e| runtime(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(text.as_bytes())
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}
