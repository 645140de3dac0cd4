mod crlb;
mod estimate;
mod fit;
mod msd;
mod replay;
mod simulate;

use std::fs;
use std::path::{Path, PathBuf};

pub use crlb::cmd_crlb;
pub use estimate::cmd_estimate;
pub use fit::cmd_fit;
pub use msd::cmd_msd;
pub use replay::cmd_trace_replay;
pub use simulate::cmd_simulate;

use crate::config::Config;
use crate::error::{config, runtime, CliResult};

/// Inputs common to every subcommand after flag/config merging.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: Config,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub out: PathBuf,
}

impl RunOptions {
    pub fn new(config: Config, out: impl Into<PathBuf>) -> Self {
        Self {
            config,
            seed: None,
            runs: None,
            out: out.into(),
        }
    }

    /// `--seed` overrides `seed=`; defaults to 1.
    pub fn seed(&self) -> CliResult<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None => self.config.get("seed", 1u64),
        }
    }

    /// `--runs` overrides `runs=`; defaults to 2000.
    pub fn runs(&self) -> CliResult<usize> {
        let runs = match self.runs {
            Some(r) => r,
            None => self.config.get("runs", 2000usize)?,
        };
        if runs == 0 {
            return Err(config("runs must be at least 1"));
        }
        Ok(runs)
    }

    fn out_dir(&self) -> CliResult<&Path> {
        fs::create_dir_all(&self.out)
            .map_err(|e| runtime(format!("cannot create {}: {e}", self.out.display())))?;
        Ok(&self.out)
    }
}

fn create(dir: &Path, name: &str) -> CliResult<fs::File> {
    let path = dir.join(name);
    fs::File::create(&path).map_err(|e| runtime(format!("cannot create {}: {e}", path.display())))
}

fn open_input(path: &Path) -> CliResult<fs::File> {
    fs::File::open(path).map_err(|e| config(format!("cannot open {}: {e}", path.display())))
}

fn required_path(cfg: &Config, key: &str) -> CliResult<PathBuf> {
    cfg.path(key)
        .ok_or_else(|| config(format!("missing required key '{key}'")))
}
