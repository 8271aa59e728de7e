//! Run configuration, run-directory artifacts and the environment
//! protocol (server and client).

mod client;
mod config;
pub mod protocol;
mod server;

pub use client::RemoteEnv;
pub use config::{canonical_key, EnvSpec, Mode, RunConfig};
pub use server::{spawn_server, ServerConfig, ServerHandle, Session};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::kv::{KvConfig, KvError};
use crate::plant::{run_episode, GainAction, PlantError, PlantScenario};
use crate::policy::PolicyError;
use crate::sigproc::{downsample, Pipeline, SignalError, SignalTrace};
use crate::trainer::{EnvError, Environment, SurrogateEnv, TrainError};

pub const CONFIG_SNAPSHOT: &str = "config.cfg";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const DIVERGENCE_NOTE: &str = "divergence.txt";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: KvError },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Loads a run config file.
pub fn load_run_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::parse(&text).map_err(|source| HarnessError::Config {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the resolved config into `dir/config.cfg`.
pub fn write_config_snapshot(dir: &Path, config: &RunConfig) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(CONFIG_SNAPSHOT);
    std::fs::write(&path, config.to_kv_string())?;
    Ok(path)
}

/// Opens the environment named by `spec`.
pub fn open_env(spec: &EnvSpec) -> Result<Box<dyn Environment>, HarnessError> {
    Ok(match spec {
        EnvSpec::Local => Box::new(SurrogateEnv),
        EnvSpec::Remote(addr) => Box::new(RemoteEnv::connect(addr)?),
    })
}

pub fn write_trace_csv(path: &Path, trace: &SignalTrace) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path)?);
    trace.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub raw: SignalTrace,
    pub decimated: SignalTrace,
    pub filtered: SignalTrace,
    pub diverged_at: Option<f64>,
}

/// One open-loop episode at `kp` plus its decimated and filtered versions.
pub fn simulate(
    scenario: &PlantScenario,
    pipeline: &Pipeline,
    kp: f64,
    seed: u64,
) -> Result<Simulation, HarnessError> {
    if !kp.is_finite() {
        return Err(HarnessError::Invalid(format!("kp must be finite, got {kp}")));
    }
    let out = run_episode(scenario, GainAction::new(kp), seed)?;
    let decimated = downsample(&out.trace, pipeline.target_rate)?;
    let filtered = pipeline.process(&out.trace)?;
    Ok(Simulation {
        raw: out.trace,
        decimated,
        filtered,
        diverged_at: out.diverged_at,
    })
}

impl Simulation {
    /// Writes `raw.csv`, `decimated.csv`, `filtered.csv` and, for a
    /// diverged run, `divergence.txt`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        write_trace_csv(&dir.join("raw.csv"), &self.raw)?;
        write_trace_csv(&dir.join("decimated.csv"), &self.decimated)?;
        write_trace_csv(&dir.join("filtered.csv"), &self.filtered)?;
        let note = dir.join(DIVERGENCE_NOTE);
        match self.diverged_at {
            Some(t) => std::fs::write(
                note,
                format!(
                    "diverged_at = {t}\nraw_samples = {}\nnote = trace truncated at divergence\n",
                    self.raw.len()
                ),
            )?,
            None if note.exists() => std::fs::remove_file(note)?,
            None => {}
        }
        Ok(())
    }
}
