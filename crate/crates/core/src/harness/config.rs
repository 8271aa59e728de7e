use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::kv::{parse_kv, FieldError, KvConfig, KvError};
use crate::plant::PlantScenario;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Train,
    Evaluate,
    Simulate,
    Serve,
    Oracle,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Train => "train",
            Mode::Evaluate => "evaluate",
            Mode::Simulate => "simulate",
            Mode::Serve => "serve",
            Mode::Oracle => "oracle",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "train" => Mode::Train,
            "evaluate" => Mode::Evaluate,
            "simulate" => Mode::Simulate,
            "serve" => Mode::Serve,
            "oracle" => Mode::Oracle,
            other => return Err(format!("unknown mode `{other}`")),
        })
    }
}

/// Where episodes are simulated.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum EnvSpec {
    #[default]
    Local,
    /// `remote:HOST:PORT`
    Remote(String),
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvSpec::Local => write!(f, "local"),
            EnvSpec::Remote(addr) => write!(f, "remote:{addr}"),
        }
    }
}

impl FromStr for EnvSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "local" {
            return Ok(EnvSpec::Local);
        }
        match s.strip_prefix("remote:") {
            Some(addr) if addr.rsplit_once(':').is_some_and(|(h, p)| !h.is_empty() && p.parse::<u16>().is_ok()) => {
                Ok(EnvSpec::Remote(addr.to_string()))
            }
            _ => Err(format!("expected `local` or `remote:HOST:PORT`, got `{s}`")),
        }
    }
}

/// Everything a run needs, resolved from a config file plus overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: PlantScenario,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    pub mode: Mode,
    pub env: EnvSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: PlantScenario::default(),
            train: TrainConfig::default(),
            out_dir: PathBuf::from("runs/latest"),
            mode: Mode::Train,
            env: EnvSpec::Local,
        }
    }
}

/// Short flag names accepted in place of field names.
pub fn canonical_key(key: &str) -> &str {
    match key {
        "epochs" => "n_epoch",
        "iters" => "n_iter",
        "out" => "out_dir",
        other => other,
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut cfg = Self::default();
        cfg.apply_entries(&parse_kv(text)?)?;
        Ok(cfg)
    }

    /// Applies a command-line override; errors read like config-file errors.
    pub fn set_override(&mut self, key: &str, value: &str) -> Result<(), String> {
        let key = canonical_key(key);
        self.set_field(key, value).map_err(|e| match e {
            FieldError::Unknown => format!("unknown key `{key}`"),
            FieldError::Invalid(msg) => format!("bad value for `{key}`: {msg}"),
        })
    }
}

impl KvConfig for RunConfig {
    fn set_field(&mut self, key: &str, value: &str) -> Result<(), FieldError> {
        match key {
            "out_dir" => self.out_dir = PathBuf::from(value),
            "mode" => self.mode = value.parse().map_err(FieldError::Invalid)?,
            "env" => self.env = value.parse().map_err(FieldError::Invalid)?,
            _ => match self.scenario.set_field(key, value) {
                Err(FieldError::Unknown) => self.train.set_field(key, value)?,
                other => other?,
            },
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("mode", self.mode.as_str().to_string()),
            ("env", self.env.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
        ];
        out.extend(self.scenario.entries());
        out.extend(self.train.entries());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set_override("kp_max", "3.5").unwrap();
        cfg.set_override("epochs", "10").unwrap();
        cfg.set_override("env", "remote:127.0.0.1:4100").unwrap();
        cfg.set_override("zeta_stable", "0.01").unwrap();
        let text = cfg.to_kv_string();
        assert!(text.contains("kp_max = 3.5\n"));
        assert!(text.contains("n_epoch = 10\n"));
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RunConfig::parse("n_epoch = 5\n\nkp_min = abc\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("kp_min"));
        let err = RunConfig::parse("bogus = 1\n").unwrap_err();
        assert_eq!(err.to_string(), "line 1: unknown key `bogus`");
    }

    #[test]
    fn env_spec_syntax() {
        assert_eq!("local".parse::<EnvSpec>().unwrap(), EnvSpec::Local);
        assert_eq!(
            "remote:localhost:9000".parse::<EnvSpec>().unwrap(),
            EnvSpec::Remote("localhost:9000".into())
        );
        for bad in ["remote:", "remote:host", "remote::80", "tcp:1:2"] {
            assert!(bad.parse::<EnvSpec>().is_err(), "{bad}");
        }
    }
}
