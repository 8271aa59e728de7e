use crate::kv::{parse_bool, parse_kv, parse_value, FieldError, KvConfig, KvError};
use crate::policy::PolicyConfig;
use crate::sigproc::{BandpassSpec, FilterStage, Pipeline};

use super::TrainError;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub n_epoch: usize,
    pub n_iter: usize,
    pub lr: f64,
    pub seed: u64,
    pub kp_min: f64,
    pub kp_max: f64,
    pub cache_enabled: bool,
    /// Gain quantum of the evaluation cache.
    pub cache_resolution: f64,
    /// Length of the region before `act_time` that observation windows are
    /// drawn from, seconds.
    pub obs_window: f64,
    pub d_obs: usize,
    pub hidden: usize,
    pub bandpass: BandpassSpec,
    pub target_rate: f64,
    pub filter_stage: FilterStage,
    pub baseline_enabled: bool,
    /// Post-activation reward horizon, seconds.
    pub reward_window: f64,
    /// Fixed reward for diverged episodes; `None` derives it from the worst
    /// finite reward seen so far.
    pub divergence_penalty: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_epoch: 200,
            n_iter: 8,
            lr: 1e-3,
            seed: 7,
            kp_min: 0.5,
            kp_max: 4.0,
            cache_enabled: true,
            cache_resolution: 0.05,
            obs_window: 0.4,
            d_obs: 30,
            hidden: 64,
            bandpass: BandpassSpec::default(),
            target_rate: 100.0,
            filter_stage: FilterStage::PreDecimation,
            baseline_enabled: false,
            reward_window: 2.0,
            divergence_penalty: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.n_epoch == 0 || self.n_iter == 0 {
            return bad("n_epoch and n_iter must be at least 1".into());
        }
        if !(self.kp_min < self.kp_max) || !self.kp_min.is_finite() || !self.kp_max.is_finite() {
            return bad(format!(
                "need kp_min < kp_max, got {} / {}",
                self.kp_min, self.kp_max
            ));
        }
        if !(self.cache_resolution > 0.0 && self.cache_resolution.is_finite()) {
            return bad(format!("cache_resolution must be positive, got {}", self.cache_resolution));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.d_obs == 0 || self.hidden == 0 {
            return bad("d_obs and hidden must be at least 1".into());
        }
        let span = self.d_obs as f64 / self.target_rate;
        if !(self.obs_window >= span) {
            return bad(format!(
                "obs_window {} s is shorter than one {}-sample window ({span} s)",
                self.obs_window, self.d_obs
            ));
        }
        if !(self.reward_window > 0.0) {
            return bad(format!("reward_window must be positive, got {}", self.reward_window));
        }
        if let Some(p) = self.divergence_penalty {
            if !(p.is_finite() && p <= 0.0) {
                return bad(format!("divergence_penalty must be finite and <= 0, got {p}"));
            }
        }
        Ok(())
    }

    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            obs_dim: self.d_obs,
            hidden: self.hidden,
        }
    }

    pub fn pipeline(&self) -> Pipeline {
        Pipeline {
            bandpass: self.bandpass,
            target_rate: self.target_rate,
            stage: self.filter_stage,
        }
    }

    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut cfg = Self::default();
        cfg.apply_entries(&parse_kv(text)?)?;
        Ok(cfg)
    }
}

impl KvConfig for TrainConfig {
    fn set_field(&mut self, key: &str, value: &str) -> Result<(), FieldError> {
        match key {
            "n_epoch" => self.n_epoch = parse_value(value)?,
            "n_iter" => self.n_iter = parse_value(value)?,
            "lr" => self.lr = parse_value(value)?,
            "seed" => self.seed = parse_value(value)?,
            "kp_min" => self.kp_min = parse_value(value)?,
            "kp_max" => self.kp_max = parse_value(value)?,
            "cache_enabled" => self.cache_enabled = parse_bool(value)?,
            "cache_resolution" => self.cache_resolution = parse_value(value)?,
            "obs_window" => self.obs_window = parse_value(value)?,
            "d_obs" => self.d_obs = parse_value(value)?,
            "hidden" => self.hidden = parse_value(value)?,
            "bandpass_f_min" => self.bandpass.f_min = parse_value(value)?,
            "bandpass_f_max" => self.bandpass.f_max = parse_value(value)?,
            "bandpass_order" => self.bandpass.order = parse_value(value)?,
            "target_rate" => self.target_rate = parse_value(value)?,
            "filter_stage" => {
                self.filter_stage = value.parse().map_err(FieldError::Invalid)?;
            }
            "baseline_enabled" => self.baseline_enabled = parse_bool(value)?,
            "reward_window" => self.reward_window = parse_value(value)?,
            "divergence_penalty" => {
                self.divergence_penalty = match value {
                    "auto" => None,
                    v => Some(parse_value(v)?),
                };
            }
            _ => return Err(FieldError::Unknown),
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n_epoch", self.n_epoch.to_string()),
            ("n_iter", self.n_iter.to_string()),
            ("lr", self.lr.to_string()),
            ("seed", self.seed.to_string()),
            ("kp_min", self.kp_min.to_string()),
            ("kp_max", self.kp_max.to_string()),
            ("cache_enabled", self.cache_enabled.to_string()),
            ("cache_resolution", self.cache_resolution.to_string()),
            ("obs_window", self.obs_window.to_string()),
            ("d_obs", self.d_obs.to_string()),
            ("hidden", self.hidden.to_string()),
            ("bandpass_f_min", self.bandpass.f_min.to_string()),
            ("bandpass_f_max", self.bandpass.f_max.to_string()),
            ("bandpass_order", self.bandpass.order.to_string()),
            ("target_rate", self.target_rate.to_string()),
            ("filter_stage", self.filter_stage.as_str().to_string()),
            ("baseline_enabled", self.baseline_enabled.to_string()),
            ("reward_window", self.reward_window.to_string()),
            (
                "divergence_penalty",
                self.divergence_penalty
                    .map_or_else(|| "auto".to_string(), |p| p.to_string()),
            ),
        ]
    }
}
