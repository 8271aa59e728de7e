use crate::kv::{parse_kv, parse_value, FieldError, KvConfig, KvError};

use super::PlantError;

/// Surrogate grid configuration.
///
/// The damping of the 48 Hz dq-frame mode is an affine function of the
/// jointly applied outer-loop gain, anchored at `zeta_stable` for
/// `kp_stable` and zero at `kp_crit`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantScenario {
    /// Resonant mode frequency, Hz.
    pub f_osc: f64,
    pub kp_stable: f64,
    pub kp_unstable: f64,
    /// Gain at which the mode damping crosses zero.
    pub kp_crit: f64,
    /// Damping ratio at `kp_stable`.
    pub zeta_stable: f64,
    /// Operating point, per unit.
    pub p_nom: f64,
    /// Integration step, seconds.
    pub sim_dt: f64,
    pub horizon: f64,
    pub mistune_time: f64,
    pub act_time: f64,
    /// Process and measurement noise level, per unit.
    pub noise_std: f64,
    /// Initial mode excitation, per unit.
    pub disturbance_amp: f64,
}

impl Default for PlantScenario {
    fn default() -> Self {
        Self {
            f_osc: 48.0,
            kp_stable: 2.0,
            kp_unstable: 4.0,
            kp_crit: 3.0,
            zeta_stable: 0.002,
            p_nom: 1.0,
            sim_dt: 2e-4,
            horizon: 10.0,
            mistune_time: 1.0,
            act_time: 5.0,
            noise_std: 1e-4,
            disturbance_amp: 0.02,
        }
    }
}

impl PlantScenario {
    pub fn validate(&self) -> Result<(), PlantError> {
        self.validate_timeline()?;
        if self.act_time >= self.horizon {
            return Err(PlantError::InvalidScenario(format!(
                "need act_time < horizon, got {} / {}",
                self.act_time, self.horizon
            )));
        }
        Ok(())
    }

    /// [`validate`](Self::validate) without requiring `act_time < horizon`.
    pub fn validate_timeline(&self) -> Result<(), PlantError> {
        let bad = |msg: String| Err(PlantError::InvalidScenario(msg));
        let finite = [
            self.f_osc,
            self.kp_stable,
            self.kp_unstable,
            self.kp_crit,
            self.zeta_stable,
            self.p_nom,
            self.sim_dt,
            self.horizon,
            self.mistune_time,
            self.act_time,
            self.noise_std,
            self.disturbance_amp,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all scenario values must be finite".into());
        }
        if !(self.kp_stable < self.kp_crit && self.kp_crit < self.kp_unstable) {
            return bad(format!(
                "need kp_stable < kp_crit < kp_unstable, got {} / {} / {}",
                self.kp_stable, self.kp_crit, self.kp_unstable
            ));
        }
        if self.zeta_stable <= 0.0 {
            return bad(format!("zeta_stable must be positive, got {}", self.zeta_stable));
        }
        if self.f_osc <= 0.0 || self.sim_dt <= 0.0 {
            return bad("f_osc and sim_dt must be positive".into());
        }
        if !(self.mistune_time < self.act_time && self.horizon > 0.0) {
            return bad(format!(
                "need mistune_time < act_time and horizon > 0, got {} / {} / {}",
                self.mistune_time, self.act_time, self.horizon
            ));
        }
        if self.noise_std < 0.0 {
            return bad("noise_std must be non-negative".into());
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f_osc
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.sim_dt
    }

    /// Number of integration steps covering `t` seconds.
    pub fn steps_for(&self, t: f64) -> usize {
        (t / self.sim_dt).round().max(0.0) as usize
    }

    /// Scenario with noise switched off.
    pub fn noiseless(&self) -> Self {
        Self {
            noise_std: 0.0,
            ..self.clone()
        }
    }

    /// Parses a scenario file; every key must name a field.
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut scenario = Self::default();
        scenario.apply_entries(&parse_kv(text)?)?;
        Ok(scenario)
    }
}

impl KvConfig for PlantScenario {
    fn set_field(&mut self, key: &str, value: &str) -> Result<(), FieldError> {
        let slot = match key {
            "f_osc" => &mut self.f_osc,
            "kp_stable" => &mut self.kp_stable,
            "kp_unstable" => &mut self.kp_unstable,
            "kp_crit" => &mut self.kp_crit,
            "zeta_stable" => &mut self.zeta_stable,
            "p_nom" => &mut self.p_nom,
            "sim_dt" => &mut self.sim_dt,
            "horizon" => &mut self.horizon,
            "mistune_time" => &mut self.mistune_time,
            "act_time" => &mut self.act_time,
            "noise_std" => &mut self.noise_std,
            "disturbance_amp" => &mut self.disturbance_amp,
            _ => return Err(FieldError::Unknown),
        };
        *slot = parse_value(value)?;
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("f_osc", self.f_osc.to_string()),
            ("kp_stable", self.kp_stable.to_string()),
            ("kp_unstable", self.kp_unstable.to_string()),
            ("kp_crit", self.kp_crit.to_string()),
            ("zeta_stable", self.zeta_stable.to_string()),
            ("p_nom", self.p_nom.to_string()),
            ("sim_dt", self.sim_dt.to_string()),
            ("horizon", self.horizon.to_string()),
            ("mistune_time", self.mistune_time.to_string()),
            ("act_time", self.act_time.to_string()),
            ("noise_std", self.noise_std.to_string()),
            ("disturbance_amp", self.disturbance_amp.to_string()),
        ]
    }
}
