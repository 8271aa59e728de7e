use thiserror::Error;

use crate::plant::{run_episode, EpisodeOutcome, GainAction, PlantError, PlantScenario};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    /// Connection-level failure; the call may succeed if retried.
    #[error("connection error: {0}")]
    Connection(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("remote error [{code}]: {message}")]
    Remote { code: String, message: String },
}

impl EnvError {
    pub fn is_transient(&self) -> bool {
        matches!(self, EnvError::Connection(_))
    }
}

/// What the trainer needs from a plant: full open-loop episodes.
///
/// `scenario.horizon` may stop before `act_time` to request only the
/// pre-activation segment.
pub trait Environment {
    fn run_episode(
        &mut self,
        scenario: &PlantScenario,
        kp: f64,
        seed: u64,
    ) -> Result<EpisodeOutcome, EnvError>;
}

/// The in-process surrogate plant.
#[derive(Debug, Clone, Copy, Default)]
pub struct SurrogateEnv;

impl Environment for SurrogateEnv {
    fn run_episode(
        &mut self,
        scenario: &PlantScenario,
        kp: f64,
        seed: u64,
    ) -> Result<EpisodeOutcome, EnvError> {
        Ok(run_episode(scenario, GainAction::new(kp), seed)?)
    }
}

impl<E: Environment + ?Sized> Environment for &mut E {
    fn run_episode(
        &mut self,
        scenario: &PlantScenario,
        kp: f64,
        seed: u64,
    ) -> Result<EpisodeOutcome, EnvError> {
        (**self).run_episode(scenario, kp, seed)
    }
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn run_episode(
        &mut self,
        scenario: &PlantScenario,
        kp: f64,
        seed: u64,
    ) -> Result<EpisodeOutcome, EnvError> {
        (**self).run_episode(scenario, kp, seed)
    }
}
