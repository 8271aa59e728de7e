//! Episodic policy-gradient training against a plant environment.
//!
//! Each epoch simulates one pre-activation trace, draws `n_iter`
//! observation windows from it, samples and clamps a gain per window,
//! scores each gain by the negated post-activation oscillation energy and
//! takes one Adam ascent step on `mean(R * log pi)`.

mod cache;
mod config;
mod env;

pub use cache::{CacheEntry, EvalCache};
pub use config::TrainConfig;
pub use env::{EnvError, Environment, SurrogateEnv};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::plant::{EpisodeOutcome, PlantError, PlantScenario};
use crate::policy::{
    adam_step, forward, grad_weighted_logprob, sample, save_checkpoint, AdamConfig, PolicyError,
    PolicyParameters, WeightedSample,
};
use crate::sigproc::{
    extract_window, oscillation_energy, FilterStage, Observation, Pipeline, SignalError,
    SignalTrace,
};

/// CSV header of the per-epoch training log.
pub const LOG_HEADER: &str =
    "epoch,mean_reward,min_reward,max_reward,mean_action,mean_var,cache_hit_rate,clamp_rate";

/// Most negative reward ever assigned to a diverged episode.
pub const PENALTY_FLOOR: f64 = -1e6;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("epoch {epoch} aborted after {completed} completed epochs: {source}")]
    EpochAborted {
        epoch: usize,
        completed: usize,
        #[source]
        source: Box<TrainError>,
    },
}

const STREAM_INIT: u64 = 1;
const STREAM_SAMPLING: u64 = 2;
const STREAM_PRE: u64 = 3;
const STREAM_BUCKET: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for `(stream, index)` under a base seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream.wrapping_mul(0xD6E8_FEB8_6659_FD93) ^ splitmix64(index)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub obs: Observation,
    pub action_raw: f64,
    pub action_applied: f64,
    /// Gain actually simulated: the bucket representative.
    pub evaluated_kp: f64,
    pub log_prob: f64,
    pub mu: f64,
    pub var: f64,
    pub reward: f64,
    pub cached: bool,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_reward: f64,
    pub min_reward: f64,
    pub max_reward: f64,
    pub mean_action: f64,
    pub mean_var: f64,
    pub cache_hit_rate: f64,
    pub clamp_rate: f64,
}

impl EpochStats {
    pub fn from_records(epoch: usize, records: &[EpisodeRecord], kp_min: f64, kp_max: f64) -> Self {
        let n = records.len() as f64;
        let mean = |f: fn(&EpisodeRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        let rewards = records.iter().map(|r| r.reward);
        Self {
            epoch,
            mean_reward: mean(|r| r.reward),
            min_reward: rewards.clone().fold(f64::INFINITY, f64::min),
            max_reward: rewards.fold(f64::NEG_INFINITY, f64::max),
            mean_action: mean(|r| r.action_applied),
            mean_var: mean(|r| r.var),
            cache_hit_rate: records.iter().filter(|r| r.cached).count() as f64 / n,
            clamp_rate: records
                .iter()
                .filter(|r| r.action_raw < kp_min || r.action_raw > kp_max)
                .count() as f64
                / n,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.epoch,
            self.mean_reward,
            self.min_reward,
            self.max_reward,
            self.mean_action,
            self.mean_var,
            self.cache_hit_rate,
            self.clamp_rate
        )
    }
}

/// Renders stats as the training-log CSV, header included.
pub fn log_csv(stats: &[EpochStats]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for s in stats {
        out.push_str(&s.csv_row());
        out.push('\n');
    }
    out
}

/// Tracks the worst finite reward to scale the divergence penalty.
#[derive(Debug, Clone, Copy)]
struct Penalty {
    fixed: Option<f64>,
    worst_finite: Option<f64>,
}

impl Penalty {
    fn observe(&mut self, reward: f64) {
        self.worst_finite = Some(self.worst_finite.map_or(reward, |w| w.min(reward)));
    }

    fn value(&self) -> f64 {
        self.fixed.unwrap_or_else(|| match self.worst_finite {
            Some(w) => (10.0 * w).max(PENALTY_FLOOR),
            None => PENALTY_FLOOR,
        })
    }
}

/// Negated oscillation energy of `processed` over `[act_time, act_time + window]`,
/// or `None` when the trace does not cover the window.
pub fn post_activation_reward(
    processed: &SignalTrace,
    scenario: &PlantScenario,
    window: f64,
) -> Result<Option<f64>, SignalError> {
    let end = scenario.act_time + window;
    let last = processed.t0() + processed.duration();
    if last + 1e-9 < end {
        return Ok(None);
    }
    let slice = processed.slice_time(scenario.act_time, end)?;
    let energy = oscillation_energy(&slice, 0.0, window.min(slice.duration()))?;
    Ok(Some(-energy))
}

fn pre_activation_scenario(scenario: &PlantScenario) -> PlantScenario {
    PlantScenario {
        horizon: scenario.act_time,
        ..scenario.clone()
    }
}

fn check_compatible(scenario: &PlantScenario, config: &TrainConfig) -> Result<(), TrainError> {
    scenario.validate()?;
    config.validate()?;
    if config.filter_stage == FilterStage::PreDecimation {
        config.bandpass.validate(scenario.sample_rate())?;
    }
    let last_sample = scenario.horizon - 1.0 / config.target_rate;
    if scenario.act_time + config.reward_window > last_sample + 1e-9 {
        return Err(TrainError::InvalidConfig(format!(
            "reward window [{}, {}] s runs past the last processed sample at {last_sample} s",
            scenario.act_time,
            scenario.act_time + config.reward_window
        )));
    }
    if config.obs_window > scenario.act_time {
        return Err(TrainError::InvalidConfig(format!(
            "obs_window {} s is longer than the pre-activation segment",
            config.obs_window
        )));
    }
    Ok(())
}

/// Runs an episode, retrying once after a transient failure.
fn call_env<E: Environment + ?Sized>(
    env: &mut E,
    scenario: &PlantScenario,
    kp: f64,
    seed: u64,
) -> Result<EpisodeOutcome, EnvError> {
    match env.run_episode(scenario, kp, seed) {
        Err(e) if e.is_transient() => {
            log::warn!("environment call failed ({e}); retrying once");
            env.run_episode(scenario, kp, seed)
        }
        other => other,
    }
}

/// Training state that persists across epochs.
pub struct Trainer<E: Environment> {
    env: E,
    scenario: PlantScenario,
    config: TrainConfig,
    pipeline: Pipeline,
    cache: EvalCache,
    rng: ChaCha8Rng,
    penalty: Penalty,
    evaluations: usize,
    adam: AdamConfig,
}

impl<E: Environment> Trainer<E> {
    pub fn new(env: E, scenario: PlantScenario, config: TrainConfig) -> Result<Self, TrainError> {
        check_compatible(&scenario, &config)?;
        Ok(Self {
            env,
            pipeline: config.pipeline(),
            cache: EvalCache::new(config.cache_resolution, config.cache_enabled),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_SAMPLING, 0)),
            penalty: Penalty {
                fixed: config.divergence_penalty,
                worst_finite: None,
            },
            evaluations: 0,
            adam: AdamConfig::default(),
            scenario,
            config,
        })
    }

    /// Initial policy for this config's seed.
    pub fn initial_policy(&self) -> PolicyParameters {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, STREAM_INIT, 0));
        PolicyParameters::init(self.config.policy_config(), &mut rng)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn scenario(&self) -> &PlantScenario {
        &self.scenario
    }

    pub fn cache(&self) -> &EvalCache {
        &self.cache
    }

    /// Plant runs issued so far, pre-activation traces included.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn into_env(self) -> E {
        self.env
    }

    fn run(&mut self, scenario: &PlantScenario, kp: f64, seed: u64) -> Result<EpisodeOutcome, TrainError> {
        let out = call_env(&mut self.env, scenario, kp, seed)?;
        self.evaluations += 1;
        Ok(out)
    }

    /// Filtered, decimated pre-activation trace for `epoch`.
    pub fn pre_activation(&mut self, epoch: usize) -> Result<SignalTrace, TrainError> {
        let scenario = pre_activation_scenario(&self.scenario);
        let seed = derive_seed(self.config.seed, STREAM_PRE, epoch as u64);
        let out = self.run(&scenario, self.scenario.kp_stable, seed)?;
        if let Some(t) = out.diverged_at {
            return Err(PlantError::Diverged { t }.into());
        }
        Ok(self.pipeline.process(&out.trace)?)
    }

    /// Random window from the observation region ending before `act_time`.
    pub fn draw_observation(&mut self, processed: &SignalTrace) -> Result<Observation, TrainError> {
        let latest = self.scenario.act_time - self.config.d_obs as f64 / self.config.target_rate;
        let earliest = self.scenario.act_time - self.config.obs_window;
        let start = if latest > earliest {
            self.rng.random_range(earliest..=latest)
        } else {
            earliest
        };
        Ok(extract_window(processed, start, self.config.d_obs)?)
    }

    /// Reward of the bucket containing `kp`, simulating only on a cache miss.
    /// Returns `(reward, representative gain, cached, diverged)`.
    pub fn evaluate_gain(&mut self, kp: f64) -> Result<(f64, f64, bool, bool), TrainError> {
        let bucket = self.cache.bucket(kp);
        let rep = self.cache.representative(bucket);
        if let Some(hit) = self.cache.lookup(bucket) {
            return Ok((hit.reward, rep, true, hit.diverged));
        }
        let seed = derive_seed(self.config.seed, STREAM_BUCKET, bucket as u64);
        let scenario = self.scenario.clone();
        let out = self.run(&scenario, rep, seed)?;
        let processed = if out.trace.len() > 1 {
            self.pipeline.process(&out.trace).ok()
        } else {
            None
        };
        let finite = match (&processed, out.diverged_at) {
            (Some(p), None) => post_activation_reward(p, &self.scenario, self.config.reward_window)?
                .filter(|r| r.is_finite()),
            _ => None,
        };
        let (reward, diverged) = match finite {
            Some(r) => {
                self.penalty.observe(r);
                (r, false)
            }
            None => {
                let p = self.penalty.value();
                log::warn!("episode at kp = {rep} diverged; reward set to {p}");
                (p, true)
            }
        };
        let trace = Arc::new(processed.unwrap_or(out.trace));
        self.cache.insert(bucket, reward, trace, diverged);
        Ok((reward, rep, false, diverged))
    }

    pub fn run_iteration(
        &mut self,
        policy: &PolicyParameters,
        processed: &SignalTrace,
    ) -> Result<EpisodeRecord, TrainError> {
        let obs = self.draw_observation(processed)?;
        let s = sample(policy, &obs, &mut self.rng)?;
        let applied = s.a.max(self.config.kp_min).min(self.config.kp_max);
        let (reward, evaluated_kp, cached, diverged) = self.evaluate_gain(applied)?;
        Ok(EpisodeRecord {
            obs,
            action_raw: s.a,
            action_applied: applied,
            evaluated_kp,
            log_prob: s.log_prob,
            mu: s.mu,
            var: s.var,
            reward,
            cached,
            diverged,
        })
    }

    /// One Adam ascent step on `mean(w_j log pi(a_j | o_j))`, with `w_j`
    /// the reward or, when the baseline is on, the reward minus its mean.
    pub fn policy_update(
        &self,
        policy: &PolicyParameters,
        records: &[EpisodeRecord],
    ) -> Result<PolicyParameters, TrainError> {
        let baseline = if self.config.baseline_enabled {
            records.iter().map(|r| r.reward).sum::<f64>() / records.len() as f64
        } else {
            0.0
        };
        let batch: Vec<WeightedSample> = records
            .iter()
            .map(|r| WeightedSample {
                obs: &r.obs,
                action: r.action_raw,
                weight: r.reward - baseline,
            })
            .collect();
        let grad = grad_weighted_logprob(policy, &batch)?;
        Ok(adam_step(policy, &grad, self.config.lr, &self.adam)?)
    }

    /// Runs `n_iter` iterations and one update. On error the caller keeps
    /// the input policy.
    pub fn run_epoch(
        &mut self,
        policy: &PolicyParameters,
        epoch: usize,
    ) -> Result<(PolicyParameters, EpochStats, Vec<EpisodeRecord>), TrainError> {
        let processed = self.pre_activation(epoch)?;
        let mut records = Vec::with_capacity(self.config.n_iter);
        for _ in 0..self.config.n_iter {
            records.push(self.run_iteration(policy, &processed)?);
        }
        let next = self.policy_update(policy, &records)?;
        let stats = EpochStats::from_records(epoch, &records, self.config.kp_min, self.config.kp_max);
        Ok((next, stats, records))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: PolicyParameters,
    pub best_reward: f64,
    pub best_epoch: usize,
    /// Every improved `R*`, in save order.
    pub best_history: Vec<f64>,
    pub last: PolicyParameters,
    pub stats: Vec<EpochStats>,
    pub evaluations: usize,
    pub distinct_buckets: usize,
}

struct RunFiles {
    log: BufWriter<File>,
    dir: std::path::PathBuf,
}

/// Full training run. With `run_dir`, writes `train_log.csv` (flushed each
/// epoch), `best.ckpt` on every improvement and `last.ckpt` at the end.
pub fn train<E: Environment>(
    env: E,
    scenario: &PlantScenario,
    config: &TrainConfig,
    run_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    let mut trainer = Trainer::new(env, scenario.clone(), config.clone())?;
    let mut files = match run_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut log = BufWriter::new(File::create(dir.join("train_log.csv"))?);
            writeln!(log, "{LOG_HEADER}")?;
            log.flush()?;
            Some(RunFiles {
                log,
                dir: dir.to_path_buf(),
            })
        }
        None => None,
    };
    let mut policy = trainer.initial_policy();
    let mut best = policy.clone();
    let mut best_reward = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_history = Vec::new();
    let mut stats = Vec::with_capacity(config.n_epoch);
    let mut buckets = std::collections::HashSet::new();
    for epoch in 0..config.n_epoch {
        let (next, row, records) = match trainer.run_epoch(&policy, epoch) {
            Ok(v) => v,
            Err(e) => {
                log::error!("epoch {epoch} aborted: {e}");
                return Err(TrainError::EpochAborted {
                    epoch,
                    completed: stats.len(),
                    source: Box::new(e),
                });
            }
        };
        for r in &records {
            buckets.insert(trainer.cache.bucket(r.action_applied));
        }
        if let Some(f) = files.as_mut() {
            writeln!(f.log, "{}", row.csv_row())?;
            f.log.flush()?;
        }
        log::info!(
            "epoch {epoch}: mean reward {:.6e}, mean action {:.4}, hit rate {:.2}",
            row.mean_reward,
            row.mean_action,
            row.cache_hit_rate
        );
        if row.mean_reward > best_reward {
            best_reward = row.mean_reward;
            best_epoch = epoch;
            best = policy.clone();
            best_history.push(best_reward);
            if let Some(f) = files.as_ref() {
                save_checkpoint(&best, f.dir.join("best.ckpt"))?;
            }
        }
        stats.push(row);
        policy = next;
    }
    if let Some(f) = files.as_ref() {
        save_checkpoint(&policy, f.dir.join("last.ckpt"))?;
    }
    Ok(TrainOutcome {
        best,
        best_reward,
        best_epoch,
        best_history,
        last: policy,
        stats,
        evaluations: trainer.evaluations(),
        distinct_buckets: buckets.len(),
    })
}

/// Observation the policy sees at inference: the window starting exactly
/// `obs_window` before activation, from a pre-activation run at `seed`.
pub fn canonical_observation<E: Environment + ?Sized>(
    env: &mut E,
    scenario: &PlantScenario,
    config: &TrainConfig,
    seed: u64,
) -> Result<Observation, TrainError> {
    check_compatible(scenario, config)?;
    let out = call_env(env, &pre_activation_scenario(scenario), scenario.kp_stable, seed)?;
    if let Some(t) = out.diverged_at {
        return Err(PlantError::Diverged { t }.into());
    }
    let processed = config.pipeline().process(&out.trace)?;
    Ok(extract_window(
        &processed,
        scenario.act_time - config.obs_window,
        config.d_obs,
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MitigationReport {
    pub seed: u64,
    pub mu: f64,
    pub var: f64,
    pub applied_gain: f64,
    pub window_start: f64,
    /// Filtered-signal energy over `[mistune_time, act_time]`.
    pub pre_energy: f64,
    /// Over `[act_time, horizon]`; infinite when the episode diverged.
    pub post_energy: f64,
    /// Same window, gain left at `kp_unstable`.
    pub unmitigated_post_energy: f64,
    /// `post_energy / unmitigated_post_energy`.
    pub mitigation_ratio: f64,
    /// `post_energy / pre_energy`.
    pub post_to_pre_ratio: f64,
    pub diverged_at: Option<f64>,
    pub unmitigated_diverged_at: Option<f64>,
}

impl MitigationReport {
    pub fn to_kv_string(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |t| t.to_string());
        let rows = [
            ("seed", self.seed.to_string()),
            ("mu", self.mu.to_string()),
            ("var", self.var.to_string()),
            ("applied_gain", self.applied_gain.to_string()),
            ("window_start", self.window_start.to_string()),
            ("pre_energy", self.pre_energy.to_string()),
            ("post_energy", self.post_energy.to_string()),
            ("unmitigated_post_energy", self.unmitigated_post_energy.to_string()),
            ("mitigation_ratio", self.mitigation_ratio.to_string()),
            ("post_to_pre_ratio", self.post_to_pre_ratio.to_string()),
            ("diverged_at", opt(self.diverged_at)),
            ("unmitigated_diverged_at", opt(self.unmitigated_diverged_at)),
        ];
        rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MitigationReport,
    /// Raw episode at the applied gain.
    pub trace: SignalTrace,
    /// Raw episode at `kp_unstable`.
    pub unmitigated_trace: SignalTrace,
}

fn window_energy(processed: &SignalTrace, start: f64, end: f64) -> Result<f64, SignalError> {
    let slice = processed.slice_time(start, end)?;
    oscillation_energy(&slice, 0.0, slice.duration())
}

/// One deterministic episode at `clamp(mu)` on the canonical observation,
/// compared against the unmitigated episode at the same seed.
pub fn evaluate<E: Environment + ?Sized>(
    env: &mut E,
    policy: &PolicyParameters,
    scenario: &PlantScenario,
    config: &TrainConfig,
    seed: u64,
) -> Result<Evaluation, TrainError> {
    let obs = canonical_observation(env, scenario, config, seed)?;
    let out = forward(policy, &obs)?;
    let applied = out.mu.max(config.kp_min).min(config.kp_max);
    let pipeline = config.pipeline();
    let post_energy_of = |ep: &EpisodeOutcome| -> Result<f64, TrainError> {
        if ep.diverged_at.is_some() {
            return Ok(f64::INFINITY);
        }
        let p = pipeline.process(&ep.trace)?;
        Ok(window_energy(&p, scenario.act_time, scenario.horizon)?)
    };
    let unmitigated = call_env(env, scenario, scenario.kp_unstable, seed)?;
    let episode = call_env(env, scenario, applied, seed)?;
    // Samples before activation are independent of the applied gain.
    let pre_src = if episode.diverged_at.is_none() { &episode } else { &unmitigated };
    let pre_energy = window_energy(
        &pipeline.process(&pre_src.trace)?,
        scenario.mistune_time,
        scenario.act_time,
    )?;
    let post_energy = post_energy_of(&episode)?;
    let unmitigated_post_energy = post_energy_of(&unmitigated)?;
    let report = MitigationReport {
        seed,
        mu: out.mu,
        var: out.var,
        applied_gain: applied,
        window_start: obs.window_start,
        pre_energy,
        post_energy,
        unmitigated_post_energy,
        mitigation_ratio: post_energy / unmitigated_post_energy,
        post_to_pre_ratio: post_energy / pre_energy,
        diverged_at: episode.diverged_at,
        unmitigated_diverged_at: unmitigated.diverged_at,
    };
    Ok(Evaluation {
        report,
        trace: episode.trace,
        unmitigated_trace: unmitigated.trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePoint {
    pub kp: f64,
    pub reward: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSweep {
    pub points: Vec<OraclePoint>,
    pub best_kp: f64,
    pub best_reward: f64,
    /// Whether the maximum is attained by exactly one bucket.
    pub unique: bool,
}

impl OracleSweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kp,reward,diverged\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.kp, p.reward, p.diverged));
        }
        out
    }
}

/// Exhaustive zero-noise sweep over every bucket representative in
/// `[kp_min, kp_max]`.
pub fn grid_search<E: Environment + ?Sized>(
    env: &mut E,
    scenario: &PlantScenario,
    config: &TrainConfig,
) -> Result<OracleSweep, TrainError> {
    check_compatible(scenario, config)?;
    let quiet = scenario.noiseless();
    let pipeline = config.pipeline();
    let res = config.cache_resolution;
    let first = (config.kp_min / res - 1e-9).ceil() as i64;
    let last = (config.kp_max / res + 1e-9).floor() as i64;
    let mut penalty = Penalty {
        fixed: config.divergence_penalty,
        worst_finite: None,
    };
    let mut raw = Vec::new();
    for b in first..=last {
        let kp = b as f64 * res;
        let ep = call_env(env, &quiet, kp, config.seed)?;
        let reward = match ep.diverged_at {
            None => post_activation_reward(&pipeline.process(&ep.trace)?, &quiet, config.reward_window)?,
            Some(_) => None,
        };
        if let Some(r) = reward {
            penalty.observe(r);
        }
        raw.push((kp, reward));
    }
    let points: Vec<OraclePoint> = raw
        .into_iter()
        .map(|(kp, r)| OraclePoint {
            kp,
            reward: r.unwrap_or_else(|| penalty.value()),
            diverged: r.is_none(),
        })
        .collect();
    let best = points
        .iter()
        .cloned()
        .reduce(|a, b| if b.reward > a.reward { b } else { a })
        .ok_or_else(|| TrainError::InvalidConfig("no gain bucket inside [kp_min, kp_max]".into()))?;
    let ties = points.iter().filter(|p| p.reward == best.reward).count();
    Ok(OracleSweep {
        best_kp: best.kp,
        best_reward: best.reward,
        unique: ties == 1,
        points,
    })
}
