//! Gaussian MLP policy with hand-derived gradients.
//!
//! ```text
//! h1 = ReLU(W1 LN(o) + b1)
//! h2 = ReLU(W2 h1 + b2)
//! mu = w_mu . h2 + b_mu
//! var = softplus(w_var . h2 + b_var) + VAR_FLOOR
//! ```

mod adam;
mod checkpoint;
mod params;

pub use adam::{adam_step, AdamConfig};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use params::{ParamSet, PolicyConfig, PolicyParameters, TENSOR_NAMES};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::sigproc::Observation;

/// LayerNorm variance epsilon.
pub const LN_EPS: f64 = 1e-5;
/// Added to the softplus head so the variance never reaches zero.
pub const VAR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("observation has {found} values, policy expects {expected}")]
    ObservationLength { expected: usize, found: usize },
    #[error("observation contains a non-finite value at index {0}")]
    NonFiniteObservation(usize),
    #[error("empty gradient batch")]
    EmptyBatch,
    #[error("non-finite weight {0} in gradient batch")]
    NonFiniteWeight(f64),
    #[error("non-finite gradient in layer `{0}`")]
    NonFiniteGradient(&'static str),
    #[error("non-finite parameter update in `{0}`; parameters left unchanged")]
    NonFiniteUpdate(&'static str),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint dimension mismatch in `{tensor}`: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        tensor: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint i/o: {0}")]
    Io(String),
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    xhat: Vec<f64>,
    ln_out: Vec<f64>,
    inv_std: f64,
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
    raw_var: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub mu: f64,
    pub var: f64,
    pub cache: ForwardCache,
}

impl PolicyOutput {
    pub fn std(&self) -> f64 {
        self.var.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction {
    /// Sample before clamping.
    pub a: f64,
    pub log_prob: f64,
    pub epsilon: f64,
    pub mu: f64,
    pub var: f64,
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(i, bi)| {
            let row = &w[i * n_in..(i + 1) * n_in];
            bi + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn forward(params: &PolicyParameters, obs: &Observation) -> Result<PolicyOutput, PolicyError> {
    let cfg = &params.config;
    if obs.len() != cfg.obs_dim {
        return Err(PolicyError::ObservationLength {
            expected: cfg.obs_dim,
            found: obs.len(),
        });
    }
    if let Some(i) = obs.values.iter().position(|v| !v.is_finite()) {
        return Err(PolicyError::NonFiniteObservation(i));
    }
    let p = &params.weights;
    let n = cfg.obs_dim as f64;
    let mean = obs.values.iter().sum::<f64>() / n;
    let var = obs.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + LN_EPS).sqrt();
    let xhat: Vec<f64> = obs.values.iter().map(|v| (v - mean) * inv_std).collect();
    let ln_out: Vec<f64> = xhat
        .iter()
        .zip(p.ln_gain.iter().zip(&p.ln_bias))
        .map(|(x, (g, b))| g * x + b)
        .collect();
    let z1 = affine(&p.w1, &p.b1, &ln_out);
    let h1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
    let z2 = affine(&p.w2, &p.b2, &h1);
    let h2: Vec<f64> = z2.iter().map(|v| v.max(0.0)).collect();
    let mu = dot(&p.w_mu, &h2) + p.b_mu[0];
    let raw_var = dot(&p.w_var, &h2) + p.b_var[0];
    Ok(PolicyOutput {
        mu,
        var: softplus(raw_var) + VAR_FLOOR,
        cache: ForwardCache {
            xhat,
            ln_out,
            inv_std,
            z1,
            h1,
            z2,
            h2,
            raw_var,
        },
    })
}

fn gaussian_log_prob(a: f64, mu: f64, var: f64) -> f64 {
    -0.5 * ((a - mu) * (a - mu) / var + (2.0 * PI * var).ln())
}

/// Draws `a = mu + sqrt(var) * eps`, `eps ~ N(0, 1)`.
pub fn sample<R: Rng + ?Sized>(
    params: &PolicyParameters,
    obs: &Observation,
    rng: &mut R,
) -> Result<SampledAction, PolicyError> {
    let eps: f64 = rng.sample(StandardNormal);
    sample_with_epsilon(params, obs, eps)
}

/// Reparameterized sample with a caller-supplied noise draw.
pub fn sample_with_epsilon(
    params: &PolicyParameters,
    obs: &Observation,
    epsilon: f64,
) -> Result<SampledAction, PolicyError> {
    let out = forward(params, obs)?;
    let a = out.mu + out.std() * epsilon;
    Ok(SampledAction {
        a,
        log_prob: gaussian_log_prob(a, out.mu, out.var),
        epsilon,
        mu: out.mu,
        var: out.var,
    })
}

pub fn log_prob(params: &PolicyParameters, obs: &Observation, a: f64) -> Result<f64, PolicyError> {
    let out = forward(params, obs)?;
    Ok(gaussian_log_prob(a, out.mu, out.var))
}

/// Accumulates `weight * d log pi(a|o) / d theta` into `grad`.
fn accumulate_logprob_grad(
    params: &PolicyParameters,
    out: &PolicyOutput,
    a: f64,
    weight: f64,
    grad: &mut ParamSet,
) {
    let p = &params.weights;
    let c = &out.cache;
    let (o, h) = (params.config.obs_dim, params.config.hidden);
    let diff = a - out.mu;
    let d_mu = weight * diff / out.var;
    let d_var = weight * 0.5 * (diff * diff / (out.var * out.var) - 1.0 / out.var);
    let d_raw = d_var * sigmoid(c.raw_var);

    grad.b_mu[0] += d_mu;
    grad.b_var[0] += d_raw;
    let mut dz2 = vec![0.0; h];
    for i in 0..h {
        grad.w_mu[i] += d_mu * c.h2[i];
        grad.w_var[i] += d_raw * c.h2[i];
        if c.z2[i] > 0.0 {
            dz2[i] = d_mu * p.w_mu[i] + d_raw * p.w_var[i];
        }
    }
    let mut dh1 = vec![0.0; h];
    for i in 0..h {
        if dz2[i] == 0.0 {
            continue;
        }
        grad.b2[i] += dz2[i];
        let row = &p.w2[i * h..(i + 1) * h];
        let grow = &mut grad.w2[i * h..(i + 1) * h];
        for j in 0..h {
            grow[j] += dz2[i] * c.h1[j];
            dh1[j] += row[j] * dz2[i];
        }
    }
    let mut d_ln = vec![0.0; o];
    for i in 0..h {
        if c.z1[i] <= 0.0 || dh1[i] == 0.0 {
            continue;
        }
        let dz1 = dh1[i];
        grad.b1[i] += dz1;
        let row = &p.w1[i * o..(i + 1) * o];
        let grow = &mut grad.w1[i * o..(i + 1) * o];
        for j in 0..o {
            grow[j] += dz1 * c.ln_out[j];
            d_ln[j] += row[j] * dz1;
        }
    }
    for j in 0..o {
        grad.ln_gain[j] += d_ln[j] * c.xhat[j];
        grad.ln_bias[j] += d_ln[j];
    }
}

/// One entry of a policy-gradient batch.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample<'a> {
    pub obs: &'a Observation,
    pub action: f64,
    pub weight: f64,
}

/// `grad (1/n) sum_j weight_j * log pi(a_j | o_j)`.
pub fn grad_weighted_logprob(
    params: &PolicyParameters,
    batch: &[WeightedSample<'_>],
) -> Result<ParamSet, PolicyError> {
    if batch.is_empty() {
        return Err(PolicyError::EmptyBatch);
    }
    let mut grad = ParamSet::zeros(&params.config);
    for item in batch {
        if !item.weight.is_finite() {
            return Err(PolicyError::NonFiniteWeight(item.weight));
        }
        let out = forward(params, item.obs)?;
        accumulate_logprob_grad(params, &out, item.action, item.weight, &mut grad);
    }
    grad.scale(1.0 / batch.len() as f64);
    for (name, t) in TENSOR_NAMES.iter().zip(grad.tensors()) {
        if t.iter().any(|v| !v.is_finite()) {
            return Err(PolicyError::NonFiniteGradient(name));
        }
    }
    Ok(grad)
}
