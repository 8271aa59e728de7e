use super::{ParamSet, PolicyError, PolicyParameters, TENSOR_NAMES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam step that *ascends* along `grad`.
///
/// Returns the updated parameters; on a non-finite result the input is
/// left untouched and an error names the offending tensor.
pub fn adam_step(
    params: &PolicyParameters,
    grad: &ParamSet,
    lr: f64,
    adam: &AdamConfig,
) -> Result<PolicyParameters, PolicyError> {
    let mut next = params.clone();
    next.step_count += 1;
    let t = next.step_count as f64;
    let bc1 = 1.0 - adam.beta1.powf(t);
    let bc2 = 1.0 - adam.beta2.powf(t);
    let names = TENSOR_NAMES.iter();
    let tensors = next
        .weights
        .tensors_mut()
        .into_iter()
        .zip(next.adam_m.tensors_mut())
        .zip(next.adam_v.tensors_mut())
        .zip(grad.tensors());
    for (name, (((w, m), v), g)) in names.zip(tensors) {
        for i in 0..w.len() {
            let gi = g[i];
            m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * gi;
            v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            w[i] += lr * m_hat / (v_hat.sqrt() + adam.eps);
            if !(w[i].is_finite() && m[i].is_finite() && v[i].is_finite()) {
                return Err(PolicyError::NonFiniteUpdate(name));
            }
        }
    }
    Ok(next)
}
