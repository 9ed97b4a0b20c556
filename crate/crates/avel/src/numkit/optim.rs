//! Bias-corrected adaptive-moment parameter updates.

use crate::error::{Error, Result};

/// State of the adaptive-moment optimizer for one flat parameter vector.
///
/// The first/second-moment accumulators have the same length as the
/// parameters; the step count increases by exactly one per update.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(param_len: usize, learning_rate: f64) -> Self {
        OptimizerState {
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; param_len],
            v: vec![0.0; param_len],
        }
    }
}

/// One bias-corrected update step:
///
/// ```text
/// m <- b1*m + (1-b1)*g          m_hat = m / (1 - b1^t)
/// v <- b2*v + (1-b2)*g^2        v_hat = v / (1 - b2^t)
/// p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// ```
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Dim(format!(
            "adam: params {} / grads {} / state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient coordinate {i}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}
