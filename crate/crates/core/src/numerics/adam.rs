//! Adam optimizer with bias correction, operating on flat parameter
//! vectors. Networks describe their flat layout with [`ParamLayout`] so
//! numeric failures can name the offending parameter block.

use crate::error::{Error, Result};

/// Names for contiguous blocks of a flattened parameter vector.
#[derive(Debug, Clone, Default)]
pub struct ParamLayout {
    blocks: Vec<(String, std::ops::Range<usize>)>,
}

impl ParamLayout {
    pub fn new() -> Self {
        ParamLayout { blocks: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, len: usize) {
        let start = self.total_len();
        self.blocks.push((name.into(), start..start + len));
    }

    pub fn total_len(&self) -> usize {
        self.blocks.last().map_or(0, |(_, r)| r.end)
    }

    pub fn blocks(&self) -> &[(String, std::ops::Range<usize>)] {
        &self.blocks
    }

    /// Name of the block containing flat index `idx`.
    pub fn name_of(&self, idx: usize) -> &str {
        self.blocks
            .iter()
            .find(|(_, r)| r.contains(&idx))
            .map(|(n, _)| n.as_str())
            .unwrap_or("<unknown block>")
    }
}

/// Optimizer state: per-parameter moment accumulators plus hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    /// Defaults: beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
        }
    }

    pub fn param_count(&self) -> usize {
        self.first_moment.len()
    }
}

/// One Adam descent step: `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
///
/// Callers maximizing an objective pass the gradient of its negation.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    layout: &ParamLayout,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.param_count() {
        return Err(Error::shape(
            "adam_step",
            format!("{} parameters", state.param_count()),
            format!("{} params / {} grads", params.len(), grads.len()),
        ));
    }
    if !(state.learning_rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "adam_step requires learning_rate > 0 (got {})",
            state.learning_rate
        )));
    }
    if let Some(idx) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "gradient for parameter block '{}' (flat index {idx})",
            layout.name_of(idx)
        )));
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        state.second_moment[i] = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.first_moment[i] / bc1;
        let v_hat = state.second_moment[i] / bc2;
        params[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}
