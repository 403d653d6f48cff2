//! Adam with bias-corrected moments.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Result};
use crate::grad::Gradients;
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates over the flattened parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &ModelParams, config: AdamConfig) -> Self {
        let n = params.num_scalars();
        Self {
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            step_count: 0,
            config,
        }
    }
}

/// One Adam update of `params` in place.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    let grad_slices = grads.slices();
    let mut param_slices = params.slices_mut();
    let n: usize = param_slices.iter().map(|s| s.len()).sum();
    let shapes_match = grad_slices.len() == param_slices.len()
        && grad_slices
            .iter()
            .zip(&param_slices)
            .all(|(g, p)| g.len() == p.len());
    if !shapes_match || state.first_moment.len() != n || state.second_moment.len() != n {
        return Err(shape_err(
            "adam_step",
            format!("{n} parameters vs {} moment entries", state.first_moment.len()),
        ));
    }

    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step_count += 1;
    let t = state.step_count as f64;
    let bias1 = 1.0 - libm::pow(beta1, t);
    let bias2 = 1.0 - libm::pow(beta2, t);

    let mut flat = 0;
    for (ps, gs) in param_slices.iter_mut().zip(grad_slices) {
        for (p, &g) in ps.iter_mut().zip(gs) {
            let m = &mut state.first_moment[flat];
            let v = &mut state.second_moment[flat];
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= learning_rate * m_hat / (libm::sqrt(v_hat) + epsilon);
            flat += 1;
        }
    }
    Ok(())
}
