//! Adam with bias correction.

use crate::denoiser::{DenoiserModel, Gradients};
use crate::error::{check_dims, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Moment estimates for one flat parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    check_dims(params.len(), grads.len())?;
    check_dims(params.len(), state.m.len())?;
    state.step += 1;
    let bc1 = 1.0 - BETA1.powf(state.step as f64);
    let bc2 = 1.0 - BETA2.powf(state.step as f64);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}

/// One [`AdamState`] per weight matrix and bias vector of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub states: Vec<AdamState>,
}

impl Adam {
    pub fn new(model: &DenoiserModel, lr: f64) -> Self {
        Adam {
            lr,
            states: model.slices().map(|s| AdamState::new(s.len())).collect(),
        }
    }

    pub fn step(&mut self, model: &mut DenoiserModel, grads: &Gradients) -> Result<()> {
        for ((p, g), st) in model.slices_mut().zip(grads.slices()).zip(&mut self.states) {
            adam_step(p, g, st, self.lr)?;
        }
        Ok(())
    }
}
