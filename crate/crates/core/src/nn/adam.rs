use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: DEFAULT_LEARNING_RATE, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.lr >= 0.0 && self.lr.is_finite(), "learning rate must be non-negative, got {}", self.lr);
        ensure!((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2), "Adam betas must lie in [0, 1)");
        ensure!(self.epsilon > 0.0, "Adam epsilon must be positive");
        Ok(())
    }
}

/// First and second moment estimates, one buffer per parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step_count: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, group_lens: &[usize]) -> Result<Self> {
        config.validate()?;
        Ok(AdamState {
            config,
            step_count: 0,
            m: group_lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: group_lens.iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    /// Rebuilds a state from saved moments.
    pub fn from_moments(config: AdamConfig, step_count: u64, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> Result<Self> {
        config.validate()?;
        ensure!(
            m.len() == v.len() && m.iter().zip(&v).all(|(a, b)| a.len() == b.len()),
            "first and second moments have different layouts"
        );
        Ok(AdamState { config, step_count, m, v })
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }
}

pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState) -> Result<()> {
    ensure!(
        params.len() == grads.len() && params.len() == state.m.len(),
        "{} parameter groups, {} gradient groups, optimiser tracks {}",
        params.len(),
        grads.len(),
        state.m.len()
    );
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        ensure!(
            p.len() == g.len() && p.len() == state.m[i].len(),
            "group {i}: {} parameters, {} gradients, optimiser tracks {}",
            p.len(),
            g.len(),
            state.m[i].len()
        );
    }
    let AdamConfig { lr, beta1, beta2, epsilon } = state.config;
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        for j in 0..p.len() {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            let mh = m[j] / bc1;
            let vh = v[j] / bc2;
            p[j] -= lr * mh / (vh.sqrt() + epsilon);
        }
    }
    Ok(())
}
