use serde::{Deserialize, Serialize};

use super::TrainError;

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 3e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.epsilon.is_finite();
        if ok {
            Ok(())
        } else {
            Err(TrainError::InvalidConfig(format!("invalid Adam settings {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        Self { first_moment: vec![0.0; n_params], second_moment: vec![0.0; n_params], step_count: 0, config }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], gradient: &[f64], state: &mut AdamState) -> Result<(), TrainError> {
    let n = params.len();
    if gradient.len() != n || state.first_moment.len() != n || state.second_moment.len() != n {
        return Err(TrainError::InvalidConfig(format!(
            "Adam shapes differ: {n} params, {} gradient entries, {} moments",
            gradient.len(),
            state.first_moment.len()
        )));
    }
    if let Some(index) = gradient.iter().position(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient { index, step: state.step_count + 1 });
    }
    let AdamConfig { learning_rate, beta1, beta2, epsilon } = state.config;
    state.step_count += 1;
    let k = state.step_count as i32;
    let c1 = 1.0 / (1.0 - beta1.powi(k));
    let c2 = 1.0 / (1.0 - beta2.powi(k));
    for (((p, &g), m), v) in
        params.iter_mut().zip(gradient).zip(state.first_moment.iter_mut()).zip(state.second_moment.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        *p -= learning_rate * (*m * c1) / ((*v * c2).sqrt() + epsilon);
    }
    Ok(())
}
