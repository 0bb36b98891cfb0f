//! Soft-constraint loss assembly and full-batch Adam training.

mod adam;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, Tape, Var};
use crate::data::{CollocationSet, TrainingSet};
use crate::network::{forward_batch, forward_value, JetOrder, MlpConfig, NetworkError, ParameterVector};
use crate::problems::{OscillatorProblem, ProblemError};
use crate::reference::{ReferenceError, Trajectory};

pub use adam::{adam_step, AdamConfig, AdamState};

/// Losses above this are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("non-finite gradient entry {index} at step {step}")]
    NonFiniteGradient { index: usize, step: u64 },
    #[error("training diverged at epoch {epoch} (total loss {total})")]
    Diverged { epoch: usize, total: f64, history: Vec<LossBreakdown> },
}

/// Multipliers of the loss terms; a zero weight skips its term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda_d: f64,
    pub lambda_g: f64,
    pub lambda_i: f64,
    pub lambda_b: f64,
    pub lambda_reg: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda_d: 1.0, lambda_g: 6e-2, lambda_i: 0.0, lambda_b: 0.0, lambda_reg: 0.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), TrainError> {
        let all = [self.lambda_d, self.lambda_g, self.lambda_i, self.lambda_b, self.lambda_reg];
        if all.iter().all(|l| l.is_finite() && *l >= 0.0) {
            Ok(())
        } else {
            Err(TrainError::InvalidConfig(format!("loss weights must be finite and non-negative: {self:?}")))
        }
    }

    pub fn scaled(self, c: f64) -> Self {
        Self {
            lambda_d: self.lambda_d * c,
            lambda_g: self.lambda_g * c,
            lambda_i: self.lambda_i * c,
            lambda_b: self.lambda_b * c,
            lambda_reg: self.lambda_reg * c,
        }
    }
}

/// Unweighted term values and their weighted sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub data: f64,
    pub governing: f64,
    pub initial: f64,
    pub boundary: f64,
    pub regularization: f64,
}

/// Everything one training run needs.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub problem: OscillatorProblem,
    pub network: MlpConfig,
    pub training: TrainingSet,
    pub collocation: CollocationSet,
    pub weights: LossWeights,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub seed: u64,
    /// Number of uniform test points over the domain.
    pub test_grid: usize,
    /// Penalise drift of the energy from its initial value at the collocation times.
    pub energy_regularization: bool,
    /// Extra sub-windows reported as windowed MSE.
    pub windows: Vec<[f64; 2]>,
    /// Ground truth for the test metrics.
    pub reference: Trajectory,
    /// Return the parameters with the lowest recorded training loss instead of the last iterate.
    pub keep_best: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.problem.validate()?;
        self.network.validate()?;
        self.weights.validate()?;
        self.adam.validate()?;
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.test_grid == 0 {
            return Err(TrainError::InvalidConfig("test grid must have at least 1 point".into()));
        }
        if self.energy_regularization {
            self.problem.initial_energy()?;
        }
        if self.weights.lambda_d > 0.0 && self.training.is_empty() {
            return Err(TrainError::InvalidConfig("lambda_d > 0 needs at least one training point".into()));
        }
        if self.weights.lambda_g > 0.0 && self.collocation.is_empty() {
            return Err(TrainError::InvalidConfig("lambda_g > 0 needs at least one collocation point".into()));
        }
        if self.regularization_active() && self.collocation.is_empty() {
            return Err(TrainError::InvalidConfig("energy regularization needs collocation points".into()));
        }
        let [a, b] = self.problem.domain;
        let inside = |t: f64| t >= a && t <= b;
        if !self.training.points.iter().all(|p| inside(p.0)) {
            return Err(TrainError::InvalidConfig("training times must lie in the problem domain".into()));
        }
        if !self.collocation.times.iter().all(|&t| inside(t)) {
            return Err(TrainError::InvalidConfig("collocation times must lie in the problem domain".into()));
        }
        if self.windows.iter().any(|w| !(w[0] <= w[1] && inside(w[0]) && inside(w[1]))) {
            return Err(TrainError::InvalidConfig("metric windows must lie in the problem domain".into()));
        }
        if self.reference.start() > a || self.reference.end() < b {
            return Err(TrainError::InvalidConfig("reference must cover the problem domain".into()));
        }
        Ok(())
    }

    fn regularization_active(&self) -> bool {
        self.energy_regularization && self.weights.lambda_reg > 0.0
    }
}

fn mean<'t>(tape: &'t Tape, terms: impl Iterator<Item = Var<'t>>) -> Var<'t> {
    let mut n = 0usize;
    let sum = terms.fold(tape.constant(0.0), |acc, x| {
        n += 1;
        acc + x
    });
    sum * (1.0 / n.max(1) as f64)
}

/// Records the weighted loss on `tape` and returns it with its breakdown.
///
/// The tape's parameters are the network parameters.
pub fn compute_loss<'t>(tape: &'t Tape, config: &TrainConfig) -> Result<(Var<'t>, LossBreakdown), TrainError> {
    let w = &config.weights;
    let problem = &config.problem;
    let net = &config.network;
    let mut total = tape.constant(0.0);
    let mut parts = LossBreakdown::default();

    if w.lambda_d > 0.0 {
        if config.training.is_empty() {
            return Err(TrainError::InvalidConfig("lambda_d > 0 needs at least one training point".into()));
        }
        let jets = forward_batch(tape, net, &config.training.times(), JetOrder::Zeroth)?;
        let term = mean(tape, jets.iter().zip(&config.training.points).map(|(j, p)| (j.v0 - p.1).square()));
        parts.data = term.value();
        total = total + term * w.lambda_d;
    }

    let reg = config.regularization_active();
    if w.lambda_g > 0.0 || reg {
        let times = &config.collocation.times;
        if times.is_empty() {
            return Err(TrainError::InvalidConfig("collocation set is empty".into()));
        }
        let order = JetOrder::from_derivative(problem.order());
        let jets = forward_batch(tape, net, times, order)?;
        if w.lambda_g > 0.0 {
            let term = mean(tape, jets.iter().zip(times).map(|(j, &t)| problem.residual(*j, t).square()));
            parts.governing = term.value();
            total = total + term * w.lambda_g;
        }
        if reg {
            let e0 = problem.initial_energy()?;
            let drift = jets
                .iter()
                .map(|j| problem.energy(j.v0, j.v1).map(|e| (e - e0).square()))
                .collect::<Result<Vec<_>, _>>()?;
            let term = mean(tape, drift.into_iter());
            parts.regularization = term.value();
            total = total + term * w.lambda_reg;
        }
    }

    if w.lambda_i > 0.0 {
        let jet = forward_batch(tape, net, &[problem.start()], JetOrder::First)?[0];
        let term =
            problem.initial_condition_residuals(jet).into_iter().fold(tape.constant(0.0), |acc, r| acc + r.square());
        parts.initial = term.value();
        total = total + term * w.lambda_i;
    }

    parts.total = total.value();
    Ok((total, parts))
}

/// Loss breakdown and its gradient at `params`.
pub fn loss_and_gradient(params: &[f64], config: &TrainConfig) -> Result<(LossBreakdown, Vec<f64>), TrainError> {
    let tape = Tape::new(params);
    let (total, parts) = compute_loss(&tape, config)?;
    let grad = tape.gradient(total)?;
    Ok((parts, grad))
}

/// Mean squared difference between the network and `reference` over `grid`.
pub fn evaluate_mse(
    params: &[f64],
    network: &MlpConfig,
    grid: &[f64],
    reference: &Trajectory,
) -> Result<f64, TrainError> {
    if grid.is_empty() {
        return Err(TrainError::InvalidConfig("evaluation grid is empty".into()));
    }
    let mut sum = 0.0;
    for &t in grid {
        let e = forward_value(params, network, t)? - reference.sample_u(t)?;
        sum += e * e;
    }
    Ok(sum / grid.len() as f64)
}

/// Test-grid MSE restricted to a sub-window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowMse {
    pub window: [f64; 2],
    pub mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub test_mse: f64,
    /// Test MSE of the last iterate, whichever parameters are returned.
    pub last_iterate_mse: f64,
    /// Epoch whose pre-step parameters were returned.
    pub selected_epoch: usize,
    pub window_mse: Vec<WindowMse>,
    pub final_loss: LossBreakdown,
    pub wall_clock_seconds: f64,
    pub epochs_run: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParameterVector,
    pub history: Vec<LossBreakdown>,
    pub metrics: RunMetrics,
}

/// Uniform test grid over the problem domain.
pub fn test_grid(config: &TrainConfig) -> Vec<f64> {
    crate::data::linspace(config.problem.start(), config.problem.end(), config.test_grid)
}

/// Runs `epochs` full-batch Adam steps from a seeded Glorot initialisation.
///
/// `history[k]` is the loss at the parameters before step `k + 1`. With
/// `keep_best`, the returned parameters are those with the lowest recorded
/// total loss (the state after the final step included).
pub fn train(config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let started = Instant::now();
    let mut params = ParameterVector::init(&config.network, config.seed)?;
    let mut state = AdamState::new(params.len(), config.adam);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best = (f64::INFINITY, 0, params.clone());
    for epoch in 1..=config.epochs {
        let (parts, grad) = loss_and_gradient(params.as_slice(), config)?;
        if !parts.total.is_finite() || parts.total > DIVERGENCE_LIMIT {
            history.push(parts);
            return Err(TrainError::Diverged { epoch, total: parts.total, history });
        }
        history.push(parts);
        if config.keep_best && parts.total < best.0 {
            best.0 = parts.total;
            best.1 = epoch;
            best.2.as_mut_slice().copy_from_slice(params.as_slice());
        }
        adam_step(params.as_mut_slice(), &grad, &mut state)?;
        if epoch % 2000 == 0 {
            log::debug!("seed {} epoch {epoch}: loss {:.6e}", config.seed, parts.total);
        }
    }
    let wall_clock_seconds = started.elapsed().as_secs_f64();

    let grid = test_grid(config);
    let last_iterate_mse = evaluate_mse(params.as_slice(), &config.network, &grid, &config.reference)?;
    let mut selected_epoch = config.epochs + 1;
    if config.keep_best {
        let (last_loss, _) = loss_and_gradient(params.as_slice(), config)?;
        if best.0 <= last_loss.total {
            params = best.2;
            selected_epoch = best.1;
        }
    }
    let test_mse = evaluate_mse(params.as_slice(), &config.network, &grid, &config.reference)?;
    let window_mse = config
        .windows
        .iter()
        .map(|&window| {
            let sub: Vec<f64> = grid.iter().copied().filter(|t| *t >= window[0] && *t <= window[1]).collect();
            let mse = evaluate_mse(params.as_slice(), &config.network, &sub, &config.reference)?;
            Ok(WindowMse { window, mse })
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let final_loss = loss_and_gradient(params.as_slice(), config)?.0;
    Ok(TrainOutcome {
        params,
        metrics: RunMetrics {
            test_mse,
            last_iterate_mse,
            selected_epoch,
            window_mse,
            final_loss,
            wall_clock_seconds,
            epochs_run: history.len(),
        },
        history,
    })
}
