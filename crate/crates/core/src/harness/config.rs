use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{generate_collocation, generate_training_data, Strategy, TrainingSet};
use crate::network::{Activation, MlpConfig};
use crate::problems::{Oscillator, OscillatorProblem};
use crate::reference::{rk4_integrate, Trajectory};
use crate::training::{AdamConfig, LossWeights, TrainConfig};

use super::HarnessError;

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_steps() -> usize {
    3000
}

fn default_grid() -> usize {
    300
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(default = "NetworkSpec::default_layers")]
    pub hidden_layers: usize,
    #[serde(default = "NetworkSpec::default_width")]
    pub hidden_width: usize,
    #[serde(default)]
    pub activation: Activation,
    /// Map the problem domain onto `[-1, 1]` before the first layer.
    #[serde(default = "yes")]
    pub normalize_input: bool,
    /// Constant factor on the network output, e.g. the expected amplitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_scale: Option<f64>,
}

impl NetworkSpec {
    fn default_layers() -> usize {
        3
    }

    fn default_width() -> usize {
        32
    }
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            hidden_layers: 3,
            hidden_width: 32,
            activation: Activation::Tanh,
            normalize_input: true,
            output_scale: None,
        }
    }
}

/// Supervised points: `n` uniform samples of the reference over `window`
/// (the whole domain when absent), or a `t,u` CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    #[serde(default)]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollocationSpec {
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub strategy: Strategy,
}

/// A declarative experiment: one problem, one setup, several seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub problem: OscillatorProblem,
    #[serde(default)]
    pub network: NetworkSpec,
    pub data: DataSpec,
    #[serde(default)]
    pub collocation: CollocationSpec,
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default)]
    pub optimizer: AdamConfig,
    pub epochs: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub energy_regularization: bool,
    #[serde(default = "yes")]
    pub keep_best: bool,
    #[serde(default = "default_steps")]
    pub reference_steps: usize,
    #[serde(default = "default_grid")]
    pub test_grid: usize,
    /// Sub-windows reported as windowed test MSE.
    #[serde(default)]
    pub windows: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(file) = cfg.data.file.as_mut() {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    *file = dir.join(&*file);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Field-level checks, including cross-field consistency.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.problem.validate().map_err(|e| invalid("problem", e))?;
        let [a, b] = self.problem.domain;
        let inside = |w: [f64; 2]| w[0] >= a && w[1] <= b && w[0] <= w[1];
        self.mlp().validate().map_err(|e| invalid("network", e))?;
        self.weights.validate().map_err(|e| invalid("weights", e))?;
        self.optimizer.validate().map_err(|e| invalid("optimizer", e))?;
        if self.epochs == 0 {
            return Err(invalid("epochs", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        if self.reference_steps == 0 {
            return Err(invalid("reference_steps", "must be at least 1"));
        }
        if self.test_grid == 0 {
            return Err(invalid("test_grid", "must be at least 1"));
        }
        if let Some(w) = self.data.window {
            if !inside(w) {
                return Err(invalid("data.window", format!("{w:?} is not inside the domain [{a}, {b}]")));
            }
        }
        if !(self.data.sigma.is_finite() && self.data.sigma >= 0.0) {
            return Err(invalid("data.sigma", "must be finite and non-negative"));
        }
        if self.data.file.is_none() && self.data.n == 0 && self.weights.lambda_d > 0.0 {
            return Err(invalid("data.n", "must be at least 1 when lambda_d > 0"));
        }
        if self.data.file.is_some() && self.data.n > 0 {
            return Err(invalid("data", "give either n or file, not both"));
        }
        if self.energy_regularization {
            if !matches!(self.problem.oscillator, Oscillator::Duffing { .. }) {
                return Err(invalid(
                    "energy_regularization",
                    format!("{} has no conserved energy", self.problem.oscillator.name()),
                ));
            }
        } else if self.weights.lambda_reg > 0.0 {
            return Err(invalid("weights.lambda_reg", "set energy_regularization to use the energy term"));
        }
        if let Some(w) = self.windows.iter().find(|w| !inside(**w)) {
            return Err(invalid("windows", format!("{w:?} is not inside the domain [{a}, {b}]")));
        }
        Ok(())
    }

    pub fn mlp(&self) -> MlpConfig {
        let mut cfg = MlpConfig {
            hidden_layers: self.network.hidden_layers,
            hidden_width: self.network.hidden_width,
            activation: self.network.activation,
            input_range: None,
            output_scale: self.network.output_scale,
        };
        if self.network.normalize_input {
            cfg.input_range = Some(self.problem.domain);
        }
        cfg
    }

    /// RK4 solution over the whole domain.
    pub fn reference(&self) -> Result<Trajectory, HarnessError> {
        let p = &self.problem;
        Ok(rk4_integrate(&p.to_first_order_system(), &p.initial_state(), p.start(), p.end(), self.reference_steps)?)
    }

    /// Weights actually used: without collocation points the residual and
    /// energy terms have nothing to act on and are switched off.
    pub fn effective_weights(&self) -> LossWeights {
        let mut w = self.weights;
        if self.collocation.n == 0 {
            w.lambda_g = 0.0;
            w.lambda_reg = 0.0;
        }
        if self.data.n == 0 && self.data.file.is_none() {
            w.lambda_d = 0.0;
        }
        w
    }

    fn training_set(&self, reference: &Trajectory, seed: u64) -> Result<TrainingSet, HarnessError> {
        if let Some(file) = &self.data.file {
            let f = std::fs::File::open(file).map_err(|e| invalid("data.file", format!("{}: {e}", file.display())))?;
            return TrainingSet::read_csv(f).map_err(|e| invalid("data.file", e));
        }
        if self.data.n == 0 {
            return Ok(TrainingSet { points: Vec::new(), noise_sigma: 0.0, window: self.problem.domain });
        }
        let window = self.data.window.unwrap_or(self.problem.domain);
        Ok(generate_training_data(reference, window, self.data.n, self.data.sigma, seed)?)
    }

    /// Training configuration for one seed.
    pub fn train_config(&self, seed: u64, reference: &Trajectory) -> Result<TrainConfig, HarnessError> {
        let collocation =
            generate_collocation(self.problem.domain, self.collocation.n, self.collocation.strategy, seed)?;
        Ok(TrainConfig {
            problem: self.problem,
            network: self.mlp(),
            training: self.training_set(reference, seed)?,
            collocation,
            weights: self.effective_weights(),
            adam: self.optimizer,
            epochs: self.epochs,
            seed,
            test_grid: self.test_grid,
            energy_regularization: self.energy_regularization,
            windows: self.windows.clone(),
            reference: reference.clone(),
            keep_best: self.keep_best,
        })
    }
}
