//! Fully connected scalar-to-scalar tanh network `u_w(t)`.
//!
//! Parameters live in one flat [`ParameterVector`]: for each layer, the weight
//! matrix row-major by output neuron, followed by that layer's biases.

mod kernel;

use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet2, Scalar, Tape, Var};

pub use kernel::JetOrder;

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("parameter vector has {actual} entries, network needs {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("parameter file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    #[serde(default)]
    pub activation: Activation,
    /// Time interval mapped affinely onto `[-1, 1]` before the first layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_range: Option<[f64; 2]>,
    /// Constant factor applied to the last layer's output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_scale: Option<f64>,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden_layers: 3, hidden_width: 32, activation: Activation::Tanh, input_range: None, output_scale: None }
    }
}

/// Position of one affine layer inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub biases: usize,
}

impl LayerSlot {
    pub fn end(&self) -> usize {
        self.biases + self.fan_out
    }
}

impl MlpConfig {
    pub fn new(hidden_layers: usize, hidden_width: usize) -> Result<Self, NetworkError> {
        let cfg =
            Self { hidden_layers, hidden_width, activation: Activation::Tanh, input_range: None, output_scale: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.hidden_layers == 0 {
            return Err(NetworkError::InvalidConfig("hidden_layers must be at least 1".into()));
        }
        if self.hidden_width == 0 {
            return Err(NetworkError::InvalidConfig("hidden_width must be at least 1".into()));
        }
        if let Some([a, b]) = self.input_range {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(NetworkError::InvalidConfig(format!("input_range [{a}, {b}] is empty")));
            }
        }
        if let Some(c) = self.output_scale {
            if !(c.is_finite() && c != 0.0) {
                return Err(NetworkError::InvalidConfig(format!("output_scale {c} must be finite and non-zero")));
            }
        }
        Ok(())
    }

    pub fn with_input_range(mut self, range: [f64; 2]) -> Self {
        self.input_range = Some(range);
        self
    }

    pub fn with_output_scale(mut self, scale: f64) -> Self {
        self.output_scale = Some(scale);
        self
    }

    pub fn output_factor(&self) -> f64 {
        self.output_scale.unwrap_or(1.0)
    }

    /// `(shift, gain)` with network input `(t - shift) * gain`.
    pub fn input_map(&self) -> (f64, f64) {
        match self.input_range {
            Some([a, b]) => (0.5 * (a + b), 2.0 / (b - a)),
            None => (0.0, 1.0),
        }
    }

    /// Neuron counts from input to output, e.g. `[1, 32, 32, 32, 1]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![1];
        sizes.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        sizes.push(1);
        sizes
    }

    pub fn layers(&self) -> Vec<LayerSlot> {
        let sizes = self.layer_sizes();
        let mut offset = 0;
        sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let slot = LayerSlot { fan_in, fan_out, weights: offset, biases: offset + fan_in * fan_out };
                offset = slot.end();
                slot
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().last().map_or(0, LayerSlot::end)
    }

    fn check_len(&self, len: usize) -> Result<(), NetworkError> {
        let expected = self.param_count();
        if len != expected {
            return Err(NetworkError::LengthMismatch { expected, actual: len });
        }
        Ok(())
    }
}

/// Glorot-uniform half-width for a layer.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(config: &MlpConfig) -> Self {
        Self(vec![0.0; config.param_count()])
    }

    /// Glorot-uniform weights, zero biases, deterministic in `seed`.
    pub fn init(config: &MlpConfig, seed: u64) -> Result<Self, NetworkError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; config.param_count()];
        for slot in config.layers() {
            let bound = glorot_bound(slot.fan_in, slot.fan_out);
            for w in &mut values[slot.weights..slot.biases] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// One value per line, in parameter order, with round-trip precision.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), NetworkError> {
        for v in &self.0 {
            writeln!(out, "{v:.16e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, NetworkError> {
        let mut values = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let v = trimmed.parse::<f64>().map_err(|e| NetworkError::Parse { line: i + 1, msg: e.to_string() })?;
            values.push(v);
        }
        Ok(Self(values))
    }

    pub fn save(&self, path: &Path) -> Result<(), NetworkError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Plain network output at `t`.
pub fn forward_value(params: &[f64], config: &MlpConfig, t: f64) -> Result<f64, NetworkError> {
    config.check_len(params.len())?;
    let layers = config.layers();
    let (shift, gain) = config.input_map();
    let mut act = vec![(t - shift) * gain];
    let mut next = Vec::with_capacity(config.hidden_width);
    for (l, slot) in layers.iter().enumerate() {
        next.clear();
        for j in 0..slot.fan_out {
            let row = &params[slot.weights + j * slot.fan_in..][..slot.fan_in];
            let z = row.iter().zip(&act).fold(params[slot.biases + j], |acc, (w, a)| acc + w * a);
            next.push(if l + 1 < layers.len() { z.tanh() } else { z });
        }
        std::mem::swap(&mut act, &mut next);
    }
    Ok(act[0] * config.output_factor())
}

/// Network jet built from elementary jet operations over any scalar type.
///
/// With `T = f64` this is a plain jet evaluator; with `T = Var` every
/// multiply-add is recorded on the tape individually, which makes it a slow but
/// structurally independent route to the same derivatives as [`forward_jet`].
pub fn forward_jet_generic<T: Scalar>(
    params: &[T],
    config: &MlpConfig,
    input: Jet2<T>,
) -> Result<Jet2<T>, NetworkError> {
    config.check_len(params.len())?;
    let layers = config.layers();
    let (shift, gain) = config.input_map();
    let mut act = vec![(input - shift).scale(gain)];
    for (l, slot) in layers.iter().enumerate() {
        let mut next = Vec::with_capacity(slot.fan_out);
        for j in 0..slot.fan_out {
            let row = &params[slot.weights + j * slot.fan_in..][..slot.fan_in];
            let mut z = act[0].scale_by(row[0]);
            for (w, a) in row.iter().zip(&act).skip(1) {
                z = z + a.scale_by(*w);
            }
            z.v0 = z.v0 + params[slot.biases + j];
            next.push(if l + 1 < layers.len() { z.tanh() } else { z });
        }
        act = next;
    }
    Ok(act[0].scale(config.output_factor()))
}

/// Plain `(u, u', u'')` at `t`.
pub fn jet_value(params: &[f64], config: &MlpConfig, t: f64) -> Result<Jet2, NetworkError> {
    forward_jet_generic(params, config, Jet2::seed(t))
}

/// `(u_w(t), u_w'(t), u_w''(t))` with every coefficient differentiable through `tape`.
pub fn forward_jet<'t>(tape: &'t Tape, config: &MlpConfig, t: f64) -> Result<Jet2<Var<'t>>, NetworkError> {
    Ok(forward_batch(tape, config, &[t], JetOrder::Second)?[0])
}

/// Batched jets for many times at once, recorded as a single tape block.
///
/// Coefficients above `order` are not computed and read as a tape constant 0.
pub fn forward_batch<'t>(
    tape: &'t Tape,
    config: &MlpConfig,
    times: &[f64],
    order: JetOrder,
) -> Result<Vec<Jet2<Var<'t>>>, NetworkError> {
    config.check_len(tape.param_count())?;
    let pass = kernel::JetPass::forward(tape.param_values(), config, times, order);
    let outputs = pass.outputs();
    let vars = tape.push_block(Box::new(pass), &outputs);
    let channels = order.channels();
    let zero = if channels < 3 { Some(tape.constant(0.0)) } else { None };
    Ok(vars
        .chunks_exact(channels)
        .map(|c| {
            let z = zero.unwrap_or(c[0]);
            Jet2::new(c[0], if channels > 1 { c[1] } else { z }, if channels > 2 { c[2] } else { z })
        })
        .collect())
}
