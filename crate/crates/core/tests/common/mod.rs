#![allow(dead_code)]

use std::path::PathBuf;

use pinn_osc::data::{CollocationSet, Strategy, TrainingSet};
use pinn_osc::network::{jet_value, MlpConfig, ParameterVector};
use pinn_osc::problems::{Oscillator, OscillatorProblem};
use pinn_osc::reference::rk4_integrate;
use pinn_osc::training::{loss_and_gradient, AdamConfig, LossWeights, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

pub fn schema_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schema/report.schema.json")
}

pub fn report_schema() -> Value {
    serde_json::from_str(&std::fs::read_to_string(schema_path()).unwrap()).unwrap()
}

/// A tiny fast experiment: small network, few epochs.
pub fn tiny_config_json() -> String {
    r#"{
  "name": "tiny",
  "problem": { "oscillator": { "kind": "primer" }, "domain": [0, 30], "u0": 1 },
  "network": { "hidden_layers": 1, "hidden_width": 6 },
  "data": { "n": 4 },
  "collocation": { "n": 8 },
  "weights": { "lambda_d": 1, "lambda_g": 0.06 },
  "epochs": 30,
  "seeds": [0, 1],
  "reference_steps": 600,
  "test_grid": 50,
  "windows": [[15, 30]]
}"#
    .to_string()
}

fn type_matches(ty: &str, v: &Value) -> bool {
    match ty {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        other => panic!("unsupported schema type {other}"),
    }
}

/// Validates the subset of JSON Schema used by the shipped report schema.
pub fn validate(schema: &Value, v: &Value, path: &str) -> Result<(), String> {
    if let Some(ty) = schema.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(t, v),
            Value::Array(ts) => ts.iter().any(|t| type_matches(t.as_str().unwrap(), v)),
            _ => panic!("bad type keyword"),
        };
        if !ok {
            return Err(format!("{path}: expected {ty}, got {v}"));
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            return Err(format!("{path}: {v} not in {options:?}"));
        }
    }
    if let (Some(min), Some(x)) = (schema.get("minimum").and_then(Value::as_f64), v.as_f64()) {
        if x < min {
            return Err(format!("{path}: {x} < {min}"));
        }
    }
    if let Some(obj) = v.as_object() {
        for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            if !obj.contains_key(key.as_str().unwrap()) {
                return Err(format!("{path}: missing {key}"));
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (k, child) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(s) => validate(s, child, &format!("{path}.{k}"))?,
                None if schema.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    return Err(format!("{path}: unexpected property {k}"))
                }
                None => {}
            }
        }
    }
    if let Some(items) = v.as_array() {
        let len = items.len() as u64;
        if schema.get("minItems").and_then(Value::as_u64).is_some_and(|m| len < m) {
            return Err(format!("{path}: too few items"));
        }
        if schema.get("maxItems").and_then(Value::as_u64).is_some_and(|m| len > m) {
            return Err(format!("{path}: too many items"));
        }
        if let Some(s) = schema.get("items") {
            for (i, item) in items.iter().enumerate() {
                validate(s, item, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}

/// A small random loss setup for problem family `kind` (0 primer, 1 Van der
/// Pol, 2 Duffing), with random coefficients, points, weights and parameters.
pub fn random_loss_case(kind: usize, seed: u64) -> (TrainConfig, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut problem = match kind % 3 {
        0 => OscillatorProblem::primer(),
        1 => OscillatorProblem::van_der_pol(rng.gen_range(0.5..5.0)),
        _ => OscillatorProblem::duffing(),
    };
    problem.oscillator = match problem.oscillator {
        Oscillator::Primer { .. } => {
            Oscillator::Primer { damping: rng.gen_range(0.0..1.0), omega: rng.gen_range(0.5..3.0) }
        }
        Oscillator::VanDerPol { epsilon, .. } => Oscillator::VanDerPol { omega0: rng.gen_range(1.0..15.0), epsilon },
        Oscillator::Duffing { .. } => {
            Oscillator::Duffing { alpha: rng.gen_range(0.5..2.0), beta: rng.gen_range(0.1..2.0) }
        }
    };
    problem.u0 = rng.gen_range(-2.0..2.0);
    if problem.order() == 2 {
        problem.du0 = rng.gen_range(-1.0..1.0);
    }
    let [a, b] = problem.domain;
    let mut network = MlpConfig::new(rng.gen_range(1..=2), rng.gen_range(2..=6)).unwrap();
    if rng.gen_bool(0.5) {
        network = network.with_input_range(problem.domain);
    }
    let n_data = rng.gen_range(1..=5);
    let points = (0..n_data).map(|_| (rng.gen_range(a..b), rng.gen_range(-2.0..2.0))).collect();
    let times = (0..rng.gen_range(1..=8)).map(|_| rng.gen_range(a..b)).collect();
    let energy = matches!(problem.oscillator, Oscillator::Duffing { .. });
    let weights = LossWeights {
        lambda_d: rng.gen_range(0.1..2.0),
        lambda_g: rng.gen_range(0.01..1.0),
        lambda_i: rng.gen_range(0.0..1.0),
        lambda_b: 0.0,
        lambda_reg: if energy { rng.gen_range(0.01..1.0) } else { 0.0 },
    };
    let reference = rk4_integrate(&problem.to_first_order_system(), &problem.initial_state(), a, b, 3000).unwrap();
    let params = ParameterVector::init(&network, rng.gen()).unwrap().into_vec();
    let cfg = TrainConfig {
        problem,
        network,
        training: TrainingSet { points, noise_sigma: 0.0, window: problem.domain },
        collocation: CollocationSet { times, strategy: Strategy::Random },
        weights,
        adam: AdamConfig::default(),
        epochs: 1,
        seed,
        test_grid: 10,
        energy_regularization: energy,
        windows: Vec::new(),
        reference,
        keep_best: false,
    };
    (cfg, params)
}

/// Norm-wise relative error between the tape gradient of the total loss and a
/// central difference.
pub fn loss_gradient_error(cfg: &TrainConfig, params: &[f64]) -> f64 {
    let (_, grad) = loss_and_gradient(params, cfg).unwrap();
    let total = |p: &[f64]| loss_and_gradient(p, cfg).unwrap().0.total;
    let mut p = params.to_vec();
    let (mut diff, mut norm) = (0.0, 0.0);
    for i in 0..p.len() {
        let h = 1e-6 * p[i].abs().max(1.0);
        p[i] = params[i] + h;
        let up = total(&p);
        p[i] = params[i] - h;
        let down = total(&p);
        p[i] = params[i];
        let fd = (up - down) / (2.0 * h);
        diff += (grad[i] - fd).powi(2);
        norm += grad[i].powi(2);
    }
    diff.sqrt() / norm.sqrt().max(1e-12)
}

/// Largest relative error of the jet's first and second derivative against
/// central differences of the network value, at `t`.
pub fn jet_derivative_error(params: &[f64], cfg: &MlpConfig, t: f64) -> f64 {
    let f = |x: f64| jet_value(params, cfg, x).unwrap().v0;
    let j = jet_value(params, cfg, t).unwrap();
    let h1 = 1e-5;
    let d1 = (f(t + h1) - f(t - h1)) / (2.0 * h1);
    let h2 = 1e-4;
    let d2 = (f(t + h2) - 2.0 * f(t) + f(t - h2)) / (h2 * h2);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-2);
    rel(j.v1, d1).max(rel(j.v2, d2))
}
