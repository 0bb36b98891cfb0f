//! Supervised training points sampled from a reference solution, and
//! collocation times for the residual term.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::reference::{ReferenceError, Trajectory};

/// RNG streams, so that noise and collocation draws stay independent for one seed.
const NOISE_STREAM: u64 = 1;
const COLLOCATION_STREAM: u64 = 2;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("at least one training point is required")]
    NoPoints,
    #[error("window [{0}, {1}] is empty or not finite")]
    BadWindow(f64, f64),
    #[error("noise sigma must be finite and non-negative (got {0})")]
    BadSigma(f64),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error("training data csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("training data must be sorted by t with finite values (row {0})")]
    BadRow(usize),
}

/// Labelled observations `(t, u)`, sorted by `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub points: Vec<(f64, f64)>,
    pub noise_sigma: f64,
    pub window: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct Row {
    t: f64,
    u: f64,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    /// CSV with header `t,u`; values use 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "u"])?;
        for &(t, u) in &self.points {
            w.write_record([format!("{t:.16e}"), format!("{u:.16e}")])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a `t,u` CSV, e.g. measured data replacing synthetic samples.
    ///
    /// The window spans the first and last time; noise is recorded as 0.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, DataError> {
        let mut points = Vec::new();
        for (i, row) in csv::Reader::from_reader(input).deserialize::<Row>().enumerate() {
            let row = row?;
            let sorted = points.last().is_none_or(|&(t, _)| row.t >= t);
            if !(row.t.is_finite() && row.u.is_finite() && sorted) {
                return Err(DataError::BadRow(i + 1));
            }
            points.push((row.t, row.u));
        }
        let (first, last) = match (points.first(), points.last()) {
            (Some(a), Some(b)) => (a.0, b.0),
            _ => return Err(DataError::NoPoints),
        };
        Ok(Self { points, noise_sigma: 0.0, window: [first, last] })
    }
}

/// `n` evenly spaced times over `[a, b]` with both ends exact; `n = 1` gives `[a]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let h = (b - a) / (n - 1) as f64;
            (0..n).map(|i| if i + 1 == n { b } else { a + i as f64 * h }).collect()
        }
    }
}

/// Samples `n` uniformly spaced points of `reference` over `window`, adding
/// i.i.d. `N(0, sigma^2)` noise to the values.
pub fn generate_training_data(
    reference: &Trajectory,
    window: [f64; 2],
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<TrainingSet, DataError> {
    if n == 0 {
        return Err(DataError::NoPoints);
    }
    let [a, b] = window;
    if !(a.is_finite() && b.is_finite() && b >= a) {
        return Err(DataError::BadWindow(a, b));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(DataError::BadSigma(sigma));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    let noise = Normal::new(0.0, sigma).map_err(|_| DataError::BadSigma(sigma))?;
    let points = linspace(a, b, n)
        .into_iter()
        .map(|t| {
            let u = reference.sample_u(t)?;
            let u = if sigma > 0.0 { u + noise.sample(&mut rng) } else { u };
            Ok((t, u))
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    Ok(TrainingSet { points, noise_sigma: sigma, window })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Uniform,
    Random,
}

/// Unlabelled times where the residual is penalised.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationSet {
    pub times: Vec<f64>,
    pub strategy: Strategy,
}

impl CollocationSet {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Collocation times over `domain`: a linspace, or sorted i.i.d. uniform draws.
///
/// `n = 0` yields an empty set, which turns the residual term off.
pub fn generate_collocation(
    domain: [f64; 2],
    n: usize,
    strategy: Strategy,
    seed: u64,
) -> Result<CollocationSet, DataError> {
    let [a, b] = domain;
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(DataError::BadWindow(a, b));
    }
    let times = match strategy {
        Strategy::Uniform => linspace(a, b, n),
        Strategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(COLLOCATION_STREAM);
            let mut t: Vec<f64> = (0..n).map(|_| rng.gen_range(a..=b)).collect();
            t.sort_by(f64::total_cmp);
            t
        }
    };
    Ok(CollocationSet { times, strategy })
}
