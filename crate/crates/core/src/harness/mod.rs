//! Experiment orchestration: configs, presets, seed runs, sweeps and the
//! CSV/JSON artifacts they leave on disk.

mod config;
mod presets;

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataError;
use crate::network::forward_value;
use crate::problems::Oscillator;
use crate::reference::ReferenceError;
use crate::training::{test_grid, train, LossBreakdown, RunMetrics, TrainError, TrainOutcome};

pub use config::{CollocationSpec, DataSpec, ExperimentConfig, NetworkSpec};
pub use presets::{preset, presets, Preset};

/// Caps the number of seeds trained in parallel.
pub const THREADS_ENV: &str = "PINN_OSC_THREADS";

pub const LOSS_HEADER: &str = "epoch,total,data,governing,initial,boundary,regularization";
pub const PREDICTION_HEADER: &str = "t,u_pred,u_ref";
pub const SWEEP_HEADER: &str = "value,median_mse,min_mse,max_mse";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Data(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub status: SeedStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<RunMetrics>,
    /// File names relative to the report directory.
    pub loss_history: Option<String>,
    pub predictions: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedReport>,
    pub median_mse: Option<f64>,
    pub min_mse: Option<f64>,
    pub max_mse: Option<f64>,
}

impl RunReport {
    pub fn failed_seeds(&self) -> usize {
        self.seeds.iter().filter(|s| s.status == SeedStatus::Failed).count()
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, HarnessError> {
        let path = dir.join("report.json");
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(&path, json + "\n").map_err(io_err(&path))?;
        Ok(path)
    }
}

/// Median of a sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.to_vec();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Loss history as CSV text, one row per epoch starting at 1.
pub fn loss_csv(history: &[LossBreakdown]) -> String {
    let mut s = String::with_capacity(history.len() * 150);
    s.push_str(LOSS_HEADER);
    s.push('\n');
    for (i, h) in history.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            i + 1,
            h.total,
            h.data,
            h.governing,
            h.initial,
            h.boundary,
            h.regularization
        );
    }
    s
}

/// Parses [`loss_csv`] output back into breakdowns.
pub fn read_loss_csv(text: &str) -> Result<Vec<LossBreakdown>, HarnessError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| HarnessError::Config(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != LOSS_HEADER {
        return Err(HarnessError::Config("unexpected loss history header".into()));
    }
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| HarnessError::Config(e.to_string()))?;
            let f = |i: usize| -> Result<f64, HarnessError> {
                r[i].parse().map_err(|_| HarnessError::Config(format!("bad number {:?}", &r[i])))
            };
            Ok(LossBreakdown {
                total: f(1)?,
                data: f(2)?,
                governing: f(3)?,
                initial: f(4)?,
                boundary: f(5)?,
                regularization: f(6)?,
            })
        })
        .collect()
}

fn prediction_csv(outcome: &TrainOutcome, cfg: &crate::training::TrainConfig) -> Result<String, HarnessError> {
    let mut s = String::from(PREDICTION_HEADER);
    s.push('\n');
    for t in test_grid(cfg) {
        let pred = forward_value(outcome.params.as_slice(), &cfg.network, t).map_err(TrainError::from)?;
        let truth = cfg.reference.sample_u(t)?;
        let _ = writeln!(s, "{t:.16e},{pred:.16e},{truth:.16e}");
    }
    Ok(s)
}

fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

fn run_seed(config: &ExperimentConfig, seed: u64, reference: &crate::reference::Trajectory, out: &Path) -> SeedReport {
    let loss_name = format!("loss_{seed}.csv");
    let pred_name = format!("prediction_{seed}.csv");
    let mut report = SeedReport {
        seed,
        status: SeedStatus::Failed,
        error: None,
        metrics: None,
        loss_history: None,
        predictions: None,
    };
    let write = |name: &str, text: &str| {
        let path = out.join(name);
        fs::write(&path, text).map_err(io_err(&path))
    };
    let result = config.train_config(seed, reference).map(|cfg| {
        let outcome = train(&cfg);
        (cfg, outcome)
    });
    match result {
        Ok((cfg, Ok(outcome))) => {
            let written = write(&loss_name, &loss_csv(&outcome.history))
                .and_then(|_| prediction_csv(&outcome, &cfg))
                .and_then(|p| write(&pred_name, &p));
            match written {
                Ok(()) => {
                    log::info!("{} seed {seed}: test MSE {:.3e}", config.name, outcome.metrics.test_mse);
                    report.status = SeedStatus::Ok;
                    report.metrics = Some(outcome.metrics);
                    report.loss_history = Some(loss_name);
                    report.predictions = Some(pred_name);
                }
                Err(e) => report.error = Some(e.to_string()),
            }
        }
        Ok((_, Err(e))) => {
            log::warn!("{} seed {seed} failed: {e}", config.name);
            if let TrainError::Diverged { history, .. } = &e {
                if write(&loss_name, &loss_csv(history)).is_ok() {
                    report.loss_history = Some(loss_name);
                }
            }
            report.error = Some(e.to_string());
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    report
}

/// Trains every seed of `config`, writing per-seed CSVs and `report.json` into `out`.
///
/// Per-seed training failures are recorded in the report rather than returned.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let reference = config.reference()?;
    // Fail on unreadable data files before creating any output.
    config.train_config(config.seeds[0], &reference)?;
    fs::create_dir_all(out).map_err(io_err(out))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count().min(config.seeds.len()))
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let seeds: Vec<SeedReport> =
        pool.install(|| config.seeds.par_iter().map(|&s| run_seed(config, s, &reference, out)).collect());

    let mses: Vec<f64> = seeds.iter().filter_map(|s| s.metrics.as_ref().map(|m| m.test_mse)).collect();
    let report = RunReport {
        name: config.name.clone(),
        config: config.clone(),
        median_mse: median(&mses),
        min_mse: mses.iter().copied().reduce(f64::min),
        max_mse: mses.iter().copied().reduce(f64::max),
        seeds,
    };
    report.write(out)?;
    Ok(report)
}

/// Config fields a sweep can vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Epsilon,
    Sigma,
    NData,
    NCollocation,
    LambdaG,
    LambdaReg,
}

impl FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "epsilon" => Self::Epsilon,
            "sigma" => Self::Sigma,
            "n_data" => Self::NData,
            "n_collocation" => Self::NCollocation,
            "lambda_g" => Self::LambdaG,
            "lambda_reg" => Self::LambdaReg,
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown sweep parameter {other:?} (expected epsilon, sigma, n_data, n_collocation, lambda_g or lambda_reg)"
                )))
            }
        })
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::Epsilon => "epsilon",
            Self::Sigma => "sigma",
            Self::NData => "n_data",
            Self::NCollocation => "n_collocation",
            Self::LambdaG => "lambda_g",
            Self::LambdaReg => "lambda_reg",
        }
    }

    /// Copy of `config` with this field set to `value`.
    pub fn apply(self, config: &ExperimentConfig, value: f64) -> Result<ExperimentConfig, HarnessError> {
        let mut c = config.clone();
        let count = |v: f64| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(HarnessError::Config(format!("{}: {v} is not a point count", self.name())))
            }
        };
        match self {
            Self::Epsilon => match &mut c.problem.oscillator {
                Oscillator::VanDerPol { epsilon, .. } => *epsilon = value,
                other => {
                    return Err(HarnessError::Config(format!("epsilon sweep needs van_der_pol, not {}", other.name())))
                }
            },
            Self::Sigma => c.data.sigma = value,
            Self::NData => c.data.n = count(value)?,
            Self::NCollocation => c.collocation.n = count(value)?,
            Self::LambdaG => c.weights.lambda_g = value,
            Self::LambdaReg => c.weights.lambda_reg = value,
        }
        c.name = format!("{}-{}={value}", config.name, self.name());
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub median_mse: Option<f64>,
    pub min_mse: Option<f64>,
    pub max_mse: Option<f64>,
    pub failed_seeds: usize,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "NaN".to_string(), |v| format!("{v:.16e}"));
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.value, opt(r.median_mse), opt(r.min_mse), opt(r.max_mse));
    }
    s
}

/// One experiment per value, each in `out/<param>=<value>/`, aggregated into `out/sweep.csv`.
pub fn sweep(
    config: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    out: &Path,
) -> Result<Vec<SweepRow>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one value".into()));
    }
    let configs = values.iter().map(|&v| param.apply(config, v)).collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(values.len());
    for (c, &value) in configs.iter().zip(values) {
        let report = run_experiment(c, &out.join(format!("{}={value}", param.name())))?;
        rows.push(SweepRow {
            value,
            median_mse: report.median_mse,
            min_mse: report.min_mse,
            max_mse: report.max_mse,
            failed_seeds: report.failed_seeds(),
        });
    }
    let path = out.join("sweep.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    w.write_all(sweep_csv(&rows).as_bytes()).and_then(|_| w.flush()).map_err(io_err(&path))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even_samples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn loss_csv_round_trips() {
        let history = vec![
            LossBreakdown { total: 0.1 + 0.2, data: 1.0 / 3.0, governing: 1e-300, ..Default::default() },
            LossBreakdown { total: std::f64::consts::PI, regularization: 12768.75, ..Default::default() },
        ];
        let text = loss_csv(&history);
        assert!(text.starts_with("epoch,total,data,governing,initial,boundary,regularization\n1,"));
        assert_eq!(read_loss_csv(&text).unwrap(), history);
    }

    #[test]
    fn sweep_parameter_names() {
        for name in ["epsilon", "sigma", "n_data", "n_collocation", "lambda_g", "lambda_reg"] {
            assert_eq!(name.parse::<SweepParam>().unwrap().name(), name);
        }
        assert!(matches!("beta".parse::<SweepParam>(), Err(HarnessError::Config(_))));
    }

    #[test]
    fn sweep_rejects_bad_values() {
        let cfg = preset("primer-1pt").unwrap().config();
        assert!(SweepParam::NData.apply(&cfg, 2.5).is_err());
        assert!(SweepParam::Epsilon.apply(&cfg, 1.0).is_err());
        assert!(sweep(&cfg, SweepParam::Sigma, &[], Path::new("/nonexistent")).is_err());
        let c = SweepParam::NCollocation.apply(&cfg, 0.0).unwrap();
        assert_eq!(c.collocation.n, 0);
        assert_eq!(c.effective_weights().lambda_g, 0.0);
    }
}
