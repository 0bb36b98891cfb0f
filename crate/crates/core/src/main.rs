use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pinn_osc::harness::{
    preset, presets, run_experiment, sweep, sweep_csv, ExperimentConfig, HarnessError, RunReport, SweepParam,
};

#[derive(Parser)]
#[command(name = "pinn-osc", version, about = "Train soft-constrained PINNs on oscillator ODEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Run one of the built-in experiments.
    Preset {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the built-in experiments.
    ListPresets,
    /// Repeat an experiment over values of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// epsilon, sigma, n_data, n_collocation, lambda_g or lambda_reg
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output_dir(config: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| config.output_dir.clone()).unwrap_or_else(|| {
        let name = if config.name.is_empty() { "experiment" } else { &config.name };
        Path::new("runs").join(name)
    })
}

fn finish(report: &RunReport, dir: &Path) -> ExitCode {
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4e}"));
    println!(
        "{}: median MSE {}, min {}, max {} ({} of {} seeds ok) -> {}",
        if report.name.is_empty() { "experiment" } else { &report.name },
        fmt(report.median_mse),
        fmt(report.min_mse),
        fmt(report.max_mse),
        report.seeds.len() - report.failed_seeds(),
        report.seeds.len(),
        dir.join("report.json").display()
    );
    if report.failed_seeds() > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Run { config, out, seeds } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
                cfg.validate()?;
            }
            let dir = output_dir(&cfg, out);
            let report = run_experiment(&cfg, &dir)?;
            Ok(finish(&report, &dir))
        }
        Command::Preset { name, out } => {
            let cfg = preset(&name)?.config();
            let dir = output_dir(&cfg, out);
            let report = run_experiment(&cfg, &dir)?;
            Ok(finish(&report, &dir))
        }
        Command::ListPresets => {
            for p in presets() {
                println!("{}", p.summary());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, param, values, out } => {
            let param: SweepParam = param.parse()?;
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| output_dir(&cfg, None).join(format!("sweep-{}", param.name())));
            let rows = sweep(&cfg, param, &values, &dir)?;
            print!("{}", sweep_csv(&rows));
            let failed = rows.iter().any(|r| r.failed_seeds > 0);
            Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
