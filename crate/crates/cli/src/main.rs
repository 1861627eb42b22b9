use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lagdelay::experiment::{
    covariance_map, output, parse_grid, Experiment, ExperimentFile, McConfig,
};
use lagdelay::{BasisMatrix, BasisParams, Convention, Error, Result};

#[derive(Parser)]
#[command(
    name = "lagdelay",
    version,
    about = "Laguerre-domain delay estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign for every noise model in the config.
    McRun {
        #[arg(long)]
        config: PathBuf,
        /// Override the trial count from the config.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run one seeded trial per noise model and dump its distortion and noise estimates.
    Trial {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Laguerre-domain covariance of a noise model over a grid of p.
    CovarianceMap {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "0.1:0.9:0.1")]
        p_grid: String,
        #[arg(long)]
        out: PathBuf,
        /// Noise block to use (defaults to the first).
        #[arg(long)]
        model: Option<String>,
        #[arg(long = "L")]
        basis_len: Option<usize>,
        #[arg(long = "T")]
        horizon: Option<usize>,
    },
    /// Sampled Laguerre functions as CSV.
    BasisDump {
        #[arg(long)]
        p: f64,
        #[arg(long = "L")]
        basis_len: usize,
        #[arg(long = "T")]
        horizon: usize,
        #[arg(long, value_enum, default_value = "strictly-proper")]
        convention: ConventionArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ConventionArg {
    StrictlyProper,
    Shifted,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::StrictlyProper => Convention::StrictlyProper,
            ConventionArg::Shifted => Convention::Shifted,
        }
    }
}

fn campaigns(path: &Path, trials: Option<usize>) -> Result<Vec<McConfig>> {
    let mut file = ExperimentFile::load(path)?;
    if let Some(n) = trials {
        file.trials = n;
    }
    file.campaigns()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::McRun {
            config,
            trials,
            out,
        } => {
            let mut summaries = Vec::new();
            for cfg in campaigns(&config, trials)? {
                let summary = Experiment::new(&cfg)?.run(Default::default())?;
                for row in &summary.rows {
                    eprintln!(
                        "{:<6} {:<5} trials={} mean={:.4} var={:.4} bias={:.4}",
                        row.model,
                        row.reduction.as_str(),
                        row.trials,
                        row.mean,
                        row.var,
                        row.bias
                    );
                }
                summaries.push(summary);
            }
            output::write_summaries(&summaries, &out)
        }
        Command::Trial { config, seed, out } => {
            for cfg in campaigns(&config, Some(1))? {
                let detail = Experiment::new(&cfg)?.trial_detail(seed)?;
                let prefix = format!("{}_", cfg.model);
                output::write_trial(&detail, &cfg, &out, &prefix)?;
                eprintln!(
                    "{}: tau_raw={:.4} tau_reduced={} lag_error={:.4} time_error={:.4}",
                    cfg.model,
                    detail.record.tau_hat_raw,
                    detail
                        .record
                        .tau_hat_reduced
                        .map_or("-".to_string(), |t| format!("{t:.4}")),
                    detail.lag_error,
                    detail.time_error
                );
            }
            Ok(())
        }
        Command::CovarianceMap {
            config,
            p_grid,
            out,
            model,
            basis_len,
            horizon,
        } => {
            let file = ExperimentFile::load(&config)?;
            let named = match &model {
                Some(name) => file
                    .noise
                    .iter()
                    .find(|n| &n.name == name)
                    .ok_or_else(|| Error::Config(format!("no noise block named `{name}`")))?,
                None => &file.noise[0],
            };
            let horizon = horizon.unwrap_or(file.horizon);
            let basis_len = basis_len.unwrap_or(file.basis_len);
            let noise = named.spec.resolve(horizon, file.convention)?;
            let grid = parse_grid(&p_grid)?;
            let blocks = covariance_map(&noise, basis_len, horizon, &grid, file.convention)?;
            output::write_covmap(&blocks, &out)
        }
        Command::BasisDump {
            p,
            basis_len,
            horizon,
            convention,
            out,
        } => {
            let convention = Convention::from(convention);
            let basis = BasisMatrix::new(BasisParams::new(p, basis_len, horizon)?, convention)?;
            eprintln!("convention: {}", convention.as_str());
            output::write_basis(&basis, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = serde_json::json!({
                "error": err.kind(),
                "message": err.to_string(),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
