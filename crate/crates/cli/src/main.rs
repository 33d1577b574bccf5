//! `iff`: fit, predict and diagnose feature-based GP regression models.

mod config;
mod diag;
mod modelfile;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use iff_core::kernels::KernelFamily;
use iff_core::train::Method;
use iff_core::{Error, Execution};

use crate::config::Config;

#[derive(Parser)]
#[command(name = "iff", version, about = "Gaussian process regression with integrated Fourier features")]
struct Cli {
    /// Worker threads for precompute and diagnostics.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,
    /// Overrides the optimizer, split and synthetic seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write report.json, model.json and test.csv.
    Fit {
        config: PathBuf,
        /// Directory of precomputed summaries keyed by provenance hash.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Predictive mean and variance at the inputs of a CSV file.
    Predict {
        model: PathBuf,
        input: PathBuf,
        output: PathBuf,
        /// Use this summary cache instead of the one beside the model.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Look the summary up as `<hash>.bin` in this directory.
        #[arg(long, conflicts_with = "summary")]
        cache_dir: Option<PathBuf>,
    },
    /// Write the synthetic dataset of a config to CSV.
    Sample { config: PathBuf, output: PathBuf },
    /// Gap between marginal likelihood and feature objective against M.
    GapCurve {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0usize, 20, 40, 80, 160])]
        m_list: Vec<usize>,
    },
    /// Gap over bandwidth and spacing at fixed hyperparameters.
    EpsSweep {
        config: PathBuf,
        /// Covered half-bandwidths in units of the inverse lengthscale.
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.8, 3.0])]
        bandwidths: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.95, 2.0])]
        eps_widths: Vec<f64>,
    },
    /// Decay of the trace term under the shrinking spacing schedule.
    RateCheck {
        #[arg(long, default_value = "matern12")]
        family: String,
        #[arg(long, value_delimiter = ',', default_values_t = [16usize, 32, 64, 128, 256, 512, 1024])]
        m_list: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        eps0: f64,
        /// Tail exponent; defaults to 2ν for Matérn families.
        #[arg(long)]
        q: Option<f64>,
    },
    /// Precompute and per-step wall time against N.
    Timing {
        #[arg(long, value_delimiter = ',', default_values_t = [10_000usize, 100_000])]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        m: usize,
        #[arg(long, default_value = "iff")]
        method: String,
    },
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<Config, Error> {
    let mut cfg = config::load(path)?;
    if let Some(s) = seed {
        cfg.optimizer.seed = s;
        cfg.data.split_seed = s;
        if let Some(syn) = cfg.data.synthetic.as_mut() {
            syn.seed = s;
        }
    }
    Ok(cfg)
}

fn parse_name<T: serde::de::DeserializeOwned>(what: &str, name: &str) -> Result<T, Error> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| Error::Config(format!("unknown {what} {name:?}")))
}

fn run(cli: Cli) -> Result<(), Error> {
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    if cli.threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let exec = Execution::from_threads(cli.threads);
    let outdir = |cfg: Option<&Config>| {
        cli.outdir.clone().or_else(|| cfg.map(|c| c.output.dir.clone())).unwrap_or_else(|| PathBuf::from("out"))
    };
    match &cli.command {
        Command::Fit { config, cache_dir } => {
            let cfg = load_config(config, cli.seed)?;
            let opts = run::FitOptions { outdir: outdir(Some(&cfg)), cache_dir: cache_dir.clone(), exec, threads: cli.threads };
            run::cmd_fit(&cfg, &opts)
        }
        Command::Predict { model, input, output, summary, cache_dir } => {
            let summary = match (summary, cache_dir) {
                (Some(p), _) => Some(p.clone()),
                (None, Some(dir)) => {
                    let hash = modelfile::ModelFile::read(model)?
                        .summary_hash
                        .ok_or_else(|| Error::Config("--cache-dir applies to feature models only".into()))?;
                    Some(dir.join(format!("{hash}.bin")))
                }
                (None, None) => None,
            };
            run::cmd_predict(model, input, output, summary.as_deref())
        }
        Command::Sample { config, output } => run::cmd_sample(&load_config(config, cli.seed)?, output),
        Command::GapCurve { config, m_list } => {
            let cfg = load_config(config, cli.seed)?;
            diag::cmd_gap_curve(&cfg, m_list, &outdir(Some(&cfg)), exec)
        }
        Command::EpsSweep { config, bandwidths, eps_widths } => {
            let cfg = load_config(config, cli.seed)?;
            diag::cmd_eps_sweep(&cfg, bandwidths, eps_widths, &outdir(Some(&cfg)), exec)
        }
        Command::RateCheck { family, m_list, eps0, q } => {
            let family: KernelFamily = parse_name("kernel family", family)?;
            diag::cmd_rate_check(&family, m_list, *eps0, *q, &outdir(None))
        }
        Command::Timing { n_list, m, method } => {
            let method: Method = parse_name("method", method)?;
            diag::cmd_timing(n_list, *m, method, cli.seed.unwrap_or(0), &outdir(None), exec)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
