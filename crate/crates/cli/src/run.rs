//! fit, predict and sample.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use iff_core::data::{load_csv, load_inputs_csv, metrics, normalize_split, sample_gp_prior_limited, sample_gp_prior_rff, Dataset, Metrics, Normalization};
use iff_core::features::{build_grid, default_epsilon};
use iff_core::gp::PredictiveMarginals;
use iff_core::kernels::Kernel;
use iff_core::model::{Model, Posterior};
use iff_core::precompute::{load_summary, provenance_hash, save_summary, DataSummary};
use iff_core::train::{fit_with_summary, FitReport, FitSetup, HyperParams, Method, ModelSpec, INIT_LENGTHSCALE};
use iff_core::{Error, Execution, Inputs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Config, EpsSetting, SyntheticConfig};
use crate::modelfile::{ModelFile, FORMAT_VERSION, SUMMARY_FILE};

/// Largest synthetic set drawn by dense Cholesky; larger ones use random features.
pub const DENSE_SAMPLE_LIMIT: usize = 10_000;
const RFF_SAMPLE_FEATURES: usize = 2_000;

/// Generating kernel and noise of a synthetic config on the raw scale.
pub fn synthetic_truth(s: &SyntheticConfig) -> Result<(Kernel, f64), Error> {
    let k = Kernel::isotropic(s.family.clone(), s.dim, s.lengthscale, s.signal_variance)?;
    Ok((k, s.signal_variance / s.snr))
}

pub fn synthetic_data(s: &SyntheticConfig) -> Result<Dataset, Error> {
    let w = s.resolved_width();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let x = Inputs::new((0..s.n * s.dim).map(|_| rng.random_range(-w / 2.0..w / 2.0)).collect(), s.dim)?;
    let (k, noise) = synthetic_truth(s)?;
    let y = if s.n <= DENSE_SAMPLE_LIMIT {
        sample_gp_prior_limited(&x, &k, noise, s.seed, DENSE_SAMPLE_LIMIT)?
    } else {
        sample_gp_prior_rff(&x, &k, noise, RFF_SAMPLE_FEATURES, s.seed)?
    };
    Dataset::new(x, y)
}

/// Raw dataset described by the config.
pub fn load_data(cfg: &Config) -> Result<Dataset, Error> {
    match (&cfg.data.csv, &cfg.data.synthetic) {
        (Some(path), _) => {
            let cols: Vec<&str> = cfg.data.x_columns.iter().map(String::as_str).collect();
            load_csv(path, &cols, &cfg.data.y_column)
        }
        (None, Some(s)) => synthetic_data(s),
        (None, None) => Err(Error::Config("no data source".into())),
    }
}

/// Per-dimension values from a list of length one or `dim`.
fn broadcast(name: &str, v: &[f64], dim: usize) -> Result<Vec<f64>, Error> {
    match v.len() {
        1 => Ok(vec![v[0]; dim]),
        n if n == dim => Ok(v.to_vec()),
        n => Err(Error::Config(format!("{name} has {n} values for {dim} input dimensions"))),
    }
}

pub fn resolve_eps(cfg: &Config, x: &Inputs) -> Result<Vec<f64>, Error> {
    match &cfg.features.eps {
        EpsSetting::Auto(_) => default_epsilon(x),
        EpsSetting::Values(v) => broadcast("features.eps", v, x.dim()),
    }
}

pub fn initial_params(cfg: &Config, dim: usize) -> Result<HyperParams, Error> {
    let init = &cfg.kernel.init;
    let ls = match &init.lengthscales {
        Some(v) => broadcast("kernel.init.lengthscales", v, dim)?,
        None => vec![INIT_LENGTHSCALE; dim],
    };
    HyperParams::from_natural(&ls, init.signal_variance, init.noise_variance)
}

#[derive(Serialize)]
struct Report<'a> {
    /// The config as run, with automatic spacing replaced by its values.
    config: Config,
    resolved_eps: Option<Vec<f64>>,
    fit: &'a FitReport,
    learned_lengthscales: Vec<f64>,
    learned_signal_variance: f64,
    learned_noise_variance: f64,
    test_metrics: Metrics,
    n_train: usize,
    n_test: usize,
    train_indices: &'a [usize],
    test_indices: &'a [usize],
    normalization: &'a Normalization,
    summary_hash: Option<String>,
    cache_hit: bool,
    threads: usize,
}

pub struct FitOptions {
    pub outdir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub exec: Execution,
    pub threads: usize,
}

pub fn cmd_fit(cfg: &Config, opts: &FitOptions) -> Result<(), Error> {
    let raw = load_data(cfg)?;
    let dim = raw.x.dim();
    let split = normalize_split(&raw, cfg.data.train_fraction, cfg.data.split_seed)?;
    let init = initial_params(cfg, dim)?;

    let mut resolved_eps = None;
    let mut cached: Option<DataSummary> = None;
    let mut hash = None;
    let mut load_seconds = 0.0;
    let model = match cfg.method {
        Method::Iff => {
            let eps = resolve_eps(cfg, &split.train.x)?;
            let f = &cfg.features;
            let grid = build_grid(f.per_dim_count, &eps, dim, f.mask, f.target_pairs)?;
            resolved_eps = Some(eps);
            let h = provenance_hash(&split.train.x, &split.train.y, &grid);
            if let Some(dir) = &opts.cache_dir {
                let path = dir.join(format!("{h}.bin"));
                if path.exists() {
                    let started = Instant::now();
                    cached = Some(load_summary(&path, &h)?);
                    load_seconds = started.elapsed().as_secs_f64();
                    log::info!("summary cache hit: {}", path.display());
                }
            }
            hash = Some(h);
            ModelSpec::Iff { grid, spectral: cfg.kernel.spectral, chunk_size: f.chunk_size }
        }
        Method::SgprKmeans => ModelSpec::SgprKmeans { inducing: cfg.inducing_points },
        Method::Exact => ModelSpec::exact(),
    };
    let cache_hit = cached.is_some();
    let setup = FitSetup { family: cfg.kernel.family.clone(), model: model.clone(), opt: (&cfg.optimizer).into(), init, exec: opts.exec };
    let fitted = fit_with_summary(&split.train.x, &split.train.y, &setup, cached)?;
    let mut report = fitted.report;
    report.precompute_seconds += load_seconds;
    log::info!(
        "objective {:.6} after {} iterations (precompute {:.3}s)",
        report.objective,
        report.iterations,
        report.precompute_seconds
    );

    fs::create_dir_all(&opts.outdir)?;
    let posterior = match &model {
        ModelSpec::Iff { grid, spectral, .. } => {
            let summary = fitted.summary.expect("feature fit keeps its summary");
            save_summary(&summary, &opts.outdir.join(SUMMARY_FILE))?;
            if let (Some(dir), false) = (&opts.cache_dir, cache_hit) {
                fs::create_dir_all(dir)?;
                save_summary(&summary, &dir.join(format!("{}.bin", summary.provenance_hash())))?;
            }
            Posterior::Iff { grid: grid.clone(), spectral: *spectral, summary }
        }
        ModelSpec::SgprKmeans { .. } => Posterior::Sgpr {
            inducing: fitted.inducing.clone().expect("inducing points kept"),
            x: split.train.x.clone(),
            y: split.train.y.clone(),
        },
        ModelSpec::Exact { dense_limit } => Posterior::Exact { x: split.train.x.clone(), y: split.train.y.clone(), dense_limit: *dense_limit },
    };
    let params = report.final_params.clone();
    let model = Model { family: cfg.kernel.family.clone(), params: params.clone(), normalization: split.normalization.clone(), posterior };

    let pred = if split.test.is_empty() {
        PredictiveMarginals::default()
    } else {
        model.predict_normalized(&split.test.x)?
    };
    let raw_test_y: Vec<f64> = split.test_indices.iter().map(|&i| raw.y[i]).collect();
    let test_metrics = metrics(&pred, &raw_test_y, &split.normalization)?;
    log::info!("test rmse {:.6} nlpd {:.6}", test_metrics.rmse, test_metrics.nlpd);

    let x_columns = cfg.x_columns();
    let raw_test_x = raw.x.select(&split.test_indices);
    write_table(&opts.outdir.join("test.csv"), &x_columns, &[&cfg.data.y_column], &raw_test_x, &[&raw_test_y])?;

    let file = ModelFile {
        format_version: FORMAT_VERSION,
        method: cfg.method,
        family: cfg.kernel.family.clone(),
        spectral: cfg.kernel.spectral,
        params: params.clone(),
        normalization: split.normalization.clone(),
        x_columns,
        y_column: cfg.data.y_column.clone(),
        grid: match &model.posterior {
            Posterior::Iff { grid, .. } => Some(grid.clone()),
            _ => None,
        },
        summary_hash: hash.clone(),
        summary_file: hash.as_ref().map(|_| PathBuf::from(SUMMARY_FILE)),
        inducing: fitted.inducing,
        train: match cfg.method {
            Method::Iff => None,
            _ => Some(split.train.clone()),
        },
    };
    file.write(&opts.outdir.join("model.json"))?;

    let mut resolved = cfg.clone();
    if let Some(eps) = &resolved_eps {
        resolved.features.eps = EpsSetting::Values(eps.clone());
    }
    let report_out = Report {
        config: resolved,
        resolved_eps,
        fit: &report,
        learned_lengthscales: params.lengthscales(),
        learned_signal_variance: params.signal_variance(),
        learned_noise_variance: params.noise_variance(),
        test_metrics,
        n_train: split.train.len(),
        n_test: split.test.len(),
        train_indices: &split.train_indices,
        test_indices: &split.test_indices,
        normalization: &split.normalization,
        summary_hash: hash,
        cache_hit,
        threads: opts.threads,
    };
    let text = serde_json::to_string_pretty(&report_out).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(opts.outdir.join("report.json"), text)?;
    Ok(())
}

pub fn cmd_predict(model_path: &Path, input: &Path, output: &Path, summary: Option<&Path>) -> Result<(), Error> {
    let file = ModelFile::read(model_path)?;
    let x_columns = file.x_columns.clone();
    let cols: Vec<&str> = x_columns.iter().map(String::as_str).collect();
    let model = file.into_model(model_path, summary)?;
    let x = load_inputs_csv(input, &cols)?;
    let pred = if x.is_empty() { PredictiveMarginals::default() } else { model.predict(&x)? };
    write_table(output, &x_columns, &["mean", "variance"], &x, &[&pred.mean, &pred.variance])
}

pub fn cmd_sample(cfg: &Config, output: &Path) -> Result<(), Error> {
    let s = cfg.data.synthetic.as_ref().ok_or_else(|| Error::Config("sample needs data.synthetic".into()))?;
    let d = synthetic_data(s)?;
    write_table(output, &cfg.x_columns(), &[&cfg.data.y_column], &d.x, &[&d.y])
}

/// CSV with input columns followed by extra columns, full precision.
pub fn write_table<S: AsRef<str>>(path: &Path, x_names: &[S], extra_names: &[&str], x: &Inputs, extra: &[&[f64]]) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    let header: Vec<&str> = x_names.iter().map(AsRef::as_ref).chain(extra_names.iter().copied()).collect();
    w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
    for (i, row) in x.rows().enumerate() {
        let rec: Vec<String> = row.iter().copied().chain(extra.iter().map(|c| c[i])).map(|v| format!("{v:?}")).collect();
        w.write_record(&rec).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
