use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::kmeans::kmeans;
use super::lbfgs::{maximize, LbfgsOptions};
use super::params::HyperParams;
use crate::error::{Error, Result};
use crate::features::FrequencyGrid;
use crate::gp::{exact_log_marginal_limited, iff_objective, DEFAULT_DENSE_LIMIT};
use crate::inputs::Inputs;
use crate::kernels::{KernelFamily, SpectralDensity, SpectralMode};
use crate::parallel::Execution;
use crate::precompute::{compute_summaries_with, DataSummary, DEFAULT_CHUNK_SIZE};

/// Standard deviation of the log-parameter perturbation used for restarts.
pub const RESTART_SCALE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Iff,
    SgprKmeans,
    Exact,
}

/// What is being fitted.
#[derive(Clone, Debug)]
pub enum ModelSpec {
    Iff { grid: FrequencyGrid, spectral: SpectralMode, chunk_size: usize },
    SgprKmeans { inducing: usize },
    Exact { dense_limit: usize },
}

impl ModelSpec {
    pub fn iff(grid: FrequencyGrid) -> Self {
        ModelSpec::Iff { grid, spectral: SpectralMode::Closed, chunk_size: DEFAULT_CHUNK_SIZE }
    }

    pub fn exact() -> Self {
        ModelSpec::Exact { dense_limit: DEFAULT_DENSE_LIMIT }
    }

    pub fn method(&self) -> Method {
        match self {
            ModelSpec::Iff { .. } => Method::Iff,
            ModelSpec::SgprKmeans { .. } => Method::SgprKmeans,
            ModelSpec::Exact { .. } => Method::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptConfig {
    pub max_iters: usize,
    pub tol: f64,
    /// Extra starts beyond the initial point.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self { max_iters: 200, tol: 1e-8, restarts: 0, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct FitSetup {
    pub family: KernelFamily,
    pub model: ModelSpec,
    pub opt: OptConfig,
    pub init: HyperParams,
    pub exec: Execution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: Method,
    pub final_params: HyperParams,
    /// Objective at `final_params`.
    pub objective: f64,
    pub objective_trace: Vec<(usize, f64)>,
    pub precompute_seconds: f64,
    pub per_step_seconds: Vec<f64>,
    pub converged: bool,
    pub restarts_used: usize,
    /// Number of summary computations performed during the fit.
    pub precompute_calls: usize,
    pub iterations: usize,
}

impl FitReport {
    pub fn mean_step_seconds(&self) -> f64 {
        if self.per_step_seconds.is_empty() {
            0.0
        } else {
            self.per_step_seconds.iter().sum::<f64>() / self.per_step_seconds.len() as f64
        }
    }
}

/// A fit plus what is needed to predict with it.
#[derive(Clone, Debug)]
pub struct Fit {
    pub report: FitReport,
    pub summary: Option<DataSummary>,
    pub inducing: Option<Inputs>,
}

/// Training objective as a function of hyperparameters.
pub enum Objective<'a> {
    Iff { summary: &'a DataSummary, grid: &'a FrequencyGrid, spectral: SpectralMode },
    Sgpr { x: &'a Inputs, y: &'a [f64], z: &'a Inputs, exec: Execution },
    Exact { x: &'a Inputs, y: &'a [f64], dense_limit: usize },
}

impl Objective<'_> {
    pub fn evaluate(&self, family: &KernelFamily, params: &HyperParams) -> Result<f64> {
        let kernel = params.kernel(family)?;
        let noise = params.noise_variance();
        if !(noise.is_finite() && noise > 0.0) {
            return Err(Error::NumericalFailure(format!("noise variance {noise} out of range")));
        }
        match self {
            Objective::Iff { summary, grid, spectral } => {
                let density = SpectralDensity::for_kernel(&kernel, *spectral)?;
                Ok(iff_objective(summary, grid, &density, kernel.signal_variance(), noise)?.total)
            }
            Objective::Sgpr { x, y, z, exec } => {
                Ok(crate::gp::sgpr_objective_with(x, y, &kernel, noise, z, *exec)?.total)
            }
            Objective::Exact { x, y, dense_limit } => exact_log_marginal_limited(x, y, &kernel, noise, *dense_limit),
        }
    }

    /// Objective over the flat log-parameter vector.
    pub fn evaluate_vec(&self, family: &KernelFamily, v: &[f64]) -> Result<f64> {
        self.evaluate(family, &HyperParams::from_vec(v)?)
    }
}

/// Fits hyperparameters by quasi-Newton ascent on the method's objective.
pub fn fit(x: &Inputs, y: &[f64], setup: &FitSetup) -> Result<Fit> {
    fit_with_summary(x, y, setup, None)
}

/// As [`fit`], reusing a previously computed summary for the feature method.
pub fn fit_with_summary(x: &Inputs, y: &[f64], setup: &FitSetup, cached: Option<DataSummary>) -> Result<Fit> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("{} inputs but {} targets", x.len(), y.len())));
    }
    if setup.init.dim() != x.dim() {
        return Err(Error::InvalidArgument(format!(
            "initial parameters have {} lengthscales for {}-dimensional inputs",
            setup.init.dim(),
            x.dim()
        )));
    }
    let started = Instant::now();
    let mut precompute_calls = 0;
    let (summary, inducing) = match &setup.model {
        ModelSpec::Iff { grid, chunk_size, .. } => {
            let s = match cached {
                Some(s) => s,
                None => {
                    precompute_calls += 1;
                    compute_summaries_with(x, y, grid, *chunk_size, setup.exec)?
                }
            };
            (Some(s), None)
        }
        ModelSpec::SgprKmeans { inducing } => (None, Some(kmeans(x, *inducing, setup.opt.seed, 100)?)),
        ModelSpec::Exact { .. } => (None, None),
    };
    let precompute_seconds = started.elapsed().as_secs_f64();

    let objective = match &setup.model {
        ModelSpec::Iff { grid, spectral, .. } => Objective::Iff {
            summary: summary.as_ref().expect("summary computed"),
            grid,
            spectral: *spectral,
        },
        ModelSpec::SgprKmeans { .. } => Objective::Sgpr {
            x,
            y,
            z: inducing.as_ref().expect("inducing points placed"),
            exec: setup.exec,
        },
        ModelSpec::Exact { dense_limit } => Objective::Exact { x, y, dense_limit: *dense_limit },
    };

    let starts = restart_points(&setup.init, setup.opt.restarts, setup.opt.seed);
    let opts = LbfgsOptions { max_iters: setup.opt.max_iters, tol: setup.opt.tol, ..Default::default() };
    let family = &setup.family;
    let runs = setup.exec.map(starts.len(), |i| {
        maximize(|v: &[f64]| objective.evaluate_vec(family, v), &starts[i], &opts)
    });

    let mut best: Option<super::lbfgs::LbfgsResult> = None;
    let mut used = 0;
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok(r) => {
                used += 1;
                if best.as_ref().is_none_or(|b| r.value > b.value) {
                    best = Some(r);
                }
            }
            Err(e) if i == 0 => return Err(e),
            Err(e) => log::warn!("restart {i} failed: {e}"),
        }
    }
    let best = best.expect("first start succeeded");
    let report = FitReport {
        method: setup.model.method(),
        final_params: HyperParams::from_vec(&best.x)?,
        objective: best.value,
        objective_trace: best.trace,
        precompute_seconds,
        per_step_seconds: best.step_seconds,
        converged: best.converged,
        restarts_used: used,
        precompute_calls,
        iterations: best.iterations,
    };
    Ok(Fit { report, summary, inducing })
}

/// The initial point followed by `restarts` seeded Gaussian perturbations of it.
fn restart_points(init: &HyperParams, restarts: usize, seed: u64) -> Vec<Vec<f64>> {
    let base = init.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, RESTART_SCALE).expect("valid scale");
    let mut out = vec![base.clone()];
    for _ in 0..restarts {
        out.push(base.iter().map(|v| v + normal.sample(&mut rng)).collect());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_grid, Mask};
    use crate::gp::exact_log_marginal;
    use crate::kernels::Kernel;
    use rand::Rng;

    fn data(n: usize, seed: u64) -> (Inputs, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Inputs::from_1d((0..n).map(|_| rng.random_range(-2.0..2.0)).collect());
        let y = x.rows().map(|r| (3.0 * r[0]).sin() + 0.3 * rng.random_range(-1.0..1.0)).collect();
        (x, y)
    }

    fn setup(model: ModelSpec, max_iters: usize) -> FitSetup {
        FitSetup {
            family: KernelFamily::SquaredExponential,
            model,
            opt: OptConfig { max_iters, ..Default::default() },
            init: HyperParams::default_init(1),
            exec: Execution::Sequential,
        }
    }

    #[test]
    fn zero_iterations_return_initial_point() {
        let (x, y) = data(40, 1);
        let f = fit(&x, &y, &setup(ModelSpec::exact(), 0)).unwrap();
        assert_eq!(f.report.final_params, HyperParams::default_init(1));
        assert_eq!(f.report.objective_trace.len(), 1);
        let k = Kernel::new(KernelFamily::SquaredExponential, vec![0.2], 1.0).unwrap();
        assert_eq!(f.report.objective, exact_log_marginal(&x, &y, &k, 1.0).unwrap());
    }

    #[test]
    fn feature_fit_precomputes_once_and_improves() {
        let (x, y) = data(200, 2);
        let grid = build_grid(40, &[0.95 / 4.0], 1, Mask::FullRectangular, None).unwrap();
        let f = fit(&x, &y, &setup(ModelSpec::iff(grid), 100)).unwrap();
        assert_eq!(f.report.precompute_calls, 1);
        let first = f.report.objective_trace[0].1;
        assert!(f.report.objective > first);
        for w in f.report.objective_trace.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn restarts_are_deterministic() {
        let (x, y) = data(60, 3);
        let mut s = setup(ModelSpec::SgprKmeans { inducing: 8 }, 30);
        s.opt.restarts = 2;
        s.opt.seed = 11;
        let a = fit(&x, &y, &s).unwrap().report;
        let b = fit(&x, &y, &s).unwrap().report;
        assert_eq!(a.final_params, b.final_params);
        assert_eq!(a.objective_trace, b.objective_trace);
        assert_eq!(a.restarts_used, 3);
    }
}
