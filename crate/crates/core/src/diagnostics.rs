//! Empirical checks of approximation quality and cost, emitted as tables.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{sample_gp_prior_rff, Dataset, Normalization};
use crate::error::{Error, Result};
use crate::features::{build_grid, default_epsilon, FrequencyGrid, Mask};
use crate::gp::{exact_log_marginal_limited, iff_objective, DEFAULT_DENSE_LIMIT};
use crate::inputs::Inputs;
use crate::kernels::{Kernel, KernelFamily, SpectralDensity};
use crate::parallel::Execution;
use crate::precompute::{compute_summaries_with, DEFAULT_CHUNK_SIZE};
use crate::train::{fit, kmeans, lbfgs::fd_gradient, FitSetup, HyperParams, Method, ModelSpec, Objective, OptConfig};

/// Slack allowed when checking that the feature objective stays below the
/// marginal likelihood, per observation.
pub const BOUND_SLACK_PER_POINT: f64 = 1e-3;

/// Spacing rule for the frequency grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsRule {
    /// `0.95 / range` per dimension.
    Default,
    Fixed(Vec<f64>),
}

impl EpsRule {
    pub fn resolve(&self, x: &Inputs) -> Result<Vec<f64>> {
        match self {
            EpsRule::Default => default_epsilon(x),
            EpsRule::Fixed(e) => Ok(e.clone()),
        }
    }
}

/// Grid with `m` real features (`m / 2` pairs) of smallest norm.
pub fn grid_for_features(m: usize, eps: &[f64]) -> Result<FrequencyGrid> {
    if m % 2 != 0 {
        return Err(Error::InvalidArgument(format!("feature count {m} must be even")));
    }
    if m == 0 {
        return Ok(FrequencyGrid::empty(eps.to_vec()));
    }
    let dim = eps.len();
    if dim == 1 {
        return build_grid(m, eps, 1, Mask::FullRectangular, None);
    }
    let pairs = m / 2;
    let mut p = 2usize;
    while p.pow(dim as u32) / 2 < pairs {
        p += 2;
    }
    build_grid(p, eps, dim, Mask::Spherical, Some(pairs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub m: usize,
    pub gap_per_n: f64,
    pub wall_seconds: f64,
    pub objective: f64,
    pub log_marginal: f64,
    /// Whether the objective stayed below the marginal likelihood plus slack.
    pub bound_ok: bool,
    pub params: Option<HyperParams>,
    pub error: Option<String>,
}

/// `(ℒ − 𝔉) / N` at hyperparameters learned with `m` features, per row of `m_list`.
///
/// A failing row records its error and the other rows still run.
pub fn gap_curve(
    data: &Dataset,
    family: &KernelFamily,
    m_list: &[usize],
    eps_rule: &EpsRule,
    opt: &OptConfig,
    exec: Execution,
) -> Result<Vec<GapRow>> {
    let n = data.len();
    if n > DEFAULT_DENSE_LIMIT {
        return Err(Error::InvalidArgument(format!("{n} points exceed the dense limit")));
    }
    let eps = eps_rule.resolve(&data.x)?;
    let rows = exec.map(m_list.len(), |i| {
        let m = m_list[i];
        let started = Instant::now();
        let result = (|| -> Result<(f64, f64, HyperParams)> {
            let grid = grid_for_features(m, &eps)?;
            let setup = FitSetup {
                family: family.clone(),
                model: ModelSpec::iff(grid),
                opt: opt.clone(),
                init: HyperParams::default_init(data.x.dim()),
                exec: Execution::Sequential,
            };
            let f = fit(&data.x, &data.y, &setup)?;
            let p = f.report.final_params.clone();
            let kernel = p.kernel(family)?;
            let l = exact_log_marginal_limited(&data.x, &data.y, &kernel, p.noise_variance(), DEFAULT_DENSE_LIMIT)?;
            Ok((f.report.objective, l, p))
        })();
        let wall_seconds = started.elapsed().as_secs_f64();
        match result {
            Ok((obj, l, p)) => GapRow {
                m,
                gap_per_n: (l - obj) / n as f64,
                wall_seconds,
                objective: obj,
                log_marginal: l,
                bound_ok: obj <= l + BOUND_SLACK_PER_POINT * n as f64,
                params: Some(p),
                error: None,
            },
            Err(e) => GapRow {
                m,
                gap_per_n: f64::NAN,
                wall_seconds,
                objective: f64::NAN,
                log_marginal: f64::NAN,
                bound_ok: false,
                params: None,
                error: Some(e.to_string()),
            },
        }
    });
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Half-width of the covered frequency band, `P ε / 2`.
    pub bandwidth: f64,
    /// Spacing times data range.
    pub eps_width: f64,
    pub eps: f64,
    pub m: usize,
    pub gap_per_n: f64,
    pub bound_ok: bool,
    /// True for the column at the default 0.95.
    pub marked: bool,
}

/// Gap at fixed hyperparameters over a grid of bandwidths and spacings.
///
/// Each bandwidth `B` and spacing product `εW` give `ε = εW / W` and the
/// smallest even per-dimension count with `P ε / 2 ≥ B`.
pub fn epsilon_sweep(
    data: &Dataset,
    kernel: &Kernel,
    noise: f64,
    bandwidths: &[f64],
    eps_widths: &[f64],
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    let n = data.len();
    if n > DEFAULT_DENSE_LIMIT {
        return Err(Error::InvalidArgument(format!("{n} points exceed the dense limit")));
    }
    let widths: Vec<f64> = data.x.ranges().iter().map(|(lo, hi)| hi - lo).collect();
    if widths.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::DegenerateInput("inputs have zero range".into()));
    }
    let l = exact_log_marginal_limited(&data.x, &data.y, kernel, noise, DEFAULT_DENSE_LIMIT)?;
    let density = SpectralDensity::closed(kernel);
    let cells: Vec<(f64, f64)> = bandwidths.iter().flat_map(|b| eps_widths.iter().map(move |e| (*b, *e))).collect();
    let rows = exec.map(cells.len(), |i| -> Result<SweepRow> {
        let (b, ew) = cells[i];
        let eps: Vec<f64> = widths.iter().map(|w| ew / w).collect();
        let e_min = eps.iter().cloned().fold(f64::INFINITY, f64::min);
        let p = (2.0 * (b / e_min / 2.0).ceil()).max(2.0) as usize;
        let grid = build_grid(p, &eps, data.x.dim(), Mask::FullRectangular, None)?;
        let summary = compute_summaries_with(&data.x, &data.y, &grid, DEFAULT_CHUNK_SIZE, Execution::Sequential)?;
        let obj = iff_objective(&summary, &grid, &density, kernel.signal_variance(), noise)?.total;
        Ok(SweepRow {
            bandwidth: b,
            eps_width: ew,
            eps: eps[0],
            m: grid.feature_count(),
            gap_per_n: (l - obj) / n as f64,
            bound_ok: obj <= l + BOUND_SLACK_PER_POINT * n as f64,
            marked: (ew - 0.95).abs() < 1e-12,
        })
    });
    rows.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub m: usize,
    pub eps: f64,
    /// `t̂ / (N σ_f²)`.
    pub relative_trace: f64,
    /// False when the value was nonpositive and left out of the fit.
    pub used: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub rows: Vec<RateRow>,
    pub exponent: f64,
    pub predicted_slope: f64,
    pub fitted_slope: f64,
}

/// Decay of the trace estimate when `ε = ε_0 M^{-p}` with `p = (q+1)/(q+3)`.
///
/// The relative trace does not depend on the inputs, only on the grid and
/// the density, so no data are needed.
pub fn rate_check(kernel: &Kernel, m_list: &[usize], eps0: f64, q: f64) -> Result<RateCheck> {
    if kernel.dim() != 1 {
        return Err(Error::InvalidArgument("rate check is one-dimensional".into()));
    }
    if !(q > 0.0) || !(eps0 > 0.0) {
        return Err(Error::InvalidArgument("q and eps0 must be positive".into()));
    }
    let p = (q + 1.0) / (q + 3.0);
    let density = SpectralDensity::closed(kernel);
    let x = Inputs::from_1d(vec![0.0]);
    let mut rows = Vec::new();
    for &m in m_list {
        let eps = eps0 * (m as f64).powf(-p);
        let grid = grid_for_features(m, &[eps])?;
        let t = crate::gp::trace_term(kernel, &x, &grid, &density)? / kernel.signal_variance();
        let used = t > 0.0;
        if !used {
            log::warn!("relative trace {t:e} at M = {m} is not positive; excluded from the fit");
        }
        rows.push(RateRow { m, eps, relative_trace: t, used });
    }
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.used).map(|r| ((r.m as f64).ln(), r.relative_trace.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateInput("fewer than two positive trace values".into()));
    }
    Ok(RateCheck { rows, exponent: q, predicted_slope: -2.0 * q / (q + 3.0), fitted_slope: ls_slope(&pts) })
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub precompute_seconds: f64,
    /// Median over repetitions of one objective evaluation plus its
    /// finite-difference gradient.
    pub mean_step_seconds: f64,
}

/// Repetitions behind each wall-clock figure.
pub const TIMING_REPEATS: usize = 5;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Precompute and per-step cost on synthetic 1D squared-exponential data.
///
/// `m` is the number of real features or inducing points. Inputs are spread
/// uniformly with density 10 per unit lengthscale, then normalized.
pub fn timing_harness(n_list: &[usize], m: usize, method: Method, seed: u64, exec: Execution) -> Result<Vec<TimingRow>> {
    let family = KernelFamily::SquaredExponential;
    let truth = Kernel::new(family.clone(), vec![1.0], 1.0)?;
    let mut out = Vec::new();
    for &n in n_list {
        let raw_x = Inputs::from_1d((0..n).map(|i| (i as f64 + 0.5) * 0.1).collect());
        let raw_y = sample_gp_prior_rff(&raw_x, &truth, 1.0 / 0.774, 2000, seed)?;
        let raw = Dataset::new(raw_x, raw_y)?;
        let norm = Normalization::fit(&raw)?;
        let data = norm.apply(&raw)?;
        let params = HyperParams::default_init(1);

        let mut pre = Vec::new();
        let mut steps = Vec::new();
        for _ in 0..TIMING_REPEATS {
            let started = Instant::now();
            let prepared = prepare(&data, m, method, seed, exec)?;
            pre.push(started.elapsed().as_secs_f64());
            let objective = prepared.objective(&data, exec);
            let started = Instant::now();
            let v = params.to_vec();
            let f = |p: &[f64]| objective.evaluate_vec(&family, p);
            f(&v)?;
            fd_gradient(&f, &v, 1e-4)?;
            steps.push(started.elapsed().as_secs_f64());
        }
        out.push(TimingRow { n, precompute_seconds: median(pre), mean_step_seconds: median(steps) });
    }
    Ok(out)
}

enum Prepared {
    Iff(crate::precompute::DataSummary, FrequencyGrid),
    Sgpr(Inputs),
    Exact,
}

impl Prepared {
    fn objective<'a>(&'a self, data: &'a Dataset, exec: Execution) -> Objective<'a> {
        match self {
            Prepared::Iff(s, g) => Objective::Iff { summary: s, grid: g, spectral: Default::default() },
            Prepared::Sgpr(z) => Objective::Sgpr { x: &data.x, y: &data.y, z, exec },
            Prepared::Exact => Objective::Exact { x: &data.x, y: &data.y, dense_limit: usize::MAX },
        }
    }
}

fn prepare(data: &Dataset, m: usize, method: Method, seed: u64, exec: Execution) -> Result<Prepared> {
    Ok(match method {
        Method::Iff => {
            let grid = grid_for_features(m, &default_epsilon(&data.x)?)?;
            let s = compute_summaries_with(&data.x, &data.y, &grid, DEFAULT_CHUNK_SIZE, exec)?;
            Prepared::Iff(s, grid)
        }
        Method::SgprKmeans => Prepared::Sgpr(kmeans(&data.x, m, seed, 20)?),
        Method::Exact => Prepared::Exact,
    })
}

/// A plot-ready table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub description: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, description: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    /// Writes `<outdir>/<name>.csv` and records the table in `manifest.json`.
    pub fn write(&self, outdir: &Path) -> Result<()> {
        fs::create_dir_all(outdir)?;
        let mut w = csv::Writer::from_path(outdir.join(format!("{}.csv", self.name)))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        w.write_record(&self.columns).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;

        let manifest_path = outdir.join("manifest.json");
        let mut manifest: Value = fs::read_to_string(&manifest_path)
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok())
            .unwrap_or_else(|| json!({ "tables": {} }));
        if !manifest.get("tables").is_some_and(Value::is_object) {
            manifest = json!({ "tables": {} });
        }
        manifest["tables"][&self.name] = json!({
            "file": format!("{}.csv", self.name),
            "description": self.description,
            "columns": self.columns,
            "rows": self.rows.len(),
        });
        fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).expect("serializable"))?;
        Ok(())
    }
}

/// Formats a float so that parsing it back gives the same value.
pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}
