//! Diagnostic subcommands writing CSV tables and a manifest.

use std::path::Path;

use iff_core::data::Normalization;
use iff_core::diagnostics::{epsilon_sweep, fmt, gap_curve, rate_check, timing_harness, EpsRule, Table};
use iff_core::kernels::{BaseFamily, Kernel, KernelFamily};
use iff_core::train::Method;
use iff_core::{Error, Execution};

use crate::config::{Config, EpsSetting};
use crate::run::{initial_params, load_data, synthetic_truth};

pub fn cmd_gap_curve(cfg: &Config, m_list: &[usize], outdir: &Path, exec: Execution) -> Result<(), Error> {
    let raw = load_data(cfg)?;
    let data = Normalization::fit(&raw)?.apply(&raw)?;
    let rule = match &cfg.features.eps {
        EpsSetting::Auto(_) => EpsRule::Default,
        EpsSetting::Values(v) if v.len() == 1 => EpsRule::Fixed(vec![v[0]; data.x.dim()]),
        EpsSetting::Values(v) => EpsRule::Fixed(v.clone()),
    };
    let rows = gap_curve(&data, &cfg.kernel.family, m_list, &rule, &(&cfg.optimizer).into(), exec)?;
    let mut t = Table::new(
        "gap_curve",
        "(L - F) / N at learned hyperparameters against feature count",
        &["m", "gap_per_n", "wall_seconds", "objective", "log_marginal", "bound_ok", "lengthscales", "noise_variance", "error"],
    );
    for r in rows {
        let (ls, noise) = match &r.params {
            Some(p) => (p.lengthscales().iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(" "), fmt(p.noise_variance())),
            None => (String::new(), String::new()),
        };
        t.push([
            r.m.to_string(),
            fmt(r.gap_per_n),
            fmt(r.wall_seconds),
            fmt(r.objective),
            fmt(r.log_marginal),
            r.bound_ok.to_string(),
            ls,
            noise,
            r.error.unwrap_or_default(),
        ]);
    }
    t.write(outdir)
}

/// Sweep at the generating hyperparameters (synthetic data) or the initial
/// ones (CSV data), both on the normalized scale. Bandwidths are multiples of
/// the inverse of the smallest lengthscale.
pub fn cmd_eps_sweep(cfg: &Config, bandwidths: &[f64], eps_widths: &[f64], outdir: &Path, exec: Execution) -> Result<(), Error> {
    let raw = load_data(cfg)?;
    let norm = Normalization::fit(&raw)?;
    let data = norm.apply(&raw)?;
    let dim = data.x.dim();
    let y2 = norm.y_scale * norm.y_scale;
    let (kernel, noise) = match &cfg.data.synthetic {
        Some(s) => {
            let (k, noise) = synthetic_truth(s)?;
            let ls = k.lengthscales().iter().zip(&norm.x_scale).map(|(l, s)| l / s).collect();
            (Kernel::new(cfg.kernel.family.clone(), ls, k.signal_variance() / y2)?, noise / y2)
        }
        None => {
            let p = initial_params(cfg, dim)?;
            (p.kernel(&cfg.kernel.family)?, p.noise_variance())
        }
    };
    let lmin = kernel.lengthscales().iter().cloned().fold(f64::INFINITY, f64::min);
    let scaled: Vec<f64> = bandwidths.iter().map(|b| b / lmin).collect();
    let rows = epsilon_sweep(&data, &kernel, noise, &scaled, eps_widths, exec)?;
    let mut t = Table::new(
        "eps_sweep",
        "gap per point over covered bandwidth and spacing times data range; marked rows are at 0.95",
        &["bandwidth_per_lengthscale", "bandwidth", "eps_width", "eps", "m", "gap_per_n", "bound_ok", "marked"],
    );
    for r in rows {
        t.push([
            fmt(r.bandwidth * lmin),
            fmt(r.bandwidth),
            fmt(r.eps_width),
            fmt(r.eps),
            r.m.to_string(),
            fmt(r.gap_per_n),
            r.bound_ok.to_string(),
            r.marked.to_string(),
        ]);
    }
    t.write(outdir)
}

/// Tail exponent of a Matérn family, `2ν`.
pub fn tail_exponent(family: &KernelFamily) -> Option<f64> {
    let base = match family {
        KernelFamily::Matern12 => BaseFamily::Matern12,
        KernelFamily::Matern32 => BaseFamily::Matern32,
        KernelFamily::Matern52 => BaseFamily::Matern52,
        _ => return None,
    };
    base.nu().map(|nu| 2.0 * nu)
}

pub fn cmd_rate_check(family: &KernelFamily, m_list: &[usize], eps0: f64, q: Option<f64>, outdir: &Path) -> Result<(), Error> {
    let q = q
        .or_else(|| tail_exponent(family))
        .ok_or_else(|| Error::Config(format!("give --q for {}", family.name())))?;
    let kernel = Kernel::new(family.clone(), vec![1.0], 1.0)?;
    let r = rate_check(&kernel, m_list, eps0, q)?;
    let desc = format!(
        "relative trace against feature count for q = {q}; fitted slope {}, predicted {}",
        fmt(r.fitted_slope),
        fmt(r.predicted_slope)
    );
    let mut t = Table::new("rate_check", &desc, &["m", "eps", "relative_trace", "used"]);
    for row in &r.rows {
        t.push([row.m.to_string(), fmt(row.eps), fmt(row.relative_trace), row.used.to_string()]);
    }
    println!("fitted slope {:.4} predicted {:.4}", r.fitted_slope, r.predicted_slope);
    t.write(outdir)
}

pub fn cmd_timing(n_list: &[usize], m: usize, method: Method, seed: u64, outdir: &Path, exec: Execution) -> Result<(), Error> {
    let rows = timing_harness(n_list, m, method, seed, exec)?;
    let mut t = Table::new(
        "timing",
        "median precompute and per-step seconds against data size",
        &["n", "precompute_seconds", "mean_step_seconds"],
    );
    for r in rows {
        t.push([r.n.to_string(), fmt(r.precompute_seconds), fmt(r.mean_step_seconds)]);
    }
    t.write(outdir)
}
