use std::f64::consts::PI;

use faer::Mat;

use super::{ObjectiveParts, ObjectiveValue, PredictiveMarginals, VariationalState};
use crate::error::{Error, Result};
use crate::features::{feature_precisions, FrequencyGrid, KuuDiag};
use crate::kernels::SpectralDensity;
use crate::linalg::{aat, mat_mul, mat_vec, Cholesky};
use crate::precompute::DataSummary;

/// Prior covariance of the inducing variables.
#[derive(Clone, Debug)]
pub enum FeaturePrior {
    /// Independent features given by their precisions `1 / K_uu[m, m]`.
    /// A zero precision marks a feature that carries no information.
    Diagonal { precision: Vec<f64> },
    /// A general positive definite `K_uu`.
    Dense(Mat<f64>),
}

impl From<&KuuDiag> for FeaturePrior {
    fn from(k: &KuuDiag) -> Self {
        FeaturePrior::Diagonal { precision: k.precisions() }
    }
}

impl FeaturePrior {
    pub fn len(&self) -> usize {
        match self {
            FeaturePrior::Diagonal { precision } => precision.len(),
            FeaturePrior::Dense(k) => k.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Whitened `Φ_w = L⁻¹ Φ L⁻ᵀ` and `ȳ_w = L⁻¹ ȳ`, plus the dense factor if any.
fn whiten(prior: &FeaturePrior, phi: &Mat<f64>, ybar: &[f64]) -> Result<(Mat<f64>, Vec<f64>, Option<Cholesky>)> {
    let m = prior.len();
    if phi.nrows() != m || phi.ncols() != m || ybar.len() != m {
        return Err(Error::InvalidArgument(format!(
            "prior has {m} features but the summary has {}",
            ybar.len()
        )));
    }
    match prior {
        FeaturePrior::Diagonal { precision } => {
            if precision.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidArgument("feature precisions must be finite and nonnegative".into()));
            }
            let r: Vec<f64> = precision.iter().map(|p| p.sqrt()).collect();
            let phi_w = Mat::from_fn(m, m, |i, j| r[i] * phi[(i, j)] * r[j]);
            let ybar_w = ybar.iter().zip(&r).map(|(y, r)| y * r).collect();
            Ok((phi_w, ybar_w, None))
        }
        FeaturePrior::Dense(kuu) => {
            let chol = Cholesky::factor(kuu.as_ref())?;
            let mut t = phi.clone();
            chol.solve_lower_in_place(&mut t);
            let mut t = t.transpose().to_owned();
            chol.solve_lower_in_place(&mut t);
            crate::linalg::symmetrize(&mut t);
            let ybar_w = chol.solve_lower(ybar);
            Ok((t, ybar_w, Some(chol)))
        }
    }
}

/// The collapsed objective from whitened statistics.
pub(crate) fn collapsed_from_whitened(
    phi_w: &Mat<f64>,
    ybar_w: &[f64],
    nu2: f64,
    n: usize,
    noise: f64,
    trace_t: f64,
) -> Result<ObjectiveValue> {
    if !(noise.is_finite() && noise > 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance must be positive, got {noise}")));
    }
    let m = phi_w.nrows();
    let inv = 1.0 / noise;
    let a = Mat::from_fn(m, m, |i, j| inv * phi_w[(i, j)] + if i == j { 1.0 } else { 0.0 });
    let chol = Cholesky::factor(a.as_ref())?;
    let c = chol.solve_lower(ybar_w);
    let c2: f64 = c.iter().map(|v| v * v).sum();
    let nf = n as f64;
    let negative_trace = trace_t < 0.0;
    if negative_trace {
        log::warn!("trace estimate {trace_t:e} is negative; penalty clamped to zero");
    }
    let parts = ObjectiveParts {
        log_det: -0.5 * (chol.log_det() + nf * noise.ln()),
        quad: -0.5 * (inv * nu2 - inv * inv * c2),
        trace: -0.5 * trace_t.max(0.0) * inv,
        constant: -0.5 * nf * (2.0 * PI).ln(),
    };
    let value = ObjectiveValue::from_parts(parts, negative_trace);
    if !value.total.is_finite() {
        return Err(Error::NumericalFailure("collapsed objective is not finite".into()));
    }
    Ok(value)
}

/// Collapsed objective from raw summaries `Φ = K_uf K_ufᵀ`, `ȳ = K_uf y`, `ν² = yᵀy`.
pub fn collapsed_objective_raw(
    phi: &Mat<f64>,
    ybar: &[f64],
    nu2: f64,
    n: usize,
    prior: &FeaturePrior,
    noise: f64,
    trace_t: f64,
) -> Result<ObjectiveValue> {
    let (phi_w, ybar_w, _) = whiten(prior, phi, ybar)?;
    collapsed_from_whitened(&phi_w, &ybar_w, nu2, n, noise, trace_t)
}

/// Collapsed objective of precomputed data summaries; the cost does not depend on `N`.
pub fn collapsed_objective(summary: &DataSummary, prior: &FeaturePrior, noise: f64, trace_t: f64) -> Result<ObjectiveValue> {
    collapsed_objective_raw(summary.phi(), summary.ybar(), summary.nu2(), summary.n(), prior, noise, trace_t)
}

/// Feature-model objective for a given density and noise level, with the
/// trace estimate `N σ_f² − N ε^D Σ s(z)` taken over the full symmetric grid.
pub fn iff_objective(
    summary: &DataSummary,
    grid: &FrequencyGrid,
    density: &SpectralDensity,
    signal_variance: f64,
    noise: f64,
) -> Result<ObjectiveValue> {
    let precision = feature_precisions(grid, density)?;
    let n = summary.n() as f64;
    let trace_t = n * signal_variance - 0.5 * n * precision.iter().sum::<f64>();
    collapsed_objective(summary, &FeaturePrior::Diagonal { precision }, noise, trace_t)
}

/// Optimal `q(u)` from `K_uf` and targets.
pub fn optimal_qu(prior: &FeaturePrior, kuf: &Mat<f64>, y: &[f64], noise: f64) -> Result<VariationalState> {
    if kuf.ncols() != y.len() {
        return Err(Error::InvalidArgument("K_uf columns do not match the targets".into()));
    }
    optimal_qu_inner(prior, &aat(kuf.as_ref()), &mat_vec(kuf.as_ref(), y), noise)
}

/// Optimal `q(u)` from precomputed summaries.
pub fn optimal_qu_from_summary(prior: &FeaturePrior, summary: &DataSummary, noise: f64) -> Result<VariationalState> {
    optimal_qu_inner(prior, summary.phi(), summary.ybar(), noise)
}

fn optimal_qu_inner(prior: &FeaturePrior, phi: &Mat<f64>, ybar: &[f64], noise: f64) -> Result<VariationalState> {
    if !(noise.is_finite() && noise > 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance must be positive, got {noise}")));
    }
    if let FeaturePrior::Diagonal { precision } = prior {
        if precision.iter().any(|p| *p <= 0.0) {
            return Err(Error::NumericalFailure("a feature has zero prior precision".into()));
        }
    }
    let (phi_w, ybar_w, chol) = whiten(prior, phi, ybar)?;
    let m = phi_w.nrows();
    let a = Mat::from_fn(m, m, |i, j| phi_w[(i, j)] / noise + if i == j { 1.0 } else { 0.0 });
    let a_chol = Cholesky::factor(a.as_ref())?;
    let a_inv = a_chol.inverse();
    let w = a_chol.solve(&ybar_w);
    // Σ_u = L A⁻¹ Lᵀ and μ_u = σ⁻² L A⁻¹ ȳ_w.
    let (mut sigma_u, mu_u) = match (prior, chol) {
        (FeaturePrior::Diagonal { precision }, _) => {
            let l: Vec<f64> = precision.iter().map(|p| 1.0 / p.sqrt()).collect();
            (
                Mat::from_fn(m, m, |i, j| l[i] * a_inv[(i, j)] * l[j]),
                w.iter().zip(&l).map(|(w, l)| l * w / noise).collect(),
            )
        }
        (FeaturePrior::Dense(_), Some(c)) => {
            let la = mat_mul(c.l(), a_inv.as_ref());
            let s = mat_mul(la.as_ref(), c.l().transpose());
            let mu = mat_vec(c.l(), &w).into_iter().map(|v| v / noise).collect();
            (s, mu)
        }
        (FeaturePrior::Dense(_), None) => unreachable!("dense priors are always factorized"),
    };
    crate::linalg::symmetrize(&mut sigma_u);
    Ok(VariationalState { mu_u, sigma_u })
}

/// Predictive marginals of the latent function at test points, given the
/// features `K_u*` (one column per point) and prior variances `k(x*, x*)`.
pub fn sparse_predict(state: &VariationalState, prior: &FeaturePrior, kustar: &Mat<f64>, kstar_diag: &[f64]) -> Result<PredictiveMarginals> {
    let m = prior.len();
    if state.mu_u.len() != m || state.sigma_u.nrows() != m || kustar.nrows() != m {
        return Err(Error::InvalidArgument("state, prior and test features disagree on the feature count".into()));
    }
    if kustar.ncols() != kstar_diag.len() {
        return Err(Error::InvalidArgument("test features and prior variances disagree on the point count".into()));
    }
    // B = K_uu⁻¹ K_u*
    let b = match prior {
        FeaturePrior::Diagonal { precision } => Mat::from_fn(m, kustar.ncols(), |i, j| precision[i] * kustar[(i, j)]),
        FeaturePrior::Dense(kuu) => Cholesky::factor(kuu.as_ref())?.solve_mat(kustar),
    };
    let sb = mat_mul(state.sigma_u.as_ref(), b.as_ref());
    let mut mean = Vec::with_capacity(kstar_diag.len());
    let mut variance = Vec::with_capacity(kstar_diag.len());
    for (j, kss) in kstar_diag.iter().enumerate() {
        let (mut mu, mut q, mut s) = (0.0, 0.0, 0.0);
        for i in 0..m {
            mu += b[(i, j)] * state.mu_u[i];
            q += kustar[(i, j)] * b[(i, j)];
            s += b[(i, j)] * sb[(i, j)];
        }
        mean.push(mu);
        variance.push(kss - q + s);
    }
    Ok(PredictiveMarginals { mean, variance })
}
