//! Exact and sparse Gaussian-process inference.
//!
//! Both the feature model and the inducing-point baseline reduce to the same
//! whitened collapsed objective: with `K_uu = L Lᵀ`, `Φ_w = L⁻¹ Φ L⁻ᵀ` and
//! `A = I + σ⁻² Φ_w`, every term needs one `M × M` Cholesky of `A`.

mod collapsed;
mod exact;
mod sgpr;
mod trace;

pub use collapsed::{
    collapsed_objective, collapsed_objective_raw, iff_objective, optimal_qu, optimal_qu_from_summary, sparse_predict,
    FeaturePrior,
};
pub use exact::{exact_log_marginal, exact_log_marginal_limited, exact_predict, exact_predict_limited, DEFAULT_DENSE_LIMIT};
pub use sgpr::{sgpr_inducing_objective, sgpr_predict};
pub(crate) use sgpr::sgpr_objective_with;
pub use trace::{trace_term, trace_term_elementwise};

use faer::Mat;
use serde::{Deserialize, Serialize};

/// Additive pieces of the collapsed objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParts {
    pub log_det: f64,
    pub quad: f64,
    pub trace: f64,
    pub constant: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub total: f64,
    pub parts: ObjectiveParts,
    /// Set when the trace estimate was negative and its penalty clamped to zero.
    pub negative_trace: bool,
}

impl ObjectiveValue {
    fn from_parts(parts: ObjectiveParts, negative_trace: bool) -> Self {
        let total = parts.log_det + parts.quad + parts.trace + parts.constant;
        Self { total, parts, negative_trace }
    }
}

/// Optimal Gaussian `q(u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationalState {
    pub mu_u: Vec<f64>,
    pub sigma_u: Mat<f64>,
}

/// Per-point predictive means and variances.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictiveMarginals {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl PredictiveMarginals {
    /// Marginals of noisy observations rather than the latent function.
    pub fn with_noise(mut self, noise: f64) -> Self {
        for v in &mut self.variance {
            *v += noise;
        }
        self
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}
