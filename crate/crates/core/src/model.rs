//! Fitted posteriors and prediction at new inputs.

use crate::data::Normalization;
use crate::error::{Error, Result};
use crate::features::{feature_matrix, feature_precisions, FrequencyGrid};
use crate::gp::{exact_predict_limited, optimal_qu_from_summary, sgpr_predict, sparse_predict, FeaturePrior, PredictiveMarginals};
use crate::inputs::Inputs;
use crate::kernels::{KernelFamily, SpectralDensity, SpectralMode};
use crate::precompute::DataSummary;
use crate::train::HyperParams;

/// What each method keeps from training in order to predict.
#[derive(Clone, Debug)]
pub enum Posterior {
    Iff { grid: FrequencyGrid, spectral: SpectralMode, summary: DataSummary },
    Sgpr { inducing: Inputs, x: Inputs, y: Vec<f64> },
    Exact { x: Inputs, y: Vec<f64>, dense_limit: usize },
}

/// A trained model on normalized data together with its normalization.
#[derive(Clone, Debug)]
pub struct Model {
    pub family: KernelFamily,
    pub params: HyperParams,
    pub normalization: Normalization,
    pub posterior: Posterior,
}

impl Model {
    /// Latent predictive marginals at normalized inputs.
    pub fn predict_latent(&self, xstar: &Inputs) -> Result<PredictiveMarginals> {
        if xstar.dim() != self.params.dim() {
            return Err(Error::Schema(format!(
                "inputs have dimension {}, model expects {}",
                xstar.dim(),
                self.params.dim()
            )));
        }
        let kernel = self.params.kernel(&self.family)?;
        let noise = self.params.noise_variance();
        match &self.posterior {
            Posterior::Iff { grid, spectral, summary } => {
                let density = SpectralDensity::for_kernel(&kernel, *spectral)?;
                // Features whose density underflowed carry no information.
                let precision = feature_precisions(grid, &density)?;
                let keep: Vec<usize> = (0..precision.len()).filter(|&i| precision[i] > 0.0).collect();
                let prior = FeaturePrior::Diagonal { precision: keep.iter().map(|&i| precision[i]).collect() };
                let state = optimal_qu_from_summary(&prior, &summary.select_features(&keep), noise)?;
                let full = feature_matrix(grid, xstar)?;
                let kus = faer::Mat::from_fn(keep.len(), xstar.len(), |i, j| full[(keep[i], j)]);
                sparse_predict(&state, &prior, &kus, &vec![kernel.signal_variance(); xstar.len()])
            }
            Posterior::Sgpr { inducing, x, y } => sgpr_predict(x, y, &kernel, noise, inducing, xstar),
            Posterior::Exact { x, y, dense_limit } => exact_predict_limited(x, y, &kernel, noise, xstar, *dense_limit),
        }
    }

    /// Predictive marginals of observations at raw inputs, on the raw scale.
    pub fn predict(&self, xstar_raw: &Inputs) -> Result<PredictiveMarginals> {
        let x = self.normalization.apply_x(xstar_raw)?;
        let p = self.predict_normalized(&x)?;
        Ok(self.normalization.invert_predictions(&p))
    }

    /// Predictive marginals of observations (noise included) at normalized inputs.
    pub fn predict_normalized(&self, xstar: &Inputs) -> Result<PredictiveMarginals> {
        Ok(self.predict_latent(xstar)?.with_noise(self.params.noise_variance()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_grid, Mask};
    use crate::precompute::compute_summaries;

    #[test]
    fn feature_model_tracks_a_smooth_target() {
        let x = Inputs::from_1d((0..200).map(|i| -1.0 + i as f64 / 100.0).collect());
        let y: Vec<f64> = x.rows().map(|r| (2.0 * r[0]).sin()).collect();
        let grid = build_grid(60, &[0.95 / 2.0], 1, Mask::FullRectangular, None).unwrap();
        let summary = compute_summaries(&x, &y, &grid, 1000).unwrap();
        let m = Model {
            family: KernelFamily::SquaredExponential,
            params: HyperParams::from_natural(&[0.5], 1.0, 1e-4).unwrap(),
            normalization: Normalization::identity(1),
            posterior: Posterior::Iff { grid, spectral: SpectralMode::Closed, summary },
        };
        let p = m.predict(&Inputs::from_1d(vec![0.3, -0.6])).unwrap();
        assert!((p.mean[0] - 0.6f64.sin()).abs() < 1e-2);
        assert!((p.mean[1] + 1.2f64.sin()).abs() < 1e-2);
        assert!(m.predict(&Inputs::new(vec![0.0, 0.0], 2).unwrap()).is_err());
    }
}
