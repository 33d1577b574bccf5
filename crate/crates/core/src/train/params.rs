use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelFamily};

/// Initial lengthscale on normalized inputs.
pub const INIT_LENGTHSCALE: f64 = 0.2;

/// Kernel and noise hyperparameters on the log scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub log_lengthscales: Vec<f64>,
    pub log_signal_variance: f64,
    pub log_noise_variance: f64,
}

impl HyperParams {
    pub fn from_natural(lengthscales: &[f64], signal_variance: f64, noise_variance: f64) -> Result<Self> {
        let all = lengthscales.iter().chain([&signal_variance, &noise_variance]);
        if lengthscales.is_empty() || all.into_iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument("hyperparameters must be positive and finite".into()));
        }
        Ok(Self {
            log_lengthscales: lengthscales.iter().map(|l| l.ln()).collect(),
            log_signal_variance: signal_variance.ln(),
            log_noise_variance: noise_variance.ln(),
        })
    }

    /// Lengthscales of 0.2 with unit signal and noise variances.
    pub fn default_init(dim: usize) -> Self {
        Self::from_natural(&vec![INIT_LENGTHSCALE; dim.max(1)], 1.0, 1.0).expect("valid defaults")
    }

    pub fn dim(&self) -> usize {
        self.log_lengthscales.len()
    }

    pub fn lengthscales(&self) -> Vec<f64> {
        self.log_lengthscales.iter().map(|v| v.exp()).collect()
    }

    pub fn signal_variance(&self) -> f64 {
        self.log_signal_variance.exp()
    }

    pub fn noise_variance(&self) -> f64 {
        self.log_noise_variance.exp()
    }

    /// Flat vector `[log λ_1, …, log λ_D, log σ_f², log σ²]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.log_lengthscales.clone();
        v.push(self.log_signal_variance);
        v.push(self.log_noise_variance);
        v
    }

    pub fn from_vec(v: &[f64]) -> Result<Self> {
        if v.len() < 3 || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("parameter vector must be finite with length D + 2".into()));
        }
        let d = v.len() - 2;
        Ok(Self { log_lengthscales: v[..d].to_vec(), log_signal_variance: v[d], log_noise_variance: v[d + 1] })
    }

    pub fn kernel(&self, family: &KernelFamily) -> Result<Kernel> {
        let ls = self.lengthscales();
        let sv = self.signal_variance();
        if ls.iter().chain([&sv]).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NumericalFailure("hyperparameters overflowed".into()));
        }
        Kernel::new(family.clone(), ls, sv)
    }
}
