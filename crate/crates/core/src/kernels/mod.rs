//! Stationary covariance functions and their spectral densities.
//!
//! Spectral densities use the ordinary-frequency transform
//! `s(xi) = ∫ k(tau) exp(-i 2π tauᵀxi) dtau`, under which `∫ s = k(0)`.

mod spectral;
mod tail;

pub use spectral::{spectral_density_dft, DftDensity, DftGrid, SpectralDensity, SpectralMode};
pub use tail::{tail_exponent_estimate, tail_mass, TailEstimate};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-dimensional radial profile shared by the ARD families and product factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFamily {
    SquaredExponential,
    Matern12,
    Matern32,
    Matern52,
}

impl BaseFamily {
    /// Unit-variance, unit-lengthscale profile `g(r)` with `g(0) = 1`.
    pub fn profile(self, r: f64) -> f64 {
        match self {
            BaseFamily::SquaredExponential => (-0.5 * r * r).exp(),
            BaseFamily::Matern12 => (-r).exp(),
            BaseFamily::Matern32 => {
                let a = 3f64.sqrt() * r;
                (1.0 + a) * (-a).exp()
            }
            BaseFamily::Matern52 => {
                let a = 5f64.sqrt() * r;
                (1.0 + a + a * a / 3.0) * (-a).exp()
            }
        }
    }

    /// Smoothness parameter for the Matérn members, `None` for the squared exponential.
    pub fn nu(self) -> Option<f64> {
        match self {
            BaseFamily::SquaredExponential => None,
            BaseFamily::Matern12 => Some(0.5),
            BaseFamily::Matern32 => Some(1.5),
            BaseFamily::Matern52 => Some(2.5),
        }
    }

    /// Spectral density of the unit profile in `dim` dimensions, evaluated at
    /// a frequency of Euclidean norm `omega`.
    pub fn unit_density(self, omega: f64, dim: usize) -> f64 {
        let d = dim as f64;
        let w2 = omega * omega;
        match self.nu() {
            None => (2.0 * std::f64::consts::PI).powf(0.5 * d) * (-2.0 * PI2 * w2).exp(),
            Some(nu) => {
                let c = 2f64.powf(d)
                    * std::f64::consts::PI.powf(0.5 * d)
                    * gamma_half(nu + 0.5 * d)
                    * (2.0 * nu).powf(nu)
                    / gamma_half(nu);
                c * (2.0 * nu + 4.0 * PI2 * w2).powf(-(nu + 0.5 * d))
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaseFamily::SquaredExponential => "squared_exponential",
            BaseFamily::Matern12 => "matern12",
            BaseFamily::Matern32 => "matern32",
            BaseFamily::Matern52 => "matern52",
        }
    }
}

const PI2: f64 = std::f64::consts::PI * std::f64::consts::PI;

/// Gamma function at positive multiples of one half.
fn gamma_half(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    debug_assert!((2.0 * x - twice).abs() < 1e-12 && twice >= 1.0);
    let mut n = twice as i64;
    let mut acc = if n % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    // Γ(x) = (x-1) Γ(x-1), bottoming out at Γ(1) = 1 or Γ(1/2) = √π.
    while n > 2 {
        n -= 2;
        acc *= n as f64 / 2.0;
    }
    acc
}

/// Kernel family. ARD families depend on the scaled Euclidean distance
/// `|tau / lambda|`; `Product` multiplies one 1D profile per input dimension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    SquaredExponential,
    Matern12,
    Matern32,
    Matern52,
    Product(Vec<BaseFamily>),
}

impl KernelFamily {
    fn base(&self) -> Option<BaseFamily> {
        match self {
            KernelFamily::SquaredExponential => Some(BaseFamily::SquaredExponential),
            KernelFamily::Matern12 => Some(BaseFamily::Matern12),
            KernelFamily::Matern32 => Some(BaseFamily::Matern32),
            KernelFamily::Matern52 => Some(BaseFamily::Matern52),
            KernelFamily::Product(_) => None,
        }
    }

    /// Per-dimension factors when the kernel separates across dimensions.
    ///
    /// The squared exponential separates for any `dim`; ARD Matérn kernels
    /// only separate in one dimension.
    pub fn factors(&self, dim: usize) -> Option<Vec<BaseFamily>> {
        match self {
            KernelFamily::Product(f) => Some(f.clone()),
            KernelFamily::SquaredExponential => Some(vec![BaseFamily::SquaredExponential; dim]),
            other if dim == 1 => other.base().map(|b| vec![b]),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            KernelFamily::Product(f) => {
                let parts: Vec<_> = f.iter().map(|b| b.name()).collect();
                format!("product({})", parts.join(","))
            }
            other => other.base().map(|b| b.name().to_string()).unwrap_or_default(),
        }
    }
}

/// A stationary covariance function with its hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    family: KernelFamily,
    lengthscales: Vec<f64>,
    signal_variance: f64,
}

impl Kernel {
    /// Builds a kernel, validating that lengthscales are positive and finite.
    ///
    /// A zero signal variance is accepted so that pure-noise data can be
    /// generated; such a kernel has an identically zero spectral density.
    pub fn new(family: KernelFamily, lengthscales: Vec<f64>, signal_variance: f64) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::InvalidArgument("kernel needs at least one lengthscale".into()));
        }
        if let Some(l) = lengthscales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidArgument(format!("lengthscale must be positive, got {l}")));
        }
        if !(signal_variance.is_finite() && signal_variance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "signal variance must be nonnegative, got {signal_variance}"
            )));
        }
        if let KernelFamily::Product(f) = &family {
            if f.len() != lengthscales.len() {
                return Err(Error::InvalidArgument(format!(
                    "product kernel has {} factors but {} lengthscales",
                    f.len(),
                    lengthscales.len()
                )));
            }
        }
        Ok(Self { family, lengthscales, signal_variance })
    }

    /// Isotropic convenience constructor.
    pub fn isotropic(family: KernelFamily, dim: usize, lengthscale: f64, signal_variance: f64) -> Result<Self> {
        Self::new(family, vec![lengthscale; dim], signal_variance)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// `k(tau)` for a difference vector `tau`.
    pub fn eval(&self, tau: &[f64]) -> Result<f64> {
        if tau.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "tau has dimension {}, kernel has {}",
                tau.len(),
                self.dim()
            )));
        }
        if tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("non-finite tau".into()));
        }
        Ok(self.eval_unchecked(tau))
    }

    /// `k(tau)` without validation; `tau` must have the kernel's dimension.
    #[inline]
    pub fn eval_unchecked(&self, tau: &[f64]) -> f64 {
        match &self.family {
            KernelFamily::Product(factors) => {
                let mut acc = self.signal_variance;
                for ((f, t), l) in factors.iter().zip(tau).zip(&self.lengthscales) {
                    acc *= f.profile((t / l).abs());
                }
                acc
            }
            family => {
                let r2: f64 = tau.iter().zip(&self.lengthscales).map(|(t, l)| (t / l) * (t / l)).sum();
                self.signal_variance * family.base().expect("non-product family").profile(r2.sqrt())
            }
        }
    }

    /// Covariance between two points given as slices.
    #[inline]
    pub fn between(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut tau = [0.0f64; 8];
        if a.len() <= tau.len() {
            for (d, t) in tau.iter_mut().enumerate().take(a.len()) {
                *t = a[d] - b[d];
            }
            self.eval_unchecked(&tau[..a.len()])
        } else {
            let tau: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            self.eval_unchecked(&tau)
        }
    }

    /// Closed-form spectral density at `xi`.
    pub fn spectral_density(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "xi has dimension {}, kernel has {}",
                xi.len(),
                self.dim()
            )));
        }
        Ok(self.spectral_density_unchecked(xi))
    }

    #[inline]
    pub(crate) fn spectral_density_unchecked(&self, xi: &[f64]) -> f64 {
        match &self.family {
            KernelFamily::Product(factors) => {
                let mut acc = self.signal_variance;
                for ((f, x), l) in factors.iter().zip(xi).zip(&self.lengthscales) {
                    acc *= l * f.unit_density((l * x).abs(), 1);
                }
                acc
            }
            family => {
                let base = family.base().expect("non-product family");
                let mut scale = self.signal_variance;
                let mut w2 = 0.0;
                for (x, l) in xi.iter().zip(&self.lengthscales) {
                    scale *= l;
                    w2 += (l * x) * (l * x);
                }
                scale * base.unit_density(w2.sqrt(), self.dim())
            }
        }
    }

    /// Same family and lengthscales with a different signal variance.
    pub fn with_signal_variance(&self, signal_variance: f64) -> Result<Self> {
        Self::new(self.family.clone(), self.lengthscales.clone(), signal_variance)
    }
}
