use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{BaseFamily, Kernel};
use crate::error::{Error, Result};

/// Relative level below which DFT densities are clamped.
pub const DFT_FLOOR_RATIO: f64 = 1e-12;

/// Edge magnitude (relative to `k(0)`) above which a DFT window is flagged as truncated.
pub const DFT_EDGE_TOLERANCE: f64 = 1e-6;

/// How the spectral density of a kernel is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMode {
    #[default]
    Closed,
    Dft,
}

/// Sampling grid used when a density is computed numerically from kernel values.
///
/// Spacing and window are expressed in units of the lengthscale of each factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DftGrid {
    pub points_per_lengthscale: usize,
    /// The window extends until the unit profile falls below this value.
    pub edge_value: f64,
}

impl Default for DftGrid {
    fn default() -> Self {
        Self { points_per_lengthscale: 64, edge_value: 1e-12 }
    }
}

/// One-dimensional spectral density computed from regular kernel samples.
#[derive(Clone, Debug)]
pub struct DftDensity {
    spacing: f64,
    width: f64,
    /// Kernel samples at `tau = j * spacing` for `j = 0..=J`.
    half_samples: Vec<f64>,
    /// Density at `xi = j / width` for `j = 0..=J`, clamped.
    table: Vec<f64>,
    floor: f64,
    truncated: bool,
}

/// Spectral density of a kernel from samples `k(tau_j)` on the grid
/// `tau_j = -width/2 + j * spacing`, `j = 0..samples.len()`.
///
/// The samples must be symmetric about zero. Values come back on the
/// frequency grid `j / width` for `j = 0..=samples.len()/2`.
pub fn spectral_density_dft(samples: &[f64], spacing: f64, width: f64) -> Result<DftDensity> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no kernel samples".into()));
    }
    if !(spacing > 0.0 && width > 0.0 && spacing.is_finite() && width.is_finite()) {
        return Err(Error::InvalidArgument("spacing and width must be positive".into()));
    }
    if samples.len() % 2 == 0 || samples.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "expected an odd number (>= 3) of samples centred on zero, got {}",
            samples.len()
        )));
    }
    let k = samples.len() - 1;
    if ((k as f64) * spacing - width).abs() > 1e-9 * width {
        return Err(Error::InvalidArgument(format!(
            "width {width} does not match {} samples at spacing {spacing}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite kernel sample".into()));
    }
    let scale = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for j in 0..samples.len() / 2 {
        if (samples[j] - samples[k - j]).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument("kernel samples are not symmetric about zero".into()));
        }
    }

    let half = k / 2;
    let center = samples[half];
    let truncated = samples[0].abs().max(samples[k].abs()) >= DFT_EDGE_TOLERANCE * center.abs() && scale > 0.0;
    if truncated {
        log::warn!("kernel window of width {width} is too narrow: edge value {:e}", samples[0]);
    }

    // Periodic DFT over `k` points; the dropped endpoint equals its mirror image.
    let mut buf: Vec<Complex<f64>> = (0..k).map(|i| Complex::new(samples[(i + half) % k], 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(k).process(&mut buf);
    let raw: Vec<f64> = buf[..=half].iter().map(|c| spacing * c.re).collect();

    let peak = raw.iter().fold(0.0f64, |m, v| m.max(*v));
    let floor = DFT_FLOOR_RATIO * peak;
    let table = raw.iter().map(|v| v.max(floor)).collect();

    Ok(DftDensity {
        spacing,
        width,
        half_samples: samples[half..].to_vec(),
        table,
        floor,
        truncated,
    })
}

impl DftDensity {
    /// Numerical density of the unit-variance profile of `family` at `lengthscale`.
    pub fn from_profile(family: BaseFamily, lengthscale: f64, grid: &DftGrid) -> Result<Self> {
        let per = grid.points_per_lengthscale.max(2) as f64;
        let mut r_max = 1.0;
        while family.profile(r_max) >= grid.edge_value && r_max < 1e4 {
            r_max += 0.5;
        }
        let half = (r_max * per).ceil() as usize;
        let spacing = lengthscale / per;
        let samples: Vec<f64> = (0..=2 * half)
            .map(|j| family.profile(((j as f64 - half as f64) / per).abs()))
            .collect();
        spectral_density_dft(&samples, spacing, 2.0 * half as f64 * spacing)
    }

    /// Density at the transform's native frequencies `j / width`.
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn frequency_step(&self) -> f64 {
        1.0 / self.width
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Highest resolved frequency, `1 / (2 * spacing)`.
    pub fn nyquist(&self) -> f64 {
        0.5 / self.spacing
    }

    /// True if the kernel had not decayed at the edge of the sampled window.
    pub fn truncation_warning(&self) -> bool {
        self.truncated
    }

    /// Kernel value at zero lag, equal to the integral of the density.
    pub fn variance(&self) -> f64 {
        self.half_samples[0]
    }

    /// Density at an arbitrary frequency: the same transform as the DFT,
    /// evaluated off the native grid, then clamped.
    pub fn eval(&self, xi: f64) -> f64 {
        let theta = 2.0 * PI * self.spacing * xi;
        let c1 = theta.cos();
        let n = self.half_samples.len() - 1;
        let mut acc = self.half_samples[0];
        let (mut prev, mut cur) = (1.0, c1);
        for j in 1..n {
            acc += 2.0 * self.half_samples[j] * cur;
            let next = 2.0 * c1 * cur - prev;
            prev = cur;
            cur = next;
        }
        if n >= 1 {
            acc += self.half_samples[n] * cur;
        }
        (self.spacing * acc).max(self.floor)
    }

    fn is_clamped(&self, xi: f64) -> bool {
        self.eval(xi) <= self.floor
    }
}

/// A spectral density attached to a kernel, in closed form or computed numerically.
#[derive(Clone, Debug)]
pub enum SpectralDensity {
    Closed(Kernel),
    /// Product of per-dimension numerical densities of unit-variance factors.
    Dft { factors: Vec<DftDensity>, signal_variance: f64 },
}

impl SpectralDensity {
    pub fn closed(kernel: &Kernel) -> Self {
        SpectralDensity::Closed(kernel.clone())
    }

    /// Numerical density for kernels that factorize across dimensions.
    pub fn dft(kernel: &Kernel, grid: &DftGrid) -> Result<Self> {
        let factors = kernel
            .family()
            .factors(kernel.dim())
            .ok_or_else(|| Error::UnsupportedFamily(format!("{} (non-separable in {}D)", kernel.family().name(), kernel.dim())))?;
        let factors = factors
            .iter()
            .zip(kernel.lengthscales())
            .map(|(f, l)| DftDensity::from_profile(*f, *l, grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectralDensity::Dft { factors, signal_variance: kernel.signal_variance() })
    }

    pub fn for_kernel(kernel: &Kernel, mode: SpectralMode) -> Result<Self> {
        match mode {
            SpectralMode::Closed => Ok(Self::closed(kernel)),
            SpectralMode::Dft => Self::dft(kernel, &DftGrid::default()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpectralDensity::Closed(k) => k.dim(),
            SpectralDensity::Dft { factors, .. } => factors.len(),
        }
    }

    /// `k(0)`, the total mass of the density.
    pub fn variance(&self) -> f64 {
        match self {
            SpectralDensity::Closed(k) => k.signal_variance(),
            SpectralDensity::Dft { factors, signal_variance } => {
                signal_variance * factors.iter().map(|f| f.variance()).product::<f64>()
            }
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, SpectralDensity::Dft { .. })
    }

    /// Highest frequency at which the density is meaningful, if bounded.
    pub fn nyquist(&self) -> Option<f64> {
        match self {
            SpectralDensity::Closed(_) => None,
            SpectralDensity::Dft { factors, .. } => factors.iter().map(|f| f.nyquist()).reduce(f64::min),
        }
    }

    /// `s(xi)`; `xi` must have the density's dimension.
    #[inline]
    pub fn eval(&self, xi: &[f64]) -> f64 {
        debug_assert_eq!(xi.len(), self.dim());
        match self {
            SpectralDensity::Closed(k) => k.spectral_density_unchecked(xi),
            SpectralDensity::Dft { factors, signal_variance } => {
                factors.iter().zip(xi).fold(*signal_variance, |acc, (f, x)| acc * f.eval(*x))
            }
        }
    }

    /// True where a numerical density sits on its clamp floor.
    pub fn is_clamped(&self, xi: &[f64]) -> bool {
        match self {
            SpectralDensity::Closed(_) => false,
            SpectralDensity::Dft { factors, .. } => factors.iter().zip(xi).any(|(f, x)| f.is_clamped(*x)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;

    fn kernel(family: KernelFamily, l: f64) -> Kernel {
        Kernel::new(family, vec![l], 1.0).unwrap()
    }

    fn se_samples(half_width: f64, step: f64) -> (Vec<f64>, f64) {
        let half = (half_width / step).round() as usize;
        let s = (0..=2 * half).map(|j| (-0.5 * ((j as f64 - half as f64) * step).powi(2)).exp()).collect();
        (s, 2.0 * half as f64 * step)
    }

    #[test]
    fn se_dft_at_zero() {
        let (s, w) = se_samples(8.0, 1.0 / 64.0);
        let d = spectral_density_dft(&s, 1.0 / 64.0, w).unwrap();
        assert!(((d.table()[0] - 2.50663) / 2.50663).abs() < 1e-4);
        assert!(!d.truncation_warning());
    }

    #[test]
    fn zero_samples_give_zero_density() {
        let d = spectral_density_dft(&[0.0; 9], 0.5, 4.0).unwrap();
        assert!(d.table().iter().all(|v| *v == 0.0));
        assert_eq!(d.eval(0.3), 0.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(spectral_density_dft(&[], 0.1, 1.0), Err(Error::InvalidArgument(_))));
        assert!(spectral_density_dft(&[1.0, 2.0], 0.1, 0.1).is_err());
        assert!(spectral_density_dft(&[0.5, 1.0, 0.5], 0.1, 0.7).is_err());
        assert!(spectral_density_dft(&[0.4, 1.0, 0.5], 0.1, 0.2).is_err());
    }

    #[test]
    fn narrow_window_is_flagged() {
        let (s, w) = se_samples(2.0, 1.0 / 32.0);
        let d = spectral_density_dft(&s, 1.0 / 32.0, w).unwrap();
        assert!(d.truncation_warning());
    }

    #[test]
    fn matern32_matches_closed_form() {
        let k = kernel(KernelFamily::Matern32, 1.0);
        let d = SpectralDensity::dft(&k, &DftGrid::default()).unwrap();
        let closed = k.spectral_density(&[1.0]).unwrap();
        assert!(((d.eval(&[1.0]) - closed) / closed).abs() < 1e-3);
    }

    #[test]
    fn off_grid_evaluation_agrees_with_fft_table() {
        let d = DftDensity::from_profile(BaseFamily::Matern52, 0.7, &DftGrid::default()).unwrap();
        for (j, v) in d.table().iter().enumerate().step_by(37) {
            let e = d.eval(j as f64 * d.frequency_step());
            assert!((e - v).abs() <= 1e-10 * d.table()[0], "{j}: {e} vs {v}");
        }
    }

    #[test]
    fn dft_unsupported_for_nonseparable_kernels() {
        let k = Kernel::new(KernelFamily::Matern32, vec![1.0, 1.0], 1.0).unwrap();
        assert!(matches!(SpectralDensity::dft(&k, &DftGrid::default()), Err(Error::UnsupportedFamily(_))));
    }
}
