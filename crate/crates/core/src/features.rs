//! Integrated Fourier features: the frequency grid, real cos/sin feature
//! maps and their diagonal prior covariance.
//!
//! Each retained frequency pair `±z_m` contributes two real features,
//! `cos(2π z_mᵀx)` then `sin(2π z_mᵀx)`, with prior variance
//! `1 / (2 ε^D s(z_m))` each.

use std::cmp::Ordering;
use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inputs::Inputs;
use crate::kernels::SpectralDensity;

/// Fraction of the inverse data range used for the default spacing.
pub const DEFAULT_EPS_FACTOR: f64 = 0.95;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mask {
    #[default]
    FullRectangular,
    Spherical,
}

/// Half of a symmetric frequency grid: one representative per `±z` pair,
/// ordered by increasing Euclidean norm with lexicographic tie-breaking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    eps: Vec<f64>,
    per_dim_count: usize,
    mask: Mask,
    /// Row-major `pairs × D` representatives.
    half_frequencies: Vec<f64>,
}

/// `ε_d = 0.95 / (max x_d − min x_d)` for each input dimension.
pub fn default_epsilon(x: &Inputs) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::DegenerateInput("need at least two inputs to set the spacing".into()));
    }
    if let Some(i) = x.first_non_finite() {
        return Err(Error::InvalidArgument(format!("non-finite input in row {i}")));
    }
    x.ranges()
        .into_iter()
        .enumerate()
        .map(|(d, (lo, hi))| {
            let w = hi - lo;
            if w > 0.0 {
                Ok(DEFAULT_EPS_FACTOR / w)
            } else {
                Err(Error::DegenerateInput(format!("inputs have zero range in dimension {d}")))
            }
        })
        .collect()
}

/// Builds the grid `z = (−(P+1)/2 + m) ε`, `m = 1..=P` in every dimension.
///
/// With a spherical mask the `target_pairs` pairs of smallest norm are kept;
/// `None` keeps everything.
pub fn build_grid(per_dim_count: usize, eps: &[f64], dim: usize, mask: Mask, target_pairs: Option<usize>) -> Result<FrequencyGrid> {
    if per_dim_count < 2 || per_dim_count % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "per-dimension frequency count must be even and at least 2, got {per_dim_count}"
        )));
    }
    if dim == 0 || eps.len() != dim {
        return Err(Error::InvalidArgument(format!("expected {dim} spacings, got {}", eps.len())));
    }
    if eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidArgument("spacings must be positive".into()));
    }
    let p = per_dim_count;
    let available = (p as u128).pow(dim as u32) / 2;
    if available > 50_000_000 {
        return Err(Error::InvalidArgument(format!("grid with {available} pairs is too large")));
    }
    let available = available as usize;
    let keep = match (mask, target_pairs) {
        (_, Some(t)) if t > available => {
            return Err(Error::InvalidArgument(format!("requested {t} pairs but the grid has {available}")));
        }
        (Mask::FullRectangular, Some(t)) if t != available => {
            return Err(Error::InvalidArgument("a target pair count needs the spherical mask".into()));
        }
        (_, Some(t)) => t,
        (_, None) => available,
    };

    // Odd half-integer offsets k with z = k ε / 2; the first coordinate is
    // positive so each pair is listed once.
    let offsets: Vec<i64> = (1..=p as i64).map(|m| 2 * m - (p as i64 + 1)).collect();
    let reps: Vec<Vec<f64>> = (0..available)
        .map(|t| {
            // Mixed-radix decode: the first coordinate takes the upper half
            // of the offsets, the others take all of them.
            let mut z = vec![0.0; dim];
            let mut rest = t;
            for d in (0..dim).rev() {
                let i = if d == 0 { p / 2 + rest } else { rest % p };
                rest /= p;
                z[d] = 0.5 * offsets[i] as f64 * eps[d];
            }
            z
        })
        .collect();
    debug_assert_eq!(reps.len(), available);

    let mut keyed: Vec<(f64, Vec<f64>)> = reps.into_iter().map(|z| (canonical_norm2(&z), z)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lexicographic(&a.1, &b.1)));
    keyed.truncate(keep);

    Ok(FrequencyGrid {
        eps: eps.to_vec(),
        per_dim_count,
        mask,
        half_frequencies: keyed.into_iter().flat_map(|(_, z)| z).collect(),
    })
}

/// Squared norm summed in ascending order of terms so that coordinate
/// permutations give bitwise identical keys.
fn canonical_norm2(z: &[f64]) -> f64 {
    let mut sq: Vec<f64> = z.iter().map(|v| v * v).collect();
    sq.sort_by(f64::total_cmp);
    sq.iter().sum()
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal)
}

impl FrequencyGrid {
    /// A grid with no features.
    pub fn empty(eps: Vec<f64>) -> Self {
        Self { eps, per_dim_count: 0, mask: Mask::Spherical, half_frequencies: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.eps.len()
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    /// `∏_d ε_d`.
    pub fn cell_volume(&self) -> f64 {
        self.eps.iter().product()
    }

    pub fn per_dim_count(&self) -> usize {
        self.per_dim_count
    }

    pub fn mask(&self) -> Mask {
        self.mask
    }

    pub fn pair_count(&self) -> usize {
        self.half_frequencies.len() / self.dim()
    }

    /// Number of real features, twice the pair count.
    pub fn feature_count(&self) -> usize {
        2 * self.pair_count()
    }

    /// Representative frequency of pair `m`.
    pub fn frequency(&self, m: usize) -> &[f64] {
        let d = self.dim();
        &self.half_frequencies[m * d..(m + 1) * d]
    }

    pub fn half_frequencies(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.half_frequencies.chunks_exact(self.dim())
    }

    /// Every grid frequency: the representatives followed by their negatives.
    pub fn full_frequencies(&self) -> Vec<Vec<f64>> {
        let pos: Vec<Vec<f64>> = self.half_frequencies().map(|z| z.to_vec()).collect();
        let neg = pos.iter().map(|z| z.iter().map(|v| -v).collect());
        pos.clone().into_iter().chain(neg).collect()
    }

    /// Largest absolute coordinate over the retained frequencies.
    pub fn max_abs_frequency(&self) -> f64 {
        self.half_frequencies.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Bytes identifying the grid, used for cache provenance.
    pub fn fingerprint(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        out.extend_from_slice(&(self.per_dim_count as u64).to_le_bytes());
        out.push(self.mask as u8);
        for v in self.eps.iter().chain(&self.half_frequencies) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Writes the features of `x` into `out` (length `feature_count()`).
    #[inline]
    pub fn features_into(&self, x: &[f64], out: &mut [f64]) {
        for (m, z) in self.half_frequencies().enumerate() {
            let (s, c) = (2.0 * PI * crate::linalg::dot(z, x)).sin_cos();
            out[2 * m] = c;
            out[2 * m + 1] = s;
        }
    }
}

/// Real feature matrix `K_uf`: column `n` holds the features of input `n`.
pub fn feature_matrix(grid: &FrequencyGrid, x: &Inputs) -> Result<Mat<f64>> {
    if x.dim() != grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "inputs have dimension {}, grid has {}",
            x.dim(),
            grid.dim()
        )));
    }
    if let Some(i) = x.first_non_finite() {
        return Err(Error::InvalidArgument(format!("non-finite input in row {i}")));
    }
    Ok(feature_matrix_unchecked(grid, x, 0, x.len()))
}

/// Features of rows `start..end` without validation.
pub(crate) fn feature_matrix_unchecked(grid: &FrequencyGrid, x: &Inputs, start: usize, end: usize) -> Mat<f64> {
    let m = grid.feature_count();
    let mut out = Mat::zeros(m, end - start);
    let mut buf = vec![0.0; m];
    for n in start..end {
        grid.features_into(x.row(n), &mut buf);
        for (i, v) in buf.iter().enumerate() {
            out[(i, n - start)] = *v;
        }
    }
    out
}

/// Diagonal prior covariance of the real features.
#[derive(Clone, Debug, PartialEq)]
pub struct KuuDiag {
    diag: Vec<f64>,
}

impl KuuDiag {
    pub fn from_diag(diag: Vec<f64>) -> Result<Self> {
        if diag.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument("prior variances must be positive".into()));
        }
        Ok(Self { diag })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Inverse variances.
    pub fn precisions(&self) -> Vec<f64> {
        self.diag.iter().map(|v| 1.0 / v).collect()
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }
}

/// `K_uu` with entries `1 / (2 ε^D s(z_m))` for both rows of pair `m`.
///
/// Fails if the density is nonpositive or clamped at any retained frequency.
pub fn kuu_diag(grid: &FrequencyGrid, density: &SpectralDensity) -> Result<KuuDiag> {
    check_dims(grid, density)?;
    let vol = grid.cell_volume();
    let mut diag = Vec::with_capacity(grid.feature_count());
    for z in grid.half_frequencies() {
        let s = density.eval(z);
        if !(s > 0.0 && s.is_finite()) || density.is_clamped(z) {
            return Err(Error::DegenerateSpectrum { frequency: z.to_vec(), value: s });
        }
        let v = 1.0 / (2.0 * vol * s);
        if !v.is_finite() {
            return Err(Error::DegenerateSpectrum { frequency: z.to_vec(), value: s });
        }
        diag.push(v);
        diag.push(v);
    }
    Ok(KuuDiag { diag })
}

/// Prior precisions `2 ε^D s(z_m)` of the real features.
///
/// Unlike [`kuu_diag`] this never fails on a vanishing density: a zero
/// precision simply switches the feature off.
pub fn feature_precisions(grid: &FrequencyGrid, density: &SpectralDensity) -> Result<Vec<f64>> {
    check_dims(grid, density)?;
    let vol = grid.cell_volume();
    let mut out = Vec::with_capacity(grid.feature_count());
    for z in grid.half_frequencies() {
        let s = density.eval(z);
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::DegenerateSpectrum { frequency: z.to_vec(), value: s });
        }
        out.push(2.0 * vol * s);
        out.push(2.0 * vol * s);
    }
    Ok(out)
}

fn check_dims(grid: &FrequencyGrid, density: &SpectralDensity) -> Result<()> {
    if grid.dim() != density.dim() {
        return Err(Error::InvalidArgument(format!(
            "grid has dimension {}, density has {}",
            grid.dim(),
            density.dim()
        )));
    }
    Ok(())
}
