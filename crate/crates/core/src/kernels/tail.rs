use serde::{Deserialize, Serialize};

use super::SpectralDensity;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_geometric};

/// Power-law bound `∫_rho^∞ s(xi)/k(0) dxi <= beta * rho^(-q)` fitted on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub q: f64,
    pub beta: f64,
}

/// Normalized one-sided tail mass `∫_rho^∞ s(xi)/k(0) dxi` of a 1D density.
///
/// Numerical densities are only integrated up to their Nyquist frequency.
pub fn tail_mass(density: &SpectralDensity, rho: f64) -> f64 {
    let norm = density.variance();
    let f = |x: f64| density.eval(&[x]) / norm;
    match density.nyquist() {
        Some(ny) if rho >= ny => 0.0,
        Some(ny) => {
            let panels = (((ny - rho) / rho.max(1e-3)).ceil() as usize).clamp(16, 4000);
            integrate(f, rho, ny, panels, 8)
        }
        None => integrate_geometric(f, rho, 1.1, 420, 8),
    }
}

/// Least-squares fit of `log T(rho)` against `log rho`, where `T` is the
/// normalized tail mass. `beta` is the smallest constant for which the
/// fitted power law bounds every sampled tail mass.
pub fn tail_exponent_estimate(density: &SpectralDensity, rho_grid: &[f64]) -> Result<TailEstimate> {
    if density.dim() != 1 {
        return Err(Error::InvalidArgument("tail estimates are only defined for 1D densities".into()));
    }
    if rho_grid.len() < 2 {
        return Err(Error::InvalidArgument("need at least two rho values".into()));
    }
    if rho_grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) || rho_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("rho grid must be positive and increasing".into()));
    }
    if !(density.variance() > 0.0) {
        return Err(Error::DegenerateTail { rho: rho_grid[0] });
    }

    let mut pts = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        let t = tail_mass(density, rho);
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::DegenerateTail { rho });
        }
        pts.push((rho.ln(), t.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let q = -sxy / sxx;
    if !(q > 0.0) {
        return Err(Error::DegenerateTail { rho: *rho_grid.last().unwrap() });
    }
    let log_beta = pts.iter().map(|(lr, lt)| lt + q * lr).fold(f64::NEG_INFINITY, f64::max);
    Ok(TailEstimate { q, beta: log_beta.exp() })
}
