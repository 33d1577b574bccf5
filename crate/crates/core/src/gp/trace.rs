use crate::error::{Error, Result};
use crate::features::{feature_matrix, kuu_diag, FrequencyGrid};
use crate::inputs::Inputs;
use crate::kernels::{Kernel, SpectralDensity};

fn check(kernel: &Kernel, x: &Inputs, grid: &FrequencyGrid) -> Result<()> {
    if kernel.dim() != x.dim() || grid.dim() != x.dim() {
        return Err(Error::InvalidArgument("kernel, input and grid dimensions differ".into()));
    }
    Ok(())
}

/// `t̂ = Σ_n k(x_n, x_n) − N ε^D Σ_z s(z)` over the full symmetric grid.
///
/// Each feature pair contributes `cos² + sin² = 1` times its precision, so
/// the inputs only enter through their count. A negative value is returned
/// as is and logged.
pub fn trace_term(kernel: &Kernel, x: &Inputs, grid: &FrequencyGrid, density: &SpectralDensity) -> Result<f64> {
    check(kernel, x, grid)?;
    let n = x.len() as f64;
    let mass: f64 = grid.half_frequencies().map(|z| 2.0 * density.eval(z)).sum();
    let t = n * kernel.signal_variance() - n * grid.cell_volume() * mass;
    if t < 0.0 {
        log::warn!("trace estimate {t:e} is negative");
    }
    Ok(t)
}

/// The same quantity summed feature by feature, `Σ_n [k(x_n, x_n) − Σ_m φ_m(x_n)² / K_uu[m, m]]`.
pub fn trace_term_elementwise(kernel: &Kernel, x: &Inputs, grid: &FrequencyGrid, density: &SpectralDensity) -> Result<f64> {
    check(kernel, x, grid)?;
    let kuu = kuu_diag(grid, density)?;
    let f = feature_matrix(grid, x)?;
    let mut t = 0.0;
    for n in 0..x.len() {
        let q: f64 = (0..f.nrows()).map(|m| f[(m, n)] * f[(m, n)] / kuu.diag()[m]).sum();
        t += kernel.between(x.row(n), x.row(n)) - q;
    }
    Ok(t)
}
