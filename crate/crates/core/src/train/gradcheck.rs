use serde::{Deserialize, Serialize};

use super::lbfgs::fd_gradient;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    /// Central differences at the coarser step.
    pub gradient: Vec<f64>,
    /// `max_i |g_h − g_{h/2}| / max(|g_{h/2}|, 1)`.
    pub deviation: f64,
    /// `(g_h − g_{h/2}) / (g_{h/2} − g_{h/4})` in the coordinate with the
    /// largest change; close to 4 when truncation error dominates. `None`
    /// when the differences are at rounding level.
    pub richardson_ratio: Option<f64>,
}

/// Compares central-difference gradients at steps `h` and `h/2`.
pub fn gradient_check<F: Fn(&[f64]) -> Result<f64>>(f: F, params: &[f64], step: f64) -> Result<GradientCheck> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument("gradient check step must be positive".into()));
    }
    let checked = |x: &[f64]| match f(x) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(Error::NumericalFailure(format!("objective evaluated to {v}"))),
        Err(e) => Err(e),
    };
    checked(params)?;
    let g1 = fd_gradient(&checked, params, step)?;
    let g2 = fd_gradient(&checked, params, step / 2.0)?;
    let g4 = fd_gradient(&checked, params, step / 4.0)?;
    let mut deviation = 0.0f64;
    let mut worst = 0;
    let mut worst_diff = 0.0;
    for i in 0..params.len() {
        let diff = (g1[i] - g2[i]).abs();
        deviation = deviation.max(diff / g2[i].abs().max(1.0));
        if diff > worst_diff {
            worst_diff = diff;
            worst = i;
        }
    }
    let d2 = g2[worst] - g4[worst];
    let scale = g2[worst].abs().max(1.0);
    let richardson_ratio = if worst_diff > 1e-9 * scale && d2 != 0.0 { Some((g1[worst] - g2[worst]) / d2) } else { None };
    Ok(GradientCheck { gradient: g1, deviation, richardson_ratio })
}
