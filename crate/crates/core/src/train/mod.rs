//! Hyperparameter optimization over log-parameters.

mod fit;
mod gradcheck;
mod kmeans;
pub mod lbfgs;
mod params;

pub use fit::{fit, fit_with_summary, Fit, FitReport, FitSetup, Method, ModelSpec, Objective, OptConfig, RESTART_SCALE};
pub use gradcheck::{gradient_check, GradientCheck};
pub use kmeans::kmeans;
pub use params::{HyperParams, INIT_LENGTHSCALE};
