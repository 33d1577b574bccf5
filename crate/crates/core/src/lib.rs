//! Sparse Gaussian-process regression with integrated Fourier features.
//!
//! Features are windowed Fourier averages on a regular frequency grid. They
//! do not depend on kernel hyperparameters, so the data enter the training
//! objective only through summaries computed once, and every optimizer step
//! costs `O(M^3)` regardless of the number of observations.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod features;
pub mod gp;
pub mod inputs;
pub mod kernels;
pub mod linalg;
pub mod model;
pub mod parallel;
pub mod precompute;
pub mod quadrature;
pub mod train;

pub use error::{Error, Result};
pub use inputs::Inputs;
pub use parallel::Execution;
