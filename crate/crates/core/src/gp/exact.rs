use std::f64::consts::PI;

use faer::Mat;

use super::PredictiveMarginals;
use crate::error::{Error, Result};
use crate::inputs::Inputs;
use crate::kernels::Kernel;
use crate::linalg::{gram, gram_sym, Cholesky};
use crate::parallel::Execution;

/// Largest problem the dense path accepts unless told otherwise.
pub const DEFAULT_DENSE_LIMIT: usize = 5000;

fn check(x: &Inputs, y: &[f64], kernel: &Kernel, noise: f64, limit: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("{} inputs but {} targets", x.len(), y.len())));
    }
    if x.len() > limit {
        return Err(Error::InvalidArgument(format!(
            "{} points exceed the dense limit of {limit}",
            x.len()
        )));
    }
    if x.dim() != kernel.dim() {
        return Err(Error::InvalidArgument("input and kernel dimensions differ".into()));
    }
    if !(noise.is_finite() && noise > 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance must be positive, got {noise}")));
    }
    if let Some(i) = x.first_non_finite().or_else(|| y.iter().position(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument(format!("non-finite value in row {i}")));
    }
    Ok(())
}

fn factor(x: &Inputs, kernel: &Kernel, noise: f64) -> Result<Cholesky> {
    let mut k = gram_sym(kernel, x, Execution::Sequential);
    for i in 0..x.len() {
        k[(i, i)] += noise;
    }
    Cholesky::factor(k.as_ref())
}

/// `log N(y | 0, K_ff + σ² I)`.
pub fn exact_log_marginal(x: &Inputs, y: &[f64], kernel: &Kernel, noise: f64) -> Result<f64> {
    exact_log_marginal_limited(x, y, kernel, noise, DEFAULT_DENSE_LIMIT)
}

/// As [`exact_log_marginal`] with an explicit size limit.
pub fn exact_log_marginal_limited(x: &Inputs, y: &[f64], kernel: &Kernel, noise: f64, limit: usize) -> Result<f64> {
    check(x, y, kernel, noise, limit)?;
    let chol = factor(x, kernel, noise)?;
    let c = chol.solve_lower(y);
    let quad: f64 = c.iter().map(|v| v * v).sum();
    Ok(-0.5 * quad - 0.5 * chol.log_det() - 0.5 * y.len() as f64 * (2.0 * PI).ln())
}

/// Posterior marginals of the latent function at `xstar`.
pub fn exact_predict(x: &Inputs, y: &[f64], kernel: &Kernel, noise: f64, xstar: &Inputs) -> Result<PredictiveMarginals> {
    exact_predict_limited(x, y, kernel, noise, xstar, DEFAULT_DENSE_LIMIT)
}

pub fn exact_predict_limited(
    x: &Inputs,
    y: &[f64],
    kernel: &Kernel,
    noise: f64,
    xstar: &Inputs,
    limit: usize,
) -> Result<PredictiveMarginals> {
    check(x, y, kernel, noise, limit)?;
    if xstar.dim() != kernel.dim() {
        return Err(Error::InvalidArgument("test input dimension differs from the kernel".into()));
    }
    let chol = factor(x, kernel, noise)?;
    let alpha = chol.solve(y);
    let kfs: Mat<f64> = gram(kernel, x, xstar, Execution::Sequential);
    let mut v = kfs.clone();
    chol.solve_lower_in_place(&mut v);
    let mut out = PredictiveMarginals::default();
    for j in 0..xstar.len() {
        let mean = (0..x.len()).map(|i| kfs[(i, j)] * alpha[i]).sum();
        let reduction: f64 = (0..x.len()).map(|i| v[(i, j)] * v[(i, j)]).sum();
        out.mean.push(mean);
        out.variance.push(kernel.signal_variance() - reduction);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn se(l: f64) -> Kernel {
        Kernel::new(KernelFamily::SquaredExponential, vec![l], 1.0).unwrap()
    }

    #[test]
    fn one_point_examples() {
        let x = Inputs::from_1d(vec![0.0]);
        let l0 = exact_log_marginal(&x, &[0.0], &se(1.0), 1.0).unwrap();
        assert!((l0 - (-0.5 * 2f64.ln() - 0.5 * (2.0 * PI).ln())).abs() < 1e-14);
        assert!((l0 + 1.26551).abs() < 1e-5);
        let l2 = exact_log_marginal(&x, &[2.0], &se(1.0), 1.0).unwrap();
        assert!((l2 - (l0 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn three_points_match_explicit_inverse() {
        // 3x3 inverse and determinant by cofactors
        let x = Inputs::from_1d(vec![0.0, 0.7, 1.5]);
        let y = [0.4, -0.3, 1.1];
        let k = se(0.9);
        let noise = 0.3;
        let a: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| k.between(x.row(i), x.row(j)) + if i == j { noise } else { 0.0 }).collect())
            .collect();
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        let cof = |i: usize, j: usize| {
            let r: Vec<usize> = (0..3).filter(|&r| r != i).collect();
            let c: Vec<usize> = (0..3).filter(|&c| c != j).collect();
            let m = a[r[0]][c[0]] * a[r[1]][c[1]] - a[r[0]][c[1]] * a[r[1]][c[0]];
            if (i + j) % 2 == 0 { m } else { -m }
        };
        let mut quad = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                quad += y[i] * cof(j, i) / det * y[j];
            }
        }
        let oracle = -0.5 * quad - 0.5 * det.ln() - 1.5 * (2.0 * PI).ln();
        let l = exact_log_marginal(&x, &y, &k, noise).unwrap();
        assert!((l - oracle).abs() < 1e-10);
    }

    #[test]
    fn prediction_limits() {
        let x = Inputs::from_1d(vec![0.0, 1.0]);
        let p = exact_predict(&x, &[1.0, 2.0], &se(0.1), 0.1, &Inputs::from_1d(vec![100.0])).unwrap();
        assert_eq!(p.mean[0], 0.0);
        assert_eq!(p.variance[0], 1.0);
        let p = exact_predict(&x, &[1.0, 2.0], &se(1.0), 1e-8, &Inputs::from_1d(vec![0.0])).unwrap();
        assert!((p.mean[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn prediction_matches_dense_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Inputs::from_1d((0..5).map(|_| rng.random_range(-2.0..2.0)).collect());
        let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xs = Inputs::from_1d(vec![-0.5, 0.1, 3.0]);
        let k = Kernel::new(KernelFamily::Matern52, vec![0.7], 1.4).unwrap();
        let p = exact_predict(&x, &y, &k, 0.05, &xs).unwrap();
        let kff = Mat::from_fn(5, 5, |i, j| k.between(x.row(i), x.row(j)) + if i == j { 0.05 } else { 0.0 });
        let inv = Cholesky::factor(kff.as_ref()).unwrap().inverse();
        for s in 0..3 {
            let ks: Vec<f64> = (0..5).map(|i| k.between(x.row(i), xs.row(s))).collect();
            let mean: f64 = (0..5).map(|i| (0..5).map(|j| ks[i] * inv[(i, j)] * y[j]).sum::<f64>()).sum();
            let red: f64 = (0..5).map(|i| (0..5).map(|j| ks[i] * inv[(i, j)] * ks[j]).sum::<f64>()).sum();
            assert!((p.mean[s] - mean).abs() < 1e-8 * mean.abs().max(1.0));
            assert!((p.variance[s] - (1.4 - red)).abs() < 1e-8);
        }
    }

    #[test]
    fn size_guard() {
        let x = Inputs::from_1d(vec![0.0; 10]);
        assert!(exact_log_marginal_limited(&x, &[0.0; 10], &se(1.0), 1.0, 5).is_err());
    }
}
