use faer::Mat;

use super::collapsed::collapsed_from_whitened;
use super::{optimal_qu, sparse_predict, FeaturePrior, ObjectiveValue, PredictiveMarginals};
use crate::error::{Error, Result};
use crate::inputs::Inputs;
use crate::kernels::Kernel;
use crate::linalg::{aat, gram, gram_sym, mat_vec, Cholesky};
use crate::parallel::Execution;

fn check(x: &Inputs, y: &[f64], kernel: &Kernel, z: &Inputs) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("{} inputs but {} targets", x.len(), y.len())));
    }
    if x.dim() != kernel.dim() || z.dim() != kernel.dim() {
        return Err(Error::InvalidArgument("input, inducing point and kernel dimensions differ".into()));
    }
    if z.len() > x.len().max(1) {
        return Err(Error::InvalidArgument(format!(
            "{} inducing points for {} observations",
            z.len(),
            x.len()
        )));
    }
    Ok(())
}

/// Collapsed bound with inducing points `Z`, where `K_uu = k(Z, Z)` and
/// `K_uf = k(Z, X)`. Costs `O(N M²)` per call.
pub fn sgpr_inducing_objective(x: &Inputs, y: &[f64], kernel: &Kernel, noise: f64, z: &Inputs) -> Result<ObjectiveValue> {
    sgpr_objective_with(x, y, kernel, noise, z, Execution::Sequential)
}

pub(crate) fn sgpr_objective_with(
    x: &Inputs,
    y: &[f64],
    kernel: &Kernel,
    noise: f64,
    z: &Inputs,
    exec: Execution,
) -> Result<ObjectiveValue> {
    check(x, y, kernel, z)?;
    let kuu = gram_sym(kernel, z, exec);
    let chol = Cholesky::factor(kuu.as_ref())?;
    let mut w: Mat<f64> = gram(kernel, z, x, exec);
    chol.solve_lower_in_place(&mut w);
    let phi_w = aat(w.as_ref());
    let ybar_w = mat_vec(w.as_ref(), y);
    let q_trace: f64 = (0..phi_w.nrows()).map(|i| phi_w[(i, i)]).sum();
    let t = x.len() as f64 * kernel.signal_variance() - q_trace;
    let nu2 = y.iter().map(|v| v * v).sum();
    collapsed_from_whitened(&phi_w, &ybar_w, nu2, x.len(), noise, t)
}

/// Predictive marginals of the latent function under the optimal `q(u)`.
pub fn sgpr_predict(x: &Inputs, y: &[f64], kernel: &Kernel, noise: f64, z: &Inputs, xstar: &Inputs) -> Result<PredictiveMarginals> {
    check(x, y, kernel, z)?;
    let prior = FeaturePrior::Dense(gram_sym(kernel, z, Execution::Sequential));
    let kuf = gram(kernel, z, x, Execution::Sequential);
    let state = optimal_qu(&prior, &kuf, y, noise)?;
    let kus = gram(kernel, z, xstar, Execution::Sequential);
    sparse_predict(&state, &prior, &kus, &vec![kernel.signal_variance(); xstar.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{exact_log_marginal, exact_predict};
    use crate::kernels::KernelFamily;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn problem(n: usize, seed: u64) -> (Inputs, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Inputs::from_1d((0..n).map(|_| rng.random_range(-3.0..3.0)).collect());
        let y = x.rows().map(|r| (2.0 * r[0]).sin() + 0.1 * rng.random_range(-1.0..1.0)).collect();
        (x, y)
    }

    #[test]
    fn all_points_as_inducing_recover_marginal_likelihood() {
        let (x, y) = problem(30, 1);
        let k = Kernel::new(KernelFamily::Matern32, vec![0.7], 1.1).unwrap();
        let f = sgpr_inducing_objective(&x, &y, &k, 0.05, &x).unwrap();
        let l = exact_log_marginal(&x, &y, &k, 0.05).unwrap();
        assert!((f.total - l).abs() < 1e-6, "{} vs {l}", f.total);
    }

    #[test]
    fn distant_inducing_point() {
        let (x, y) = problem(20, 2);
        let k = Kernel::new(KernelFamily::SquaredExponential, vec![0.5], 1.0).unwrap();
        let f = sgpr_inducing_objective(&x, &y, &k, 0.3, &Inputs::from_1d(vec![1e3])).unwrap();
        let n = 20.0;
        let nu2: f64 = y.iter().map(|v| v * v).sum();
        let expect = -0.5 * n * (2.0 * PI * 0.3).ln() - 0.5 * nu2 / 0.3 - n / (2.0 * 0.3);
        assert!((f.total - expect).abs() < 1e-3);
    }

    #[test]
    fn bound_is_below_marginal_likelihood() {
        let (x, y) = problem(100, 3);
        let k = Kernel::new(KernelFamily::SquaredExponential, vec![0.4], 1.0).unwrap();
        let z = x.slice(0, 10);
        let f = sgpr_inducing_objective(&x, &y, &k, 0.1, &z).unwrap();
        let l = exact_log_marginal(&x, &y, &k, 0.1).unwrap();
        assert!(f.total < l);
    }

    #[test]
    fn predictions_match_exact_when_inducing_on_data() {
        let (x, y) = problem(15, 4);
        let k = Kernel::new(KernelFamily::SquaredExponential, vec![1.0], 1.0).unwrap();
        let xs = Inputs::from_1d(vec![-1.0, 0.5, 2.0]);
        let a = sgpr_predict(&x, &y, &k, 0.2, &x, &xs).unwrap();
        let b = exact_predict(&x, &y, &k, 0.2, &xs).unwrap();
        for i in 0..3 {
            assert!((a.mean[i] - b.mean[i]).abs() < 1e-6);
            assert!((a.variance[i] - b.variance[i]).abs() < 1e-6);
        }
    }
}
