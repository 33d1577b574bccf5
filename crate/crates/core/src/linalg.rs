//! Dense linear algebra helpers on top of `faer`.

use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Accum, Mat, MatRef, Par, Side};

use crate::error::{Error, Result};
use crate::inputs::Inputs;
use crate::kernels::Kernel;
use crate::parallel::Execution;

/// Relative jitter levels tried after a plain factorization fails.
pub const JITTER_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Lower Cholesky factor, possibly of a jittered matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Mat<f64>,
    jitter: f64,
}

impl Cholesky {
    /// Factorizes a symmetric matrix, retrying with diagonal jitter scaled by
    /// the mean diagonal before giving up.
    pub fn factor(a: MatRef<'_, f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument("Cholesky of a non-square matrix".into()));
        }
        let n = a.nrows();
        if n == 0 {
            return Ok(Self { l: Mat::zeros(0, 0), jitter: 0.0 });
        }
        let mean_diag = (0..n).map(|i| a[(i, i)]).sum::<f64>() / n as f64;
        if !mean_diag.is_finite() {
            return Err(Error::NumericalFailure("non-finite matrix passed to Cholesky".into()));
        }
        let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
        if let Some(l) = try_llt(a) {
            return Ok(Self { l, jitter: 0.0 });
        }
        let mut work = a.to_owned();
        let mut prev = 0.0;
        for rel in JITTER_LADDER {
            let jitter = rel * scale;
            for i in 0..n {
                work[(i, i)] += jitter - prev;
            }
            prev = jitter;
            if let Some(l) = try_llt(work.as_ref()) {
                log::debug!("Cholesky needed jitter {jitter:e}");
                return Ok(Self { l, jitter });
            }
        }
        Err(Error::NumericalFailure(format!(
            "Cholesky failed for a {n}x{n} matrix even with jitter {:e}",
            prev
        )))
    }

    pub fn l(&self) -> MatRef<'_, f64> {
        self.l.as_ref()
    }

    /// Diagonal jitter that was added, zero if none.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `log |A|` from the factor's diagonal.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Overwrites `b` with `L⁻¹ b`.
    pub fn solve_lower_in_place(&self, b: &mut Mat<f64>) {
        solve_lower_triangular_in_place(self.l.as_ref(), b.as_mut(), Par::Seq);
    }

    /// Overwrites `b` with `L⁻ᵀ b`.
    pub fn solve_upper_in_place(&self, b: &mut Mat<f64>) {
        solve_upper_triangular_in_place(self.l.transpose(), b.as_mut(), Par::Seq);
    }

    /// `L⁻¹ b` for a vector.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut m = col(b);
        self.solve_lower_in_place(&mut m);
        to_vec(&m)
    }

    /// `A⁻¹ b` for a vector.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = col(b);
        self.solve_lower_in_place(&mut m);
        self.solve_upper_in_place(&mut m);
        to_vec(&m)
    }

    /// `A⁻¹ B`.
    pub fn solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        let mut m = b.clone();
        self.solve_lower_in_place(&mut m);
        self.solve_upper_in_place(&mut m);
        m
    }

    /// `A⁻¹`.
    pub fn inverse(&self) -> Mat<f64> {
        self.solve_mat(&Mat::identity(self.dim(), self.dim()))
    }
}

fn try_llt(a: MatRef<'_, f64>) -> Option<Mat<f64>> {
    let llt = a.llt(Side::Lower).ok()?;
    let l = llt.L().to_owned();
    let ok = (0..l.nrows()).all(|i| l[(i, i)].is_finite() && l[(i, i)] > 0.0);
    ok.then_some(l)
}

/// Column vector from a slice.
pub fn col(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

/// First column as a vector.
pub fn to_vec(m: &Mat<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

/// `A Aᵀ`, symmetrized.
pub fn aat(a: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::zeros(a.nrows(), a.nrows());
    matmul(out.as_mut(), Accum::Replace, a, a.transpose(), 1.0, Par::Seq);
    symmetrize(&mut out);
    out
}

/// `A b` for a vector `b`.
pub fn mat_vec(a: MatRef<'_, f64>, b: &[f64]) -> Vec<f64> {
    let mut out = Mat::zeros(a.nrows(), 1);
    matmul(out.as_mut(), Accum::Replace, a, col(b).as_ref(), 1.0, Par::Seq);
    to_vec(&out)
}

/// `A B`.
pub fn mat_mul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    out
}

/// Replaces `A` by `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &mut Mat<f64>) {
    for j in 0..a.ncols() {
        for i in j + 1..a.nrows() {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cross-covariance `K(a, b)` with one row per point of `a`.
pub fn gram(kernel: &Kernel, a: &Inputs, b: &Inputs, exec: Execution) -> Mat<f64> {
    let (n, m) = (a.len(), b.len());
    // Filled column by column so each worker owns a contiguous block.
    let mut data = vec![0.0; n * m];
    exec.for_each_chunk_mut(&mut data, n.max(1), |off, c| {
        let j = off / n.max(1);
        let bj = b.row(j);
        for (i, v) in c.iter_mut().enumerate() {
            *v = kernel.between(a.row(i), bj);
        }
    });
    Mat::from_fn(n, m, |i, j| data[j * n + i])
}

/// `K(a, a)`.
pub fn gram_sym(kernel: &Kernel, a: &Inputs, exec: Execution) -> Mat<f64> {
    let mut k = gram(kernel, a, a, exec);
    symmetrize(&mut k);
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;

    #[test]
    fn solve_and_log_det() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { 4.0 } else { 1.0 });
        let c = Cholesky::factor(a.as_ref()).unwrap();
        assert_eq!(c.jitter(), 0.0);
        // eigenvalues 6, 3, 3
        assert!((c.log_det() - (54f64).ln()).abs() < 1e-12);
        let x = c.solve(&[6.0, 6.0, 6.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        let a = Mat::from_fn(3, 3, |_, _| 1.0);
        let c = Cholesky::factor(a.as_ref()).unwrap();
        assert!(c.jitter() > 0.0);
    }

    #[test]
    fn indefinite_fails() {
        let a = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 3.0 });
        assert!(matches!(Cholesky::factor(a.as_ref()), Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn gram_matches_pointwise() {
        let k = Kernel::new(KernelFamily::Matern52, vec![0.5, 2.0], 1.5).unwrap();
        let a = Inputs::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.3], vec![-0.2, 4.0]]).unwrap();
        let b = Inputs::from_rows(&[vec![0.1, 0.0], vec![0.0, 1.0]]).unwrap();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let g = gram(&k, &a, &b, exec);
            for i in 0..3 {
                for j in 0..2 {
                    assert_eq!(g[(i, j)], k.between(a.row(i), b.row(j)));
                }
            }
        }
    }
}
