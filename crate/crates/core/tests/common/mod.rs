//! Independent dense and complex-arithmetic oracles shared by the
//! integration tests. Nothing here calls the library's linear algebra.

#![allow(dead_code)]

use std::f64::consts::PI;

use faer::Mat;
use iff_core::features::FrequencyGrid;
use iff_core::kernels::{Kernel, SpectralDensity};
use iff_core::Inputs;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Textbook Cholesky–Banachiewicz; `None` if a pivot is not positive.
pub fn chol(a: &Dense) -> Option<Dense> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn forward(l: &Dense, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..l.len() {
        for k in 0..i {
            x[i] -= l[i][k] * x[k];
        }
        x[i] /= l[i][i];
    }
    x
}

/// `log N(y | 0, cov)`.
pub fn log_normal(cov: &Dense, y: &[f64]) -> f64 {
    let l = chol(cov).expect("covariance is positive definite");
    let a = forward(&l, y);
    let logdet: f64 = 2.0 * l.iter().enumerate().map(|(i, r)| r[i].ln()).sum::<f64>();
    -0.5 * (y.len() as f64 * (2.0 * PI).ln() + logdet + a.iter().map(|v| v * v).sum::<f64>())
}

/// `log N(y | 0, Q + σ² I) − max(t, 0) / (2σ²)`.
pub fn dense_collapsed(q: &Dense, y: &[f64], noise: f64, t: f64) -> f64 {
    let mut c = q.clone();
    for (i, r) in c.iter_mut().enumerate() {
        r[i] += noise;
    }
    log_normal(&c, y) - t.max(0.0) / (2.0 * noise)
}

/// `Q = Fᵀ diag(v) F` for features `F` with one column per input.
pub fn q_from_features(f: &Mat<f64>, v: &[f64]) -> Dense {
    let (m, n) = (f.nrows(), f.ncols());
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..m).map(|k| f[(k, i)] * v[k] * f[(k, j)]).sum();
            q[i][j] = s;
            q[j][i] = s;
        }
    }
    q
}

pub fn dense_gram(kernel: &Kernel, a: &Inputs, b: &Inputs) -> Dense {
    a.rows().map(|p| b.rows().map(|r| kernel.between(p, r)).collect()).collect()
}

/// Objective with complex features `e^{−i2πzᵀx}` over the full symmetric
/// grid and `K_uu = ε^{−D} diag(1 / s(z))`, evaluated densely.
pub fn complex_collapsed(x: &Inputs, y: &[f64], grid: &FrequencyGrid, density: &SpectralDensity, signal_variance: f64, noise: f64) -> f64 {
    let vol = grid.cell_volume();
    let zs = grid.full_frequencies();
    let n = x.len();
    let c: Vec<Vec<Complex64>> = zs
        .iter()
        .map(|z| {
            x.rows()
                .map(|r| {
                    let ph: f64 = z.iter().zip(r).map(|(a, b)| a * b).sum();
                    Complex64::from_polar(1.0, -2.0 * PI * ph)
                })
                .collect()
        })
        .collect();
    let kinv: Vec<f64> = zs.iter().map(|z| vol * density.eval(z)).collect();
    let mut q = vec![vec![0.0; n]; n];
    let mut max_imag: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for m in 0..zs.len() {
                s += c[m][i].conj() * kinv[m] * c[m][j];
            }
            max_imag = max_imag.max(s.im.abs());
            q[i][j] = s.re;
        }
    }
    assert!(max_imag < 1e-10, "complex Q has imaginary part {max_imag}");
    let t = n as f64 * signal_variance - (0..n).map(|i| q[i][i]).sum::<f64>();
    dense_collapsed(&q, y, noise, t)
}

/// `ε⁻¹ ∫ e^{−i2πξx} dξ` over `[z − ε/2, z + ε/2]` by composite Simpson.
pub fn box_average(z: f64, eps: f64, x: f64) -> Complex64 {
    let panels = 4000;
    let h = eps / panels as f64;
    let f = |xi: f64| Complex64::from_polar(1.0, -2.0 * PI * xi * x);
    let a = z - eps / 2.0;
    let mut s = f(a) + f(a + eps);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += f(a + k as f64 * h) * w;
    }
    s * (h / 3.0) / eps
}

/// Real features integrated over their boxes: rows cos, sin per pair.
pub fn integrated_features(grid: &FrequencyGrid, x: &Inputs) -> Mat<f64> {
    assert_eq!(grid.dim(), 1);
    let eps = grid.eps()[0];
    let m = grid.feature_count();
    let mut out = Mat::zeros(m, x.len());
    for (p, z) in grid.half_frequencies().enumerate() {
        for n in 0..x.len() {
            let c = box_average(z[0], eps, x.row(n)[0]);
            out[(2 * p, n)] = c.re;
            out[(2 * p + 1, n)] = -c.im;
        }
    }
    out
}

pub fn random_inputs(r: &mut ChaCha8Rng, n: usize, dim: usize, half_width: f64) -> Inputs {
    Inputs::new((0..n * dim).map(|_| r.random_range(-half_width..half_width)).collect(), dim).unwrap()
}

pub fn random_targets(r: &mut ChaCha8Rng, x: &Inputs) -> Vec<f64> {
    let phase: f64 = r.random_range(0.0..6.0);
    x.rows().map(|p| (2.0 * p[0] + phase).sin() + 0.3 * r.random_range(-1.0..1.0)).collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
