mod common;

use iff_core::features::{build_grid, feature_matrix, kuu_diag, Mask};
use iff_core::gp::iff_objective;
use iff_core::kernels::{Kernel, KernelFamily, SpectralDensity};
use iff_core::precompute::{compute_summaries, provenance_hash, DEFAULT_CHUNK_SIZE};
use iff_core::Inputs;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

/// Largest relative error of the point-frequency feature against the box
/// average, over a fixed set of inputs with `|x| ε < 0.5`.
fn worst_box_error(eps: f64, xs: &[f64], pair: usize) -> (f64, f64) {
    let grid = build_grid(16, &[eps], 1, Mask::FullRectangular, None).unwrap();
    let z = grid.frequency(pair)[0];
    let mut buf = vec![0.0; grid.feature_count()];
    let (mut worst, mut worst_sq): (f64, f64) = (0.0, 0.0);
    for &x in xs {
        grid.features_into(&[x], &mut buf);
        let approx = Complex64::new(buf[2 * pair], -buf[2 * pair + 1]);
        let exact = common::box_average(z, eps, x);
        worst = worst.max((exact - approx).norm() / approx.norm());
        worst_sq = worst_sq.max((exact.norm_sqr() - approx.norm_sqr()).abs() / approx.norm_sqr());
    }
    (worst, worst_sq)
}

#[test]
fn box_average_error_is_second_order_in_spacing() {
    let eps = 0.2;
    let xs: Vec<f64> = (1..=40).map(|i| -2.4 + i as f64 * 0.12).collect();
    for pair in [0, 3, 7] {
        let (coarse, coarse_sq) = worst_box_error(eps, &xs, pair);
        let (fine, fine_sq) = worst_box_error(eps / 2.0, &xs, pair);
        let ratio = fine / coarse;
        let ratio_sq = fine_sq / coarse_sq;
        assert!((0.25 / 1.5..=0.25 * 1.5).contains(&ratio), "pair {pair}: {ratio}");
        assert!((0.25 / 1.5..=0.25 * 1.5).contains(&ratio_sq), "pair {pair}: {ratio_sq}");
    }
}

#[test]
fn simpson_box_average_matches_sinc() {
    for (z, eps, x) in [(0.25, 0.5, 0.3), (1.05, 0.1, -2.0), (3.5, 0.01, 7.0)] {
        let u = std::f64::consts::PI * eps * x;
        let want = Complex64::from_polar(u.sin() / u, -2.0 * std::f64::consts::PI * z * x);
        assert!((common::box_average(z, eps, x) - want).norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn features_are_bounded_and_repeatable(dim in 1usize..4, half in 1usize..4, eps in 0.05f64..1.0, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let x = common::random_inputs(&mut r, 30, dim, 5.0);
        let grid = build_grid(2 * half, &vec![eps; dim], dim, Mask::FullRectangular, None).unwrap();
        let a = feature_matrix(&grid, &x).unwrap();
        let b = feature_matrix(&grid, &x).unwrap();
        prop_assert_eq!(&a, &b);
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                prop_assert!(a[(i, j)].abs() <= 1.0);
            }
        }
    }

    #[test]
    fn summaries_do_not_depend_on_hyperparameters(l1 in 0.1f64..3.0, l2 in 0.1f64..3.0, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let x = common::random_inputs(&mut r, 25, 1, 3.0);
        let y = common::random_targets(&mut r, &x);
        let grid = build_grid(10, &[0.2], 1, Mask::FullRectangular, None).unwrap();
        let s = compute_summaries(&x, &y, &grid, DEFAULT_CHUNK_SIZE).unwrap();
        // The summary is the only data-dependent input, and any kernel can
        // be evaluated against it.
        for l in [l1, l2] {
            let k = Kernel::new(KernelFamily::Matern32, vec![l], 1.0).unwrap();
            iff_objective(&s, &grid, &SpectralDensity::closed(&k), 1.0, 0.5).unwrap();
        }
        prop_assert_eq!(s.provenance_hash(), provenance_hash(&x, &y, &grid));
        prop_assert_eq!(&compute_summaries(&x, &y, &grid, DEFAULT_CHUNK_SIZE).unwrap(), &s);
    }

    #[test]
    fn prior_variances_positive_and_paired(fam in prop::sample::select(vec![KernelFamily::SquaredExponential, KernelFamily::Matern12, KernelFamily::Matern52]), lambda in 0.3f64..3.0, eps in 0.05f64..0.5) {
        let grid = build_grid(12, &[eps], 1, Mask::FullRectangular, None).unwrap();
        let k = Kernel::new(fam, vec![lambda], 1.0).unwrap();
        let d = kuu_diag(&grid, &SpectralDensity::closed(&k)).unwrap();
        for p in d.diag().chunks(2) {
            prop_assert!(p[0] > 0.0);
            prop_assert_eq!(p[0], p[1]);
        }
    }

    #[test]
    fn spherical_mask_with_all_pairs_is_rectangular(dim in 1usize..4, half in 1usize..4, eps in 0.05f64..1.0) {
        let p = 2 * half;
        let full = build_grid(p, &vec![eps; dim], dim, Mask::FullRectangular, None).unwrap();
        let all = full.pair_count();
        let sph = build_grid(p, &vec![eps; dim], dim, Mask::Spherical, Some(all)).unwrap();
        prop_assert_eq!(full.half_frequencies().collect::<Vec<_>>(), sph.half_frequencies().collect::<Vec<_>>());
    }

    #[test]
    fn spherical_mask_keeps_smallest_norms(half in 2usize..5, keep in 1usize..8) {
        let g = build_grid(2 * half, &[0.3, 0.3], 2, Mask::Spherical, Some(keep)).unwrap();
        let full = build_grid(2 * half, &[0.3, 0.3], 2, Mask::FullRectangular, None).unwrap();
        let norm = |z: &[f64]| z.iter().map(|v| v * v).sum::<f64>();
        let max_kept = g.half_frequencies().map(norm).fold(0.0, f64::max);
        let dropped = full.half_frequencies().filter(|z| norm(z) < max_kept - 1e-12).count();
        prop_assert!(dropped <= keep);
        prop_assert_eq!(g.pair_count(), keep);
    }

    #[test]
    fn real_and_complex_features_agree(n in 5usize..50, pairs in 1usize..9, dim in 1usize..3, lambda in 0.3f64..2.0, noise in 0.05f64..2.0, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let x = common::random_inputs(&mut r, n, dim, 2.0);
        let y = common::random_targets(&mut r, &x);
        let eps: Vec<f64> = (0..dim).map(|_| r.random_range(0.1..0.4)).collect();
        let per_dim = if dim == 1 { 2 * pairs } else { 6 };
        let grid = build_grid(per_dim, &eps, dim, Mask::Spherical, Some(pairs)).unwrap();
        let k = Kernel::isotropic(KernelFamily::SquaredExponential, dim, lambda, 1.3).unwrap();
        let density = SpectralDensity::closed(&k);
        let s = compute_summaries(&x, &y, &grid, 7).unwrap();
        let real = iff_objective(&s, &grid, &density, 1.3, noise).unwrap().total;
        let complex = common::complex_collapsed(&x, &y, &grid, &density, 1.3, noise);
        prop_assert!(common::rel(real, complex) < 1e-8, "{} vs {}", real, complex);
    }
}

#[test]
fn one_point_features() {
    let grid = build_grid(2, &[0.5], 1, Mask::FullRectangular, None).unwrap();
    let f = feature_matrix(&grid, &Inputs::from_1d(vec![1.0])).unwrap();
    // z = 0.25, 2π z x = π/2
    assert!(f[(0, 0)].abs() < 1e-15);
    assert!((f[(1, 0)] - 1.0).abs() < 1e-15);
}
