mod common;

use faer::Mat;
use iff_core::features::{build_grid, Mask};
use iff_core::precompute::{compute_summaries, compute_summaries_with, load_summary, save_summary};
use iff_core::Execution;
use proptest::prelude::*;
use std::f64::consts::PI;

fn frob(a: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * a[(i, j)];
        }
    }
    s.sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn summaries_match_dense_products(n in 1usize..1000, half in 1usize..33, chunk in 1usize..400, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let x = common::random_inputs(&mut r, n, 1, 4.0);
        let y = common::random_targets(&mut r, &x);
        let eps = 0.95 / 8.0;
        let grid = build_grid(2 * half, &[eps], 1, Mask::FullRectangular, None).unwrap();
        let s = compute_summaries(&x, &y, &grid, chunk).unwrap();

        // Features written out from their definition rather than the library.
        let m = 2 * half;
        let f: Vec<Vec<f64>> = (0..m)
            .map(|row| {
                let z = ((row / 2) as f64 + 0.5) * eps;
                x.rows().map(|p| if row % 2 == 0 { (2.0 * PI * z * p[0]).cos() } else { (2.0 * PI * z * p[0]).sin() }).collect()
            })
            .collect();
        let phi = Mat::from_fn(m, m, |i, j| (0..n).map(|k| f[i][k] * f[j][k]).sum());
        let diff = Mat::from_fn(m, m, |i, j| s.phi()[(i, j)] - phi[(i, j)]);
        prop_assert!(frob(&diff) <= 1e-10 * frob(&phi));
        for i in 0..m {
            let want: f64 = (0..n).map(|k| f[i][k] * y[k]).sum();
            prop_assert!((s.ybar()[i] - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
        prop_assert!(s.nu2() >= 0.0);
        for i in 0..m {
            for j in 0..m {
                prop_assert_eq!(s.phi()[(i, j)], s.phi()[(j, i)]);
            }
        }
    }

    #[test]
    fn chunking_and_execution_do_not_change_summaries(n in 1usize..600, a in 1usize..300, b in 1usize..300, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let x = common::random_inputs(&mut r, n, 2, 3.0);
        let y = common::random_targets(&mut r, &x);
        let grid = build_grid(6, &[0.2, 0.3], 2, Mask::Spherical, Some(10)).unwrap();
        let sa = compute_summaries(&x, &y, &grid, a).unwrap();
        let sb = compute_summaries(&x, &y, &grid, b).unwrap();
        let diff = Mat::from_fn(20, 20, |i, j| sa.phi()[(i, j)] - sb.phi()[(i, j)]);
        prop_assert!(frob(&diff) <= 1e-12 * frob(sa.phi()));
        prop_assert_eq!(sa.provenance_hash(), sb.provenance_hash());

        prop_assert_eq!(&compute_summaries(&x, &y, &grid, a).unwrap(), &sa);
        let par = compute_summaries_with(&x, &y, &grid, a, Execution::from_threads(4)).unwrap();
        prop_assert_eq!(&par, &sa);
    }

    #[test]
    fn projection_of_targets_is_bounded(n in 40usize..200, half in 1usize..8, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let x = common::random_inputs(&mut r, n, 1, 3.0);
        let y = common::random_targets(&mut r, &x);
        let grid = build_grid(2 * half, &[0.3], 1, Mask::FullRectangular, None).unwrap();
        let s = compute_summaries(&x, &y, &grid, 50).unwrap();
        let m = grid.feature_count();
        let phi: common::Dense = (0..m).map(|i| (0..m).map(|j| s.phi()[(i, j)]).collect()).collect();
        let l = common::chol(&phi).expect("Φ is positive definite when N ≥ M");
        let mut w = s.ybar().to_vec();
        for i in 0..m {
            for k in 0..i {
                w[i] -= l[i][k] * w[k];
            }
            w[i] /= l[i][i];
        }
        let proj: f64 = w.iter().map(|v| v * v).sum();
        prop_assert!(proj <= s.nu2() * (1.0 + 1e-9));
    }

    #[test]
    fn cache_round_trip_is_bit_exact(n in 1usize..200, half in 1usize..10, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let x = common::random_inputs(&mut r, n, 1, 3.0);
        let y = common::random_targets(&mut r, &x);
        let grid = build_grid(2 * half, &[0.3], 1, Mask::FullRectangular, None).unwrap();
        let s = compute_summaries(&x, &y, &grid, 50).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        save_summary(&s, &p).unwrap();
        prop_assert_eq!(&load_summary(&p, s.provenance_hash()).unwrap(), &s);
    }
}
