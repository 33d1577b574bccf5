mod common;

use iff_core::features::{build_grid, default_epsilon, Mask};
use iff_core::kernels::KernelFamily;
use iff_core::train::{fit, fit_with_summary, FitReport, FitSetup, HyperParams, ModelSpec, OptConfig};
use iff_core::Execution;
use proptest::prelude::*;

/// Report with wall-clock fields removed.
fn untimed(r: &FitReport) -> FitReport {
    FitReport { precompute_seconds: 0.0, per_step_seconds: Vec::new(), ..r.clone() }
}

fn setup(model: ModelSpec, opt: OptConfig, exec: Execution) -> FitSetup {
    FitSetup { family: KernelFamily::SquaredExponential, model, opt, init: HyperParams::default_init(1), exec }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn feature_fits_are_deterministic_and_monotone(n in 30usize..300, half in 2usize..20, restarts in 0usize..3, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let x = common::random_inputs(&mut r, n, 1, 2.0);
        let y = common::random_targets(&mut r, &x);
        let grid = build_grid(2 * half, &default_epsilon(&x).unwrap(), 1, Mask::FullRectangular, None).unwrap();
        let opt = OptConfig { max_iters: 40, restarts, seed, ..Default::default() };
        let a = fit(&x, &y, &setup(ModelSpec::iff(grid.clone()), opt.clone(), Execution::Sequential)).unwrap();
        let b = fit(&x, &y, &setup(ModelSpec::iff(grid), opt, Execution::from_threads(2))).unwrap();
        prop_assert_eq!(untimed(&a.report), untimed(&b.report));
        prop_assert_eq!(a.report.precompute_calls, 1);
        prop_assert_eq!(a.report.restarts_used, restarts + 1);
        for w in a.report.objective_trace.windows(2) {
            prop_assert!(w[1].1 >= w[0].1);
        }
        prop_assert!(a.report.final_params.to_vec().iter().all(|v| v.is_finite()));
        prop_assert_eq!(a.report.objective, a.report.objective_trace.last().unwrap().1);
    }
}

#[test]
fn cached_summary_skips_precompute() {
    let mut r = common::rng(9);
    let x = common::random_inputs(&mut r, 200, 1, 2.0);
    let y = common::random_targets(&mut r, &x);
    let grid = build_grid(30, &default_epsilon(&x).unwrap(), 1, Mask::FullRectangular, None).unwrap();
    let s = setup(ModelSpec::iff(grid), OptConfig { max_iters: 30, ..Default::default() }, Execution::Sequential);
    let first = fit(&x, &y, &s).unwrap();
    let second = fit_with_summary(&x, &y, &s, first.summary.clone()).unwrap();
    assert_eq!(second.report.precompute_calls, 0);
    assert_eq!(untimed(&first.report).final_params, second.report.final_params);
}

#[test]
fn inducing_and_exact_fits_are_deterministic() {
    let mut r = common::rng(10);
    let x = common::random_inputs(&mut r, 120, 1, 2.0);
    let y = common::random_targets(&mut r, &x);
    let opt = OptConfig { max_iters: 25, restarts: 1, seed: 5, ..Default::default() };
    for model in [ModelSpec::SgprKmeans { inducing: 12 }, ModelSpec::exact()] {
        let s = setup(model, opt.clone(), Execution::Sequential);
        let a = fit(&x, &y, &s).unwrap();
        let b = fit(&x, &y, &s).unwrap();
        assert_eq!(untimed(&a.report), untimed(&b.report));
        assert_eq!(a.report.precompute_calls, 0);
    }
}
