mod common;

use common::{model, rng, trace_prod};
use faer::Mat;
use mwgl::missing::{
    initial_impute, mwgl_missing_solve, structural_mask, tikhonov_filter, tikhonov_refine, ImputationConfig,
    MaskPattern, MaskSpec, ObservationMask,
};
use mwgl::model::{mode_covariances, sample_igmrf};
use mwgl::solver::{mwgl_solve_signals, SolverConfig};
use mwgl::{SignalSet, WeightVector};
use proptest::prelude::*;
use rand::Rng;

fn observed_unchanged(before: &SignalSet, after: &SignalSet, mask: &ObservationMask) -> bool {
    before.samples().iter().zip(after.samples()).all(|(x, y)| {
        (0..mask.p1())
            .all(|i| (0..mask.p2()).all(|j| mask.is_missing(i, j) || x[(i, j)].to_bits() == y[(i, j)].to_bits()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn observed_entries_are_never_modified(
        p1 in 3usize..=6,
        p2 in 3usize..=6,
        seed in any::<u64>(),
        block in any::<bool>(),
    ) {
        let truth = model(p1, p2, seed);
        let x = sample_igmrf(&truth, 40, seed).unwrap();
        let pattern = if block { MaskPattern::Block } else { MaskPattern::RandomNodes };
        let mask = structural_mask(p1, p2, &MaskSpec { fraction: 0.25, pattern, seed }).unwrap();
        let imputed = initial_impute(&x, &mask).unwrap();
        prop_assert!(observed_unchanged(&x, &imputed, &mask));
        let refined = tikhonov_refine(&imputed, &mask, &truth.g1, &truth.g2, 0.7).unwrap();
        prop_assert!(observed_unchanged(&x, &refined, &mask));
        let cfg = ImputationConfig { beta: 1.0, solver: SolverConfig { max_iter: 300, ..SolverConfig::default() } };
        let out = mwgl_missing_solve(&x, &mask, &cfg).unwrap();
        prop_assert!(observed_unchanged(&x, &out.imputed, &mask));
    }

    #[test]
    fn zero_beta_is_identity(p1 in 2usize..=5, p2 in 2usize..=5, seed in any::<u64>()) {
        let truth = model(p1, p2, seed);
        let x = sample_igmrf(&truth, 5, seed).unwrap();
        let mask = ObservationMask::from_missing(p1, p2, [(0, 0)]).unwrap();
        prop_assert_eq!(tikhonov_refine(&x, &mask, &truth.g1, &truth.g2, 0.0).unwrap(), x);
    }

    #[test]
    fn filtering_contracts_mode_energy(p1 in 2usize..=6, p2 in 2usize..=6, seed in any::<u64>(), beta in 0.01..10.0f64) {
        let mut r = rng(seed);
        let truth = model(p1, p2, seed);
        let samples = (0..10).map(|_| Mat::from_fn(p1, p2, |_, _| r.random_range(-1.0..1.0))).collect();
        let x = SignalSet::new(p1, p2, samples).unwrap();
        let y = tikhonov_filter(&x, &truth.g1, &truth.g2, beta).unwrap();
        let (l1, l2) = (truth.g1.laplacian(), truth.g2.laplacian());
        let (sx, sy) = (mode_covariances(&x).unwrap(), mode_covariances(&y).unwrap());
        let e1 = trace_prod(l1.as_mat(), sx.s1.as_ref());
        let e2 = trace_prod(l2.as_mat(), sx.s2.as_ref());
        prop_assert!(trace_prod(l1.as_mat(), sy.s1.as_ref()) <= e1 * (1.0 + 1e-12));
        prop_assert!(trace_prod(l2.as_mat(), sy.s2.as_ref()) <= e2 * (1.0 + 1e-12));
    }

    #[test]
    fn constant_signals_pass_through(p1 in 2usize..=5, p2 in 2usize..=5, seed in any::<u64>(), c in -3.0..3.0f64, beta in 0.0..5.0f64) {
        let truth = model(p1, p2, seed);
        let x = SignalSet::new(p1, p2, vec![Mat::from_fn(p1, p2, |_, _| c)]).unwrap();
        let y = tikhonov_filter(&x, &truth.g1, &truth.g2, beta).unwrap();
        for i in 0..p1 {
            for j in 0..p2 {
                prop_assert!((y.samples()[0][(i, j)] - c).abs() <= 1e-12 * c.abs().max(1.0));
            }
        }
    }
}

#[test]
fn empty_mask_reproduces_full_solver_exactly() {
    for seed in 0..4 {
        let truth = model(4, 5, seed);
        let x = sample_igmrf(&truth, 100, seed).unwrap();
        let cfg = ImputationConfig {
            beta: 1.0,
            solver: SolverConfig { alpha: 0.01, max_iter: 3000, ..SolverConfig::default() },
        };
        let missing = mwgl_missing_solve(&x, &ObservationMask::complete(4, 5), &cfg).unwrap();
        let full = mwgl_solve_signals(&x, &cfg.solver, None).unwrap();
        assert_eq!(missing.result, full);
        assert_eq!(missing.imputed, x);
    }
}

/// As `β → 0` refinement disappears and the learned factors are those of the
/// full solver run on the initial imputation.
#[test]
fn vanishing_beta_matches_solver_on_initial_imputation() {
    let truth = model(4, 5, 9);
    let x = sample_igmrf(&truth, 200, 9).unwrap();
    let mask = ObservationMask::from_missing(4, 5, [(1, 2), (3, 0)]).unwrap();
    let solver = SolverConfig { tol: 1e-8, max_iter: 400_000, ..SolverConfig::default() };
    let tiny = mwgl_missing_solve(&x, &mask, &ImputationConfig { beta: 1e-12, solver: solver.clone() }).unwrap();
    let reference = mwgl_solve_signals(&initial_impute(&x, &mask).unwrap(), &solver, None).unwrap();
    assert!(tiny.result.converged && reference.converged);
    for (a, b) in [(&tiny.result.w1, &reference.w1), (&tiny.result.w2, &reference.w2)] {
        for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((u - v).abs() <= 1e-4 * v.abs().max(1.0), "{u} vs {v}");
        }
    }
}

/// 2x2 grid with unit path factors, `β = 1`: `(βL + I)⁻¹ = [[2, 1], [1, 2]] / 3`.
#[test]
fn two_by_two_refinement_matches_dense_solve() {
    let path = WeightVector::new(2, vec![1.0]).unwrap();
    let x = SignalSet::new(2, 2, vec![Mat::from_fn(2, 2, |i, j| [[1.0, 2.0], [3.0, 2.5]][i][j])]).unwrap();
    let mask = ObservationMask::from_missing(2, 2, [(1, 1)]).unwrap();
    let out = tikhonov_refine(&x, &mask, &path, &path, 1.0).unwrap();

    let a = [[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
    let xm = [[1.0, 2.0], [3.0, 2.5]];
    let mut expected = 0.0;
    for k in 0..2 {
        for l in 0..2 {
            expected += a[1][k] * xm[k][l] * a[l][1];
        }
    }
    let got = out.samples()[0][(1, 1)];
    assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    assert_eq!(out.samples()[0][(0, 0)], 1.0);
    assert_eq!(out.samples()[0][(1, 0)], 3.0);
}
