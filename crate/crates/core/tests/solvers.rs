use mnn_core::norms::{mnn, nuclear_norm};
use mnn_core::operators::{ConvOperator, KernelName, Normalization};
use mnn_core::solvers::*;
use mnn_core::synth::{gen_mc_instance, gen_rpca_instance, gen_sparse_corruption, GenConfig, MaskScheme};
use mnn_core::tensor::{apply_mask, DenseMatrix, SampleMask};
use mnn_core::MnnError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn diff16() -> ConvOperator<f64> {
    ConvOperator::builtin(KernelName::DiffRow, 16, 16, Normalization::L1).unwrap()
}

fn small(rho_s: f64, p: f64, seed: u64) -> GenConfig {
    GenConfig {
        r: 2,
        rho_s,
        p,
        seed,
        ..GenConfig::default()
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn subgradient(step: f64, iters: usize) -> SolverConfig {
    SolverConfig {
        algorithm: Algorithm::Subgradient,
        step_size: step,
        max_iters: iters,
        ..SolverConfig::default()
    }
}

fn assert_best_so_far_monotone(report: &SolveReport) {
    assert_eq!(report.objective_history.len(), report.iterations_run);
    assert_eq!(report.rel_change_history.len(), report.iterations_run);
    let best = report.best_so_far();
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn objectives_match_recomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let op = ConvOperator::builtin(KernelName::Sobel, 6, 5, Normalization::L1).unwrap();
    let x = gaussian(30, 7, &mut rng);
    let m = gaussian(30, 7, &mut rng);
    let j1 = objective_j1(&x, &m, &op, 0.3).unwrap();
    let expected = nuclear_norm(&op.apply(&x).unwrap()).unwrap() + 0.3 * m.sub(&x).l1_norm();
    assert!((j1 - expected).abs() <= 1e-10 * expected);

    let mask = SampleMask::from_indicator(&DenseMatrix::from_fn(30, 7, |i, j| ((i + 2 * j) % 3 == 0) as u8 as f64));
    let j2 = objective_j2(&x, &m, &mask, &op, 2.5).unwrap();
    let r = apply_mask(&m.sub(&x), &mask).unwrap();
    let expected = mnn(&x, &op).unwrap() + 2.5 * r.frobenius_norm_sq();
    assert!((j2 - expected).abs() <= 1e-10 * expected);
}

#[test]
fn subgradient_rpca_without_corruption() {
    let inst = gen_rpca_instance(&small(0.0, 0.4, 1)).unwrap();
    let sol = solve_rpca(&inst.m, &diff16(), &subgradient(1e-4, 5000)).unwrap();
    assert!(sol.x_hat.rel_error(&inst.m) <= 0.05);
    assert_best_so_far_monotone(&sol.report);
    assert_eq!(sol.x_hat.add(&sol.s_hat), inst.m);
}

#[test]
fn huge_step_never_returns_nan() {
    let inst = gen_rpca_instance(&small(0.1, 0.4, 2)).unwrap();
    match solve_rpca(&inst.m, &diff16(), &subgradient(1e3, 200)) {
        Err(MnnError::Divergence { .. }) => {}
        Ok(sol) => {
            assert!(!sol.report.converged);
            assert!(sol.x_hat.is_finite());
        }
        Err(e) => panic!("unexpected error {e}"),
    }
}

#[test]
fn admm_rpca_without_corruption_returns_input() {
    let inst = gen_rpca_instance(&small(0.0, 0.4, 3)).unwrap();
    let sol = solve_rpca(&inst.m, &diff16(), &SolverConfig::default()).unwrap();
    assert!(sol.x_hat.rel_error(&inst.m) <= 1e-4);
    assert!(sol.s_hat.frobenius_norm() <= 1e-4 * inst.m.frobenius_norm());
}

#[test]
fn admm_rpca_residuals_below_tolerance() {
    let op = diff16();
    let inst = gen_rpca_instance(&small(0.05, 0.4, 4)).unwrap();
    let cfg = SolverConfig::default();
    let sol = solve_rpca(&inst.m, &op, &cfg).unwrap();
    assert!(sol.report.converged);
    let r2 = inst.m.sub(&sol.x_hat).sub(&sol.s_hat).frobenius_norm();
    assert!(r2 < cfg.rel_tol * inst.m.frobenius_norm());
    assert!(*sol.report.rel_change_history.last().unwrap() < cfg.rel_tol);
    assert_best_so_far_monotone(&sol.report);
}

#[test]
fn rpca_solvers_agree() {
    let op = diff16();
    let inst = gen_rpca_instance(&small(0.05, 0.4, 5)).unwrap();
    let admm = solve_rpca(&inst.m, &op, &SolverConfig::default()).unwrap();
    let sub = solve_rpca(&inst.m, &op, &subgradient(1e-2, 5000)).unwrap();
    let gap = admm.x_hat.sub(&sub.x_hat).frobenius_norm() / inst.x0.frobenius_norm();
    assert!(gap <= 0.05, "gap {gap}");
}

#[test]
fn identity_operator_recovers_classical_rpca() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x0 = gaussian(100, 2, &mut rng).matmul(&gaussian(2, 50, &mut rng)).unwrap();
    let m = x0.add(&gen_sparse_corruption(100, 50, 0.05, 6).unwrap());
    let op = ConvOperator::identity(10, 10).unwrap();
    let sol = solve_rpca(&m, &op, &SolverConfig::default()).unwrap();
    assert!(sol.x_hat.rel_error(&x0) <= 1e-3);
    let lambda = default_lambda(100, 50).unwrap();
    let j_hat = objective_j1(&sol.x_hat, &m, &op, lambda).unwrap();
    let j0 = objective_j1(&x0, &m, &op, lambda).unwrap();
    assert!(j_hat <= j0 * (1.0 + 1e-6) + 1e-8);
}

#[test]
fn mc_subgradient_full_mask() {
    let inst = gen_mc_instance(&small(0.0, 1.0, 7), MaskScheme::Bernoulli).unwrap();
    assert_eq!(inst.mask.count(), inst.m.len());
    let sol = solve_mc(&inst.m, &inst.mask, &diff16(), &subgradient(1e-4, 200)).unwrap();
    assert!(sol.x_hat.rel_error(&inst.x0) <= 0.05);
    assert_best_so_far_monotone(&sol.report);
}

#[test]
fn mc_subgradient_fits_observed_entries() {
    let cfg = SolverConfig {
        max_iters: 2000,
        ..subgradient(1e-4, 2000)
    };
    let inst = gen_mc_instance(&small(0.0, 0.4, 8), MaskScheme::Bernoulli).unwrap();
    let sol = solve_mc(&inst.m, &inst.mask, &diff16(), &cfg).unwrap();
    let resid = apply_mask(&sol.x_hat.sub(&inst.m), &inst.mask).unwrap();
    let rms = resid.frobenius_norm() / (inst.mask.count() as f64).sqrt();
    assert!(rms <= 10.0 * cfg.sigma, "rms {rms}");
    if sol.report.converged {
        assert!(*sol.report.rel_change_history.last().unwrap() < cfg.rel_tol);
    }
}

#[test]
fn mc_admm_large_weight_interpolates() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = gaussian(36, 8, &mut rng);
    let op = ConvOperator::identity(6, 6).unwrap();
    let cfg = SolverConfig {
        mu: Some(1e6),
        ..SolverConfig::default()
    };
    let sol = solve_mc(&m, &SampleMask::full(36, 8), &op, &cfg).unwrap();
    assert!(sol.x_hat.rel_error(&m) <= 1e-3);
}

#[test]
fn mc_solvers_agree() {
    // a unit data weight keeps the fixed-step subgradient iteration well conditioned
    let op = diff16();
    let inst = gen_mc_instance(&small(0.0, 0.3, 10), MaskScheme::Bernoulli).unwrap();
    let admm = SolverConfig {
        mu: Some(1.0),
        ..SolverConfig::default()
    };
    let sub = SolverConfig {
        mu: Some(1.0),
        ..subgradient(0.2, 5000)
    };
    let a = solve_mc(&inst.m, &inst.mask, &op, &admm).unwrap();
    let s = solve_mc(&inst.m, &inst.mask, &op, &sub).unwrap();
    let gap = a.x_hat.sub(&s.x_hat).frobenius_norm() / inst.x0.frobenius_norm();
    assert!(gap <= 0.05, "gap {gap}");
    assert_best_so_far_monotone(&a.report);
    assert_best_so_far_monotone(&s.report);
}

#[test]
fn empty_mask_is_rejected() {
    let m = DenseMatrix::filled(256, 4, 1.0);
    let empty = SampleMask::empty(256, 4);
    for cfg in [SolverConfig::default(), subgradient(1e-4, 10)] {
        assert!(matches!(solve_mc(&m, &empty, &diff16(), &cfg), Err(MnnError::Config(_))));
    }
}

#[test]
fn solves_are_deterministic() {
    let op = diff16();
    let inst = gen_rpca_instance(&small(0.1, 0.4, 11)).unwrap();
    let cfg = SolverConfig {
        max_iters: 100,
        ..SolverConfig::default()
    };
    let mut a = solve_rpca(&inst.m, &op, &cfg).unwrap();
    let mut b = solve_rpca(&inst.m, &op, &cfg).unwrap();
    assert_eq!(a.x_hat, b.x_hat);
    a.report.wall_time = 0.0;
    b.report.wall_time = 0.0;
    assert_eq!(a.report, b.report);
}

#[test]
fn default_parameter_examples() {
    assert!((default_lambda(2500, 100).unwrap() - 0.02).abs() < 1e-15);
    assert!((default_mu(100, 100, 1.0, 1e-4).unwrap() - 2e-3).abs() < 1e-15);
    assert!(default_mu(100, 100, 0.0, 1e-4).is_err());
    assert!(default_mu(100, 100, 0.5, 0.0).is_err());
}
