mod common;

use common::*;
use mnn_core::norms::{mnn, nuclear_norm, svd_thin, svt};
use mnn_core::operators::{ConvOperator, KernelName, Normalization};
use mnn_core::synth::{gen_lowrank_smooth, gen_mask, gen_sparse_corruption, GenConfig, MaskScheme};
use mnn_core::tensor::DenseMatrix;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn singular_values_match_reference(rows in 1usize..14, cols in 1usize..14, seed in any::<u64>()) {
        let x = gaussian(rows, cols, &mut rng(seed));
        let reference = reference_singular_values(&x);
        let f = svd_thin(&x, 0.0).unwrap();
        for (a, b) in f.sigma.iter().zip(&reference) {
            prop_assert!(rel_close(*a, *b, 1e-10));
        }
        prop_assert!(rel_close(nuclear_norm(&x).unwrap(), reference.iter().sum(), 1e-10));
        let back = f.reconstruct(rows, cols);
        prop_assert!(back.sub(&x).frobenius_norm() <= 1e-10 * x.frobenius_norm());
    }

    #[test]
    fn explicit_matrix_reproduces_apply(h in 1usize..7, w in 1usize..7, b in 1usize..4, seed in any::<u64>()) {
        let mut g = rng(seed);
        let op = random_kernel_op(&mut g, h, w);
        let a = block_circulant(&op);
        let x = gaussian(h * w, b, &mut g);
        let expected = from_na(&(&a * to_na(&x)));
        prop_assert!(op.apply(&x).unwrap().sub(&expected).max_abs() <= 1e-10);
        let expected_t = from_na(&(a.transpose() * to_na(&x)));
        prop_assert!(op.adjoint(&x).unwrap().sub(&expected_t).max_abs() <= 1e-10);
        prop_assert!(op.apply_spectral(&x).unwrap().sub(&expected).max_abs() <= 1e-10);
    }

    #[test]
    fn svt_matches_reference_shrinkage(rows in 1usize..10, cols in 1usize..10, tau in 0.0f64..2.0, seed in any::<u64>()) {
        let x = gaussian(rows, cols, &mut rng(seed));
        let svd = to_na(&x).svd(true, true);
        let mut s = svd.singular_values.clone();
        s.iter_mut().for_each(|v| *v = (*v - tau).max(0.0));
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let reference = from_na(&(u * DMatrix::from_diagonal(&s) * vt));
        prop_assert!(svt(&x, tau).unwrap().sub(&reference).max_abs() <= 1e-9);
    }
}

#[test]
fn spectrum_moduli_are_singular_values() {
    for name in ALL_KERNELS {
        let op = ConvOperator::builtin(name, 5, 4, Normalization::L1).unwrap();
        let mut moduli: Vec<f64> = op.spectrum().iter().map(|c| c.norm()).collect();
        moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let reference: Vec<f64> = {
            let mut s: Vec<f64> = block_circulant(&op).singular_values().iter().copied().collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            s
        };
        for (a, b) in moduli.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-10, "{name}: {a} vs {b}");
        }
        assert!((op.operator_norm() - reference[0]).abs() < 1e-10);
        let zeros = reference.iter().filter(|&&s| s < 1e-9).count();
        assert_eq!(op.injectivity_report().nullspace_dim, zeros, "{name}");
    }
}

#[test]
fn shifted_gram_solve_matches_dense_solve() {
    let mut g = rng(12);
    for name in ALL_KERNELS {
        let op = ConvOperator::builtin(name, 6, 5, Normalization::L2).unwrap();
        let a = block_circulant(&op);
        let rhs = gaussian(30, 3, &mut g);
        let (alpha, beta) = (1.7, 0.3);
        let lhs = a.transpose() * &a * alpha + DMatrix::identity(30, 30) * beta;
        let reference = from_na(&lhs.lu().solve(&to_na(&rhs)).unwrap());
        let got = op.solve_shifted_gram(&rhs, alpha, beta).unwrap();
        assert!(got.sub(&reference).max_abs() <= 1e-9, "{name}");
    }
}

#[test]
fn mnn_equals_nuclear_norm_of_explicit_product() {
    let mut g = rng(13);
    for name in ALL_KERNELS {
        let op = ConvOperator::builtin(name, 4, 6, Normalization::L1).unwrap();
        let x = gaussian(24, 5, &mut g);
        let reference = reference_nuclear(&from_na(&(block_circulant(&op) * to_na(&x))));
        assert!(rel_close(mnn(&x, &op).unwrap(), reference, 1e-10), "{name}");
    }
    let x = gaussian(16, 3, &mut g);
    let id = ConvOperator::identity(4, 4).unwrap();
    assert!(rel_close(mnn(&x, &id).unwrap(), reference_nuclear(&x), 1e-12));
}

#[test]
fn generated_data_statistics() {
    // rank and regularity
    for seed in 0..20 {
        let cfg = GenConfig {
            r: 3,
            seed,
            ..GenConfig::default()
        };
        let x0 = gen_lowrank_smooth(&cfg).unwrap().x0;
        let s = reference_singular_values(&x0);
        assert!(s[2] > 1e-8 * s[0] && s[3] < 1e-10 * s[0], "seed {seed}");
        let op = ConvOperator::builtin(KernelName::DiffRow, 16, 16, Normalization::L1).unwrap();
        let g = gaussian(256, 30, &mut rng(seed)).scale(x0.frobenius_norm() / (256.0 * 30.0f64).sqrt());
        assert!(mnn(&x0, &op).unwrap() < mnn(&g, &op).unwrap());
    }

    // corruption support size and sign balance
    let s = gen_sparse_corruption(256, 30, 0.1, 5).unwrap();
    let pos = s.as_slice().iter().filter(|&&v| v == 1.0).count() as f64;
    let neg = s.as_slice().iter().filter(|&&v| v == -1.0).count() as f64;
    assert_eq!(pos + neg, (0.1f64 * 7680.0).round());
    assert!((pos - neg).abs() <= 4.0 * (pos + neg).sqrt());

    // bernoulli mask count within four standard deviations
    let (n, p) = (7680.0, 0.3);
    let mask = gen_mask(256, 30, p, 6, MaskScheme::Bernoulli).unwrap();
    assert!((mask.count() as f64 - n * p).abs() <= 4.0 * (n * p * (1.0 - p)).sqrt());
    let exact = gen_mask(256, 30, p, 6, MaskScheme::UniformM).unwrap();
    assert_eq!(exact.count(), 2304);
}

#[test]
fn nested_corruption_supports() {
    let small = gen_sparse_corruption(64, 10, 0.1, 9).unwrap();
    let large = gen_sparse_corruption(64, 10, 0.3, 9).unwrap();
    for (a, b) in small.as_slice().iter().zip(large.as_slice()) {
        if *a != 0.0 {
            assert_ne!(*b, 0.0);
        }
    }
    let zero = gen_sparse_corruption(64, 10, 0.0, 9).unwrap();
    assert_eq!(zero, DenseMatrix::zeros(64, 10));
}
