//! Reference implementations shared by the integration tests.

#![allow(dead_code)]

use mnn_core::operators::{ConvOperator, KernelName, Normalization};
use mnn_core::tensor::DenseMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const ALL_KERNELS: [KernelName; 7] = [
    KernelName::Identity,
    KernelName::DiffRow,
    KernelName::DiffCol,
    KernelName::CentralDiff,
    KernelName::Sobel,
    KernelName::Laplacian1,
    KernelName::Laplacian2,
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn to_na(m: &DenseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

pub fn from_na(m: &DMatrix<f64>) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `n x n` matrix with `(S x)(i) = x((i + d) mod n)`.
fn cyclic_shift(n: usize, d: isize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, k| {
        (k == (i as isize + d).rem_euclid(n as isize) as usize) as u8 as f64
    })
}

/// The `(h*w) x (h*w)` matrix of a plane filter, assembled as
/// `sum_t tap_t * kron(S_w(dj), S_h(di))` acting on column-major planes.
pub fn block_circulant(op: &ConvOperator<f64>) -> DMatrix<f64> {
    let (h, w) = op.plane_dims();
    let k = op.kernel();
    let (ar, ac) = k.anchor();
    let mut a = DMatrix::zeros(h * w, h * w);
    for r in 0..k.height() {
        for c in 0..k.width() {
            let t = k.tap(r, c);
            if t != 0.0 {
                let di = r as isize - ar as isize;
                let dj = c as isize - ac as isize;
                a += cyclic_shift(w, dj).kronecker(&cyclic_shift(h, di)) * t;
            }
        }
    }
    a
}

pub fn random_kernel_op(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ConvOperator<f64> {
    let name = ALL_KERNELS[rng.random_range(0..ALL_KERNELS.len())];
    let mode = [Normalization::L1, Normalization::L2, Normalization::None][rng.random_range(0..3)];
    ConvOperator::builtin(name, h, w, mode).unwrap()
}

/// Singular values from nalgebra, descending.
pub fn reference_singular_values(m: &DenseMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(m).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn reference_nuclear(m: &DenseMatrix<f64>) -> f64 {
    reference_singular_values(m).iter().sum()
}
