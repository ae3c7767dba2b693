//! Nuclear and modified nuclear norms, proximal maps, the MNN subgradient
//! and incoherence statistics.

mod prox;
mod svd;

pub use prox::{soft_threshold, svt};
pub use svd::{svd_thin, SvdFactors};

pub(crate) use prox::{shrink, svt_with_norm};
pub(crate) use svd::singular_values;

use crate::error::{MnnError, Result};
use crate::operators::ConvOperator;
use crate::scalar::Scalar;
use crate::tensor::DenseMatrix;

/// Relative rank tolerance used when callers do not pick one.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Sum of singular values.
pub fn nuclear_norm<T: Scalar>(x: &DenseMatrix<T>) -> Result<T> {
    Ok(singular_values(x)?.into_iter().sum())
}

/// `||D(x)||_*`.
pub fn mnn<T: Scalar>(x: &DenseMatrix<T>, op: &ConvOperator<T>) -> Result<T> {
    nuclear_norm(&op.apply(x)?)
}

/// Frobenius, nuclear and entrywise l1 norms of `D(x)`. For any matrix
/// these are ordered `frob <= nuclear <= l1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSandwich<T> {
    pub frob: T,
    pub nuclear: T,
    pub l1: T,
}

pub fn norm_sandwich<T: Scalar>(x: &DenseMatrix<T>, op: &ConvOperator<T>) -> Result<NormSandwich<T>> {
    let d = op.apply(x)?;
    Ok(NormSandwich {
        frob: d.frobenius_norm(),
        nuclear: nuclear_norm(&d)?,
        l1: d.l1_norm(),
    })
}

/// A subgradient of `||D(.)||_*` at `x`: `D^T(U V^T)` from the thin SVD of
/// `D(x)`, taking the free component on the orthogonal complement as zero.
pub fn mnn_subgradient<T: Scalar>(x: &DenseMatrix<T>, op: &ConvOperator<T>, rank_tol: T) -> Result<DenseMatrix<T>> {
    let dx = op.apply(x)?;
    let f = svd_thin(&dx, rank_tol)?;
    op.adjoint(&f.polar_factor(dx.rows(), dx.cols()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncoherenceReport {
    pub mu_u: f64,
    pub mu_v: f64,
    pub mu_uv: f64,
    /// `max(mu_u, mu_v, mu_uv)`.
    pub mu: f64,
    pub rank: usize,
}

/// Incoherence parameters of the row and column spaces of `x`:
/// `mu_u = (n1/r) max_k ||U^T e_k||^2`, `mu_v` likewise with `V`, and
/// `mu_uv = (n1 n2 / r) ||U V^T||_inf^2`.
pub fn incoherence<T: Scalar>(x: &DenseMatrix<T>, rank_tol: T) -> Result<IncoherenceReport> {
    let f = svd_thin(x, rank_tol)?;
    let r = f.rank();
    if r == 0 {
        return Err(MnnError::DegenerateInput(
            "incoherence of a zero matrix is undefined".into(),
        ));
    }
    let (n1, n2) = x.shape();
    let max_row_energy = |m: &DenseMatrix<T>| {
        (0..m.rows())
            .map(|i| m.row(i).iter().map(|&v| v * v).sum::<T>())
            .fold(T::zero(), |a, b| a.max(b))
            .as_f64()
    };
    let rf = r as f64;
    let mu_u = n1 as f64 / rf * max_row_energy(&f.u);
    let mu_v = n2 as f64 / rf * max_row_energy(&f.v);
    let uv = f.polar_factor(n1, n2).max_abs().as_f64();
    let mu_uv = (n1 * n2) as f64 / rf * uv * uv;
    Ok(IncoherenceReport {
        mu_u,
        mu_v,
        mu_uv,
        mu: mu_u.max(mu_v).max(mu_uv),
        rank: r,
    })
}
