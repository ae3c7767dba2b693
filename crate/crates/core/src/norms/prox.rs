use super::svd::{full_svd, weighted_outer};
use crate::error::{MnnError, Result};
use crate::scalar::Scalar;
use crate::tensor::DenseMatrix;

fn check_tau<T: Scalar>(tau: T) -> Result<()> {
    if tau >= T::zero() && tau.is_finite() {
        Ok(())
    } else {
        Err(MnnError::config(format!("threshold must be >= 0, got {tau}")))
    }
}

/// Singular value thresholding: the proximal map of `tau ||.||_*`.
pub fn svt<T: Scalar>(x: &DenseMatrix<T>, tau: T) -> Result<DenseMatrix<T>> {
    Ok(svt_with_norm(x, tau)?.0)
}

/// [`svt`] plus the nuclear norm of its output.
pub(crate) fn svt_with_norm<T: Scalar>(x: &DenseMatrix<T>, tau: T) -> Result<(DenseMatrix<T>, T)> {
    check_tau(tau)?;
    let f = full_svd(x)?;
    let shrunk: Vec<T> = f.sigma.iter().map(|&s| (s - tau).max(T::zero())).collect();
    let norm = shrunk.iter().copied().sum();
    Ok((weighted_outer(&f.u, &shrunk, &f.v, x.rows(), x.cols()), norm))
}

/// Entrywise soft thresholding: the proximal map of `tau ||.||_1`.
pub fn soft_threshold<T: Scalar>(x: &DenseMatrix<T>, tau: T) -> Result<DenseMatrix<T>> {
    check_tau(tau)?;
    Ok(x.map(|v| shrink(v, tau)))
}

#[inline]
pub(crate) fn shrink<T: Scalar>(v: T, tau: T) -> T {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        T::zero()
    }
}
