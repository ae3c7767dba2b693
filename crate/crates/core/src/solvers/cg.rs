use crate::error::{MnnError, Result};
use crate::scalar::Scalar;
use crate::tensor::DenseMatrix;

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// semidefinite operator, warm-started at `x`. Converges when
/// `||b - A x|| <= tol ||b||`; returns the iteration count.
pub fn pcg<T: Scalar>(
    apply: impl Fn(&DenseMatrix<T>) -> DenseMatrix<T>,
    b: &DenseMatrix<T>,
    x: &mut DenseMatrix<T>,
    diag: &DenseMatrix<T>,
    tol: f64,
    max_iters: usize,
) -> Result<usize> {
    let b_norm = b.frobenius_norm().as_f64();
    if b_norm == 0.0 {
        *x = DenseMatrix::zeros(b.rows(), b.cols());
        return Ok(0);
    }
    let target = tol * b_norm;
    let precond = |r: &DenseMatrix<T>| {
        r.zip_map(diag, |v, d| if d > T::zero() { v / d } else { v })
    };
    let mut r = b.sub(&apply(x));
    let mut res = r.frobenius_norm().as_f64();
    if res <= target {
        return Ok(0);
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = r.inner(&z);
    for iter in 1..=max_iters {
        let ap = apply(&p);
        let pap = p.inner(&ap);
        if pap <= T::zero() {
            // direction in the nullspace; the residual cannot shrink further
            break;
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        res = r.frobenius_norm().as_f64();
        if !res.is_finite() {
            return Err(MnnError::Numerics("CG residual is not finite".into()));
        }
        if res <= target {
            return Ok(iter);
        }
        z = precond(&r);
        let rz_new = r.inner(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = p.scale(beta);
        p.axpy(T::one(), &z);
    }
    Err(MnnError::InnerSolve {
        iterations: max_iters,
        residual: res / b_norm,
    })
}
