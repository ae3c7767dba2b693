//! Thin SVD by Householder QR followed by one-sided Jacobi on the
//! triangular factor.
//!
//! Jacobi gives high relative accuracy on the small singular values, which
//! matters for numerical rank decisions and for `U V^T` in the subgradient.

use crate::error::{MnnError, Result};
use crate::scalar::Scalar;
use crate::tensor::DenseMatrix;

const MAX_SWEEPS: usize = 80;

/// Truncated SVD `x ~= U diag(sigma) V^T` keeping the singular values above
/// the rank tolerance.
#[derive(Clone, Debug)]
pub struct SvdFactors<T> {
    /// `n1 x r`, orthonormal columns.
    pub u: DenseMatrix<T>,
    /// Nonincreasing, length `r`.
    pub sigma: Vec<T>,
    /// `n2 x r`, orthonormal columns.
    pub v: DenseMatrix<T>,
}

impl<T: Scalar> SvdFactors<T> {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self, rows: usize, cols: usize) -> DenseMatrix<T> {
        weighted_outer(&self.u, &self.sigma, &self.v, rows, cols)
    }

    /// `U V^T`, or the zero matrix when the rank is 0.
    pub fn polar_factor(&self, rows: usize, cols: usize) -> DenseMatrix<T> {
        let ones = vec![T::one(); self.sigma.len()];
        weighted_outer(&self.u, &ones, &self.v, rows, cols)
    }
}

/// `sum_k weights[k] u_k v_k^T`, skipping zero weights.
pub(crate) fn weighted_outer<T: Scalar>(
    u: &DenseMatrix<T>,
    weights: &[T],
    v: &DenseMatrix<T>,
    rows: usize,
    cols: usize,
) -> DenseMatrix<T> {
    let mut out = DenseMatrix::zeros(rows, cols);
    for (k, &wk) in weights.iter().enumerate() {
        if wk == T::zero() {
            continue;
        }
        for i in 0..rows {
            let a = wk * u[(i, k)];
            if a == T::zero() {
                continue;
            }
            let row = out.row_mut(i);
            for (j, o) in row.iter_mut().enumerate() {
                *o += a * v[(j, k)];
            }
        }
    }
    out
}

/// Complete thin decomposition with `k = min(rows, cols)` triplets. Columns
/// of `u`/`v` paired with a zero singular value are zero.
#[derive(Clone, Debug)]
pub(crate) struct FullSvd<T> {
    pub u: DenseMatrix<T>,
    pub sigma: Vec<T>,
    pub v: DenseMatrix<T>,
}

/// Column-major work matrix.
struct ColMajor<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> ColMajor<T> {
    fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn two_cols_mut(&mut self, p: usize, q: usize) -> (&mut [T], &mut [T]) {
        debug_assert!(p < q);
        let (left, right) = self.data.split_at_mut(q * self.rows);
        (&mut left[p * self.rows..(p + 1) * self.rows], &mut right[..self.rows])
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Householder QR of a tall column-major matrix. Returns `R` (`n x n`,
/// column-major) and the reflectors (unit vectors, `None` for identity).
fn householder_qr<T: Scalar>(mut a: ColMajor<T>) -> (ColMajor<T>, Vec<Option<Vec<T>>>) {
    let (m, n) = (a.rows, a.cols);
    let mut reflectors = Vec::with_capacity(n);
    for k in 0..n {
        let x = &a.col(k)[k..];
        let norm = dot(x, x).sqrt();
        if norm == T::zero() {
            reflectors.push(None);
            continue;
        }
        let alpha = if x[0] >= T::zero() { -norm } else { norm };
        let mut v: Vec<T> = x.to_vec();
        v[0] -= alpha;
        let vn = dot(&v, &v).sqrt();
        if vn == T::zero() {
            reflectors.push(None);
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= vn;
        }
        for j in k..n {
            let col = &mut a.col_mut(j)[k..];
            let d = T::of(2.0) * dot(&v, col);
            for (c, &vi) in col.iter_mut().zip(&v) {
                *c -= d * vi;
            }
        }
        reflectors.push(Some(v));
    }
    let mut r = ColMajor {
        rows: n,
        cols: n,
        data: vec![T::zero(); n * n],
    };
    for j in 0..n {
        for i in 0..=j.min(m - 1) {
            r.data[i + n * j] = a.data[i + m * j];
        }
    }
    (r, reflectors)
}

/// One-sided Jacobi on the columns of `w`; rotations are accumulated into
/// `v` when given. On return the columns of `w` are mutually orthogonal.
fn jacobi_orthogonalize<T: Scalar>(w: &mut ColMajor<T>, mut v: Option<&mut ColMajor<T>>) -> Result<()> {
    let n = w.cols;
    let tol = T::EPS * T::of(n.max(1) as f64).sqrt();
    // columns below this energy are rounding noise; rotating them can cycle
    let total: T = w.data.iter().map(|&x| x * x).sum();
    let negligible = total * T::EPS * T::EPS;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (wp, wq) = w.two_cols_mut(p, q);
                let alpha = dot(wp, wp);
                let beta = dot(wq, wq);
                let gamma = dot(wp, wq);
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for (a, b) in wp.iter_mut().zip(wq.iter_mut()) {
                    let (x, y) = (*a, *b);
                    *a = c * x - s * y;
                    *b = s * x + c * y;
                }
                if let Some(v) = v.as_deref_mut() {
                    let (vp, vq) = v.two_cols_mut(p, q);
                    for (a, b) in vp.iter_mut().zip(vq.iter_mut()) {
                        let (x, y) = (*a, *b);
                        *a = c * x - s * y;
                        *b = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(MnnError::Numerics(format!(
        "Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
    )))
}

fn check_finite<T: Scalar>(x: &DenseMatrix<T>) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(MnnError::Numerics("non-finite entry in SVD input".into()))
    }
}

fn tall_col_major<T: Scalar>(x: &DenseMatrix<T>) -> (ColMajor<T>, bool) {
    if x.rows() >= x.cols() {
        (
            ColMajor {
                rows: x.rows(),
                cols: x.cols(),
                data: x.to_col_major(),
            },
            false,
        )
    } else {
        // column-major storage of x^T is row-major storage of x
        (
            ColMajor {
                rows: x.cols(),
                cols: x.rows(),
                data: x.as_slice().to_vec(),
            },
            true,
        )
    }
}

/// Singular values only, nonincreasing.
pub(crate) fn singular_values<T: Scalar>(x: &DenseMatrix<T>) -> Result<Vec<T>> {
    check_finite(x)?;
    let (a, _) = tall_col_major(x);
    let (mut r, _) = householder_qr(a);
    jacobi_orthogonalize(&mut r, None)?;
    let mut s: Vec<T> = (0..r.cols).map(|j| dot(r.col(j), r.col(j)).sqrt()).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(s)
}

pub(crate) fn full_svd<T: Scalar>(x: &DenseMatrix<T>) -> Result<FullSvd<T>> {
    check_finite(x)?;
    let (a, transposed) = tall_col_major(x);
    let (m, n) = (a.rows, a.cols);
    let (mut r, reflectors) = householder_qr(a);
    let mut vr = ColMajor {
        rows: n,
        cols: n,
        data: vec![T::zero(); n * n],
    };
    for j in 0..n {
        vr.data[j + n * j] = T::one();
    }
    jacobi_orthogonalize(&mut r, Some(&mut vr))?;

    let mut order: Vec<(usize, T)> = (0..n).map(|j| (j, dot(r.col(j), r.col(j)).sqrt())).collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    // B = [U_r; 0], then U = Q B
    let mut ub = ColMajor {
        rows: m,
        cols: n,
        data: vec![T::zero(); m * n],
    };
    let mut sigma = Vec::with_capacity(n);
    let mut vsorted = ColMajor {
        rows: n,
        cols: n,
        data: vec![T::zero(); n * n],
    };
    for (k, &(j, s)) in order.iter().enumerate() {
        sigma.push(s);
        if s > T::zero() {
            let src = r.col(j);
            let dst = ub.col_mut(k);
            for i in 0..n {
                dst[i] = src[i] / s;
            }
            vsorted.col_mut(k).copy_from_slice(vr.col(j));
        }
    }
    for (k, refl) in reflectors.iter().enumerate().rev() {
        if let Some(v) = refl {
            for j in 0..n {
                let col = &mut ub.col_mut(j)[k..];
                let d = T::of(2.0) * dot(v, col);
                if d != T::zero() {
                    for (c, &vi) in col.iter_mut().zip(v) {
                        *c -= d * vi;
                    }
                }
            }
        }
    }

    // largest-magnitude entry of each left vector made nonnegative
    for k in 0..n {
        let col = if transposed { vsorted.col(k) } else { ub.col(k) };
        let mut best = T::zero();
        for &c in col {
            if c.abs() > best.abs() {
                best = c;
            }
        }
        if best < T::zero() {
            for c in ub.col_mut(k) {
                *c = -*c;
            }
            for c in vsorted.col_mut(k) {
                *c = -*c;
            }
        }
    }

    let u_tall = DenseMatrix::from_col_major(m, n, &ub.data)?;
    let v_small = DenseMatrix::from_col_major(n, n, &vsorted.data)?;
    Ok(if transposed {
        FullSvd {
            u: v_small,
            sigma,
            v: u_tall,
        }
    } else {
        FullSvd {
            u: u_tall,
            sigma,
            v: v_small,
        }
    })
}

fn keep_columns<T: Scalar>(m: &DenseMatrix<T>, r: usize) -> DenseMatrix<T> {
    DenseMatrix::from_fn(m.rows(), r, |i, k| m[(i, k)])
}

/// Thin SVD keeping singular values `sigma_k > rank_tol * sigma_1`.
///
/// Sign convention: the largest-magnitude entry of every left singular
/// vector is nonnegative.
pub fn svd_thin<T: Scalar>(x: &DenseMatrix<T>, rank_tol: T) -> Result<SvdFactors<T>> {
    let full = full_svd(x)?;
    let s1 = full.sigma.first().copied().unwrap_or_else(T::zero);
    let r = if s1 == T::zero() {
        0
    } else {
        full.sigma.iter().take_while(|&&s| s > rank_tol * s1).count()
    };
    Ok(SvdFactors {
        u: keep_columns(&full.u, r),
        sigma: full.sigma[..r].to_vec(),
        v: keep_columns(&full.v, r),
    })
}
