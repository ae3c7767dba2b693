//! Matrix and image-stack containers, mode-3 unfolding, sampling masks and
//! file I/O.
//!
//! Image planes are vectorized column-major: pixel `(i, j)` of an `h x w`
//! plane sits at index `i + h * j`. Everything that reshapes a plane into a
//! column (unfolding, the convolution operators, the tensor file format)
//! follows this order.

mod io;
mod matrix;

pub use io::{read_matrix, read_matrix_csv, read_tensor, write_matrix, write_matrix_csv, write_tensor};
pub use matrix::DenseMatrix;

use crate::error::{MnnError, Result};
use crate::scalar::Scalar;

/// An `h x w x b` stack of image planes, stored with the row index fastest,
/// then the column index, then the band.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageStack<T> {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImageStack<T> {
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(MnnError::dims(format!(
                "empty stack {height}x{width}x{bands}"
            )));
        }
        if data.len() != height * width * bands {
            return Err(MnnError::dims(format!(
                "{height}x{width}x{bands} stack needs {} values, got {}",
                height * width * bands,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(MnnError::Numerics("non-finite stack entry".into()));
        }
        Ok(ImageStack {
            height,
            width,
            bands,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, bands: usize) -> Self {
        ImageStack {
            height,
            width,
            bands,
            data: vec![T::zero(); height * width * bands],
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.bands)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[i + self.height * (j + self.width * k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: T) {
        self.data[i + self.height * (j + self.width * k)] = v;
    }

    /// Band `k` as a column-major plane.
    pub fn band(&self, k: usize) -> &[T] {
        let n = self.height * self.width;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

/// Unfolds a stack along its third mode: column `k` of the `(h*w) x b`
/// result is band `k` vectorized column-major.
pub fn unfold3<T: Scalar>(stack: &ImageStack<T>) -> DenseMatrix<T> {
    let n1 = stack.height * stack.width;
    let n2 = stack.bands;
    let mut data = vec![T::zero(); n1 * n2];
    for k in 0..n2 {
        for (p, &v) in stack.band(k).iter().enumerate() {
            data[p * n2 + k] = v;
        }
    }
    DenseMatrix::from_vec_unchecked(n1, n2, data)
}

/// Inverse of [`unfold3`].
pub fn fold3<T: Scalar>(m: &DenseMatrix<T>, height: usize, width: usize) -> Result<ImageStack<T>> {
    if height == 0 || width == 0 || m.rows() != height * width {
        return Err(MnnError::dims(format!(
            "cannot fold {} rows into a {height}x{width} plane",
            m.rows()
        )));
    }
    let bands = m.cols();
    let n1 = m.rows();
    let mut data = vec![T::zero(); n1 * bands];
    for p in 0..n1 {
        for (k, &v) in m.row(p).iter().enumerate() {
            data[k * n1 + p] = v;
        }
    }
    Ok(ImageStack {
        height,
        width,
        bands,
        data,
    })
}

/// Support set of observed (or corrupted) entries, row-major like
/// [`DenseMatrix`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleMask {
    rows: usize,
    cols: usize,
    kept: Vec<bool>,
    count: usize,
}

impl SampleMask {
    pub fn new(rows: usize, cols: usize, kept: Vec<bool>) -> Result<Self> {
        if kept.len() != rows * cols {
            return Err(MnnError::dims(format!(
                "{rows}x{cols} mask needs {} flags, got {}",
                rows * cols,
                kept.len()
            )));
        }
        let count = kept.iter().filter(|&&k| k).count();
        Ok(SampleMask {
            rows,
            cols,
            kept,
            count,
        })
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        SampleMask {
            rows,
            cols,
            kept: vec![true; rows * cols],
            count: rows * cols,
        }
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        SampleMask {
            rows,
            cols,
            kept: vec![false; rows * cols],
            count: 0,
        }
    }

    /// Mask of the nonzero entries of a 0/1 indicator matrix.
    pub fn from_indicator<T: Scalar>(m: &DenseMatrix<T>) -> Self {
        let kept: Vec<bool> = m.as_slice().iter().map(|&v| v != T::zero()).collect();
        let count = kept.iter().filter(|&&k| k).count();
        SampleMask {
            rows: m.rows(),
            cols: m.cols(),
            kept,
            count,
        }
    }

    pub fn to_indicator<T: Scalar>(&self) -> DenseMatrix<T> {
        DenseMatrix::from_vec_unchecked(
            self.rows,
            self.cols,
            self.kept
                .iter()
                .map(|&k| if k { T::one() } else { T::zero() })
                .collect(),
        )
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of kept entries.
    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    /// Fraction of kept entries.
    pub fn density(&self) -> f64 {
        self.count as f64 / (self.rows * self.cols) as f64
    }

    #[inline]
    pub fn is_kept(&self, i: usize, j: usize) -> bool {
        self.kept[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.kept
    }

    pub(crate) fn check_shape<T: Scalar>(&self, m: &DenseMatrix<T>) -> Result<()> {
        if m.rows() == self.rows && m.cols() == self.cols {
            Ok(())
        } else {
            Err(MnnError::dims(format!(
                "mask {}x{} vs matrix {}x{}",
                self.rows,
                self.cols,
                m.rows(),
                m.cols()
            )))
        }
    }
}

/// Keeps the entries on the mask's support and zeroes the rest.
pub fn apply_mask<T: Scalar>(m: &DenseMatrix<T>, mask: &SampleMask) -> Result<DenseMatrix<T>> {
    mask.check_shape(m)?;
    Ok(DenseMatrix::from_vec_unchecked(
        m.rows(),
        m.cols(),
        m.as_slice()
            .iter()
            .zip(&mask.kept)
            .map(|(&v, &k)| if k { v } else { T::zero() })
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unfold_degenerate_plane() {
        let s = ImageStack::new(1, 1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let m = unfold3(&s);
        assert_eq!(m.shape(), (1, 3));
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn unfold_uses_column_major_scan() {
        // plane [[a, c], [b, d]] stored as a, b, c, d
        let s = ImageStack::new(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.get(1, 0, 0), 2.0);
        assert_eq!(s.get(0, 1, 0), 3.0);
        let m = unfold3(&s);
        assert_eq!(m.shape(), (4, 1));
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn fold_shapes() {
        let m = DenseMatrix::new(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = fold3(&m, 2, 2).unwrap();
        assert_eq!(s.dims(), (2, 2, 1));
        let bad = DenseMatrix::<f64>::zeros(5, 1);
        assert!(matches!(fold3(&bad, 2, 2), Err(MnnError::Dimension(_))));
    }

    #[test]
    fn mask_examples() {
        let m = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(apply_mask(&m, &SampleMask::full(2, 2)).unwrap(), m);
        assert_eq!(
            apply_mask(&m, &SampleMask::empty(2, 2)).unwrap(),
            DenseMatrix::zeros(2, 2)
        );
        let diag = SampleMask::new(2, 2, vec![true, false, false, true]).unwrap();
        assert_eq!(diag.count(), 2);
        assert_eq!(apply_mask(&m, &diag).unwrap().as_slice(), &[1.0, 0.0, 0.0, 4.0]);
        assert!(apply_mask(&m, &SampleMask::full(3, 2)).is_err());
    }

    fn stack_strategy() -> impl Strategy<Value = ImageStack<f64>> {
        (1usize..6, 1usize..6, 1usize..4).prop_flat_map(|(h, w, b)| {
            proptest::collection::vec(-1e3f64..1e3, h * w * b)
                .prop_map(move |data| ImageStack::new(h, w, b, data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn fold_inverts_unfold(s in stack_strategy()) {
            let m = unfold3(&s);
            prop_assert_eq!(fold3(&m, s.height(), s.width()).unwrap(), s);
        }

        #[test]
        fn mask_is_idempotent_and_linear(
            vals in proptest::collection::vec(-10f64..10.0, 12),
            other in proptest::collection::vec(-10f64..10.0, 12),
            kept in proptest::collection::vec(any::<bool>(), 12),
            a in -3f64..3.0,
            b in -3f64..3.0,
        ) {
            let x = DenseMatrix::new(3, 4, vals).unwrap();
            let y = DenseMatrix::new(3, 4, other).unwrap();
            let mask = SampleMask::new(3, 4, kept).unwrap();
            let once = apply_mask(&x, &mask).unwrap();
            prop_assert_eq!(apply_mask(&once, &mask).unwrap(), once.clone());

            let mut lhs_in = x.scale(a);
            lhs_in.axpy(b, &y);
            let lhs = apply_mask(&lhs_in, &mask).unwrap();
            let mut rhs = once.scale(a);
            rhs.axpy(b, &apply_mask(&y, &mask).unwrap());
            let scale = 1.0 + lhs.frobenius_norm();
            prop_assert!(lhs.sub(&rhs).frobenius_norm() <= 1e-12 * scale);
        }
    }
}
