//! Translation-invariant transforms applied plane by plane to unfolded
//! image stacks.
//!
//! A [`ConvOperator`] filters every column of an `(h*w) x b` matrix, viewed
//! as an `h x w` plane, with a small kernel under periodic boundaries. The
//! induced linear map is left multiplication by a block-circulant
//! `(h*w) x (h*w)` matrix, which the 2D DFT diagonalizes; the transfer
//! coefficients are kept in [`ConvOperator::spectrum`].

mod fft2;
mod kernel;

use std::fmt;
use std::path::Path;

use num_complex::Complex;

pub use kernel::{builtin_kernel, normalize, Kernel2D, KernelName, Normalization};

use crate::error::{MnnError, Result};
use crate::scalar::Scalar;
use crate::tensor::{read_matrix_csv, DenseMatrix};
use fft2::Fft2;

/// Spectral summary used to decide whether the transform is injective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InjectivityReport {
    pub min_abs_coeff: f64,
    /// Number of (numerically) zero transfer coefficients, i.e. the
    /// dimension of the nullspace on one plane.
    pub nullspace_dim: usize,
}

/// An operator described independently of the plane size it acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSpec {
    pub kernel: Kernel2D<f64>,
    pub normalization: Normalization,
    pub label: String,
}

impl OperatorSpec {
    pub fn builtin(name: KernelName, mode: Normalization) -> Self {
        OperatorSpec {
            kernel: builtin_kernel(name),
            normalization: mode,
            label: name.as_str().to_string(),
        }
    }

    /// Reads a headerless CSV kernel; the label is the file stem.
    pub fn from_kernel_file(path: impl AsRef<Path>, mode: Normalization) -> Result<Self> {
        let path = path.as_ref();
        let m = read_matrix_csv(path)?;
        let kernel = Kernel2D::new(m.rows(), m.cols(), m.into_vec())?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        Ok(OperatorSpec {
            kernel,
            normalization: mode,
            label,
        })
    }

    pub fn build<T: Scalar>(&self, h: usize, w: usize) -> Result<ConvOperator<T>> {
        Ok(ConvOperator::new(&self.kernel.cast(), h, w, self.normalization)?.with_label(self.label.clone()))
    }
}

#[derive(Clone)]
pub struct ConvOperator<T: Scalar> {
    kernel: Kernel2D<T>,
    offsets: Vec<(isize, isize, T)>,
    h: usize,
    w: usize,
    scale: T,
    normalization: Normalization,
    spectrum: Vec<Complex<T>>,
    fft: Fft2<T>,
    label: String,
}

impl<T: Scalar> fmt::Debug for ConvOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvOperator")
            .field("label", &self.label)
            .field("kernel", &self.kernel)
            .field("h", &self.h)
            .field("w", &self.w)
            .field("scale", &self.scale)
            .finish()
    }
}

impl<T: Scalar> ConvOperator<T> {
    /// Normalizes `kernel` with `mode` and binds it to `h x w` planes.
    pub fn new(kernel: &Kernel2D<T>, h: usize, w: usize, mode: Normalization) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(MnnError::dims(format!("empty plane {h}x{w}")));
        }
        let (kernel, scale) = normalize(kernel, mode)?;
        let offsets = kernel.offsets();
        let spectrum = transfer_coefficients(&offsets, h, w);
        Ok(ConvOperator {
            kernel,
            offsets,
            h,
            w,
            scale,
            normalization: mode,
            spectrum,
            fft: Fft2::new(h, w),
            label: "custom".into(),
        })
    }

    pub fn builtin(name: KernelName, h: usize, w: usize, mode: Normalization) -> Result<Self> {
        let mut op = Self::new(&builtin_kernel(name), h, w, mode)?;
        op.label = name.as_str().to_string();
        Ok(op)
    }

    pub fn identity(h: usize, w: usize) -> Result<Self> {
        Self::builtin(KernelName::Identity, h, w, Normalization::None)
    }

    /// Loads a kernel from a headerless CSV file (`kh` lines of `kw` values).
    pub fn from_kernel_file(path: impl AsRef<Path>, h: usize, w: usize, mode: Normalization) -> Result<Self> {
        OperatorSpec::from_kernel_file(path, mode)?.build(h, w)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The kernel after normalization.
    pub fn kernel(&self) -> &Kernel2D<T> {
        &self.kernel
    }

    /// The divisor applied to the raw taps.
    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn plane_dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    /// Number of rows an input matrix must have.
    pub fn n1(&self) -> usize {
        self.h * self.w
    }

    fn check(&self, x: &DenseMatrix<T>) -> Result<()> {
        if x.rows() != self.n1() {
            Err(MnnError::dims(format!(
                "operator on {}x{} planes needs {} rows, got {}",
                self.h,
                self.w,
                self.n1(),
                x.rows()
            )))
        } else {
            Ok(())
        }
    }

    #[inline]
    fn shifted(&self, i: usize, j: usize, di: isize, dj: isize) -> usize {
        let ii = (i as isize + di).rem_euclid(self.h as isize) as usize;
        let jj = (j as isize + dj).rem_euclid(self.w as isize) as usize;
        ii + self.h * jj
    }

    /// Filters every column plane (direct spatial evaluation).
    pub fn apply(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check(x)?;
        Ok(self.filter(x, false))
    }

    /// Transpose map: correlation with the kernel becomes convolution.
    pub fn adjoint(&self, y: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check(y)?;
        Ok(self.filter(y, true))
    }

    fn filter(&self, x: &DenseMatrix<T>, transpose: bool) -> DenseMatrix<T> {
        let b = x.cols();
        let mut out = DenseMatrix::zeros(x.rows(), b);
        for j in 0..self.w {
            for i in 0..self.h {
                let p = i + self.h * j;
                let dst = out.row_mut(p);
                for &(di, dj, t) in &self.offsets {
                    let q = if transpose {
                        self.shifted(i, j, -di, -dj)
                    } else {
                        self.shifted(i, j, di, dj)
                    };
                    for (o, &v) in dst.iter_mut().zip(x.row(q)) {
                        *o += t * v;
                    }
                }
            }
        }
        out
    }

    /// `D^T D x` without forming the intermediate explicitly twice.
    pub fn gram(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check(x)?;
        Ok(self.filter(&self.filter(x, false), true))
    }

    /// Transfer coefficients over the `h x w` frequency grid, column-major:
    /// filtering a plane equals inverse-DFT of the pointwise product of
    /// these with the plane's DFT.
    pub fn spectrum(&self) -> &[Complex<T>] {
        &self.spectrum
    }

    fn per_plane(&self, x: &DenseMatrix<T>, mut f: impl FnMut(usize, &mut Complex<T>)) -> DenseMatrix<T> {
        let n1 = self.n1();
        let mut out = DenseMatrix::zeros(n1, x.cols());
        let mut plane = vec![Complex::new(T::zero(), T::zero()); n1];
        for k in 0..x.cols() {
            for (p, z) in plane.iter_mut().enumerate() {
                *z = Complex::new(x[(p, k)], T::zero());
            }
            self.fft.forward(&mut plane);
            for (p, z) in plane.iter_mut().enumerate() {
                f(p, z);
            }
            self.fft.inverse(&mut plane);
            for (p, z) in plane.iter().enumerate() {
                out[(p, k)] = z.re;
            }
        }
        out
    }

    /// Same map as [`apply`](Self::apply), evaluated through the DFT.
    pub fn apply_spectral(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check(x)?;
        Ok(self.per_plane(x, |p, z| *z *= self.spectrum[p]))
    }

    pub fn adjoint_spectral(&self, y: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check(y)?;
        Ok(self.per_plane(y, |p, z| *z *= self.spectrum[p].conj()))
    }

    /// Solves `(alpha D^T D + beta I) x = rhs` exactly in the frequency
    /// domain. Requires `beta > 0`, or `alpha > 0` with an injective `D`.
    pub fn solve_shifted_gram(&self, rhs: &DenseMatrix<T>, alpha: T, beta: T) -> Result<DenseMatrix<T>> {
        self.check(rhs)?;
        let tiny = T::of(1e-300).max(T::min_positive_value());
        if self
            .spectrum
            .iter()
            .any(|l| alpha * l.norm_sqr() + beta <= tiny)
        {
            return Err(MnnError::Numerics("shifted Gram system is singular".into()));
        }
        Ok(self.per_plane(rhs, |p, z| {
            *z /= alpha * self.spectrum[p].norm_sqr() + beta
        }))
    }

    pub fn injectivity_report(&self) -> InjectivityReport {
        let threshold = T::of(1e-12).max(T::of(64.0) * T::EPS);
        let mut min_abs = T::infinity();
        let mut null = 0;
        for l in &self.spectrum {
            let a = l.norm();
            min_abs = min_abs.min(a);
            if a < threshold {
                null += 1;
            }
        }
        InjectivityReport {
            min_abs_coeff: min_abs.as_f64(),
            nullspace_dim: null,
        }
    }

    /// Largest |transfer coefficient|, the spectral norm of the map.
    pub fn operator_norm(&self) -> T {
        self.spectrum
            .iter()
            .fold(T::zero(), |m, l| m.max(l.norm()))
    }
}

/// `lambda(u, v) = sum_taps t * exp(2 pi i (u di / h + v dj / w))`, with the
/// phase reduced modulo the period before evaluating the exponential.
fn transfer_coefficients<T: Scalar>(offsets: &[(isize, isize, T)], h: usize, w: usize) -> Vec<Complex<T>> {
    let mut out = vec![Complex::new(T::zero(), T::zero()); h * w];
    let two_pi = 2.0 * std::f64::consts::PI;
    for v in 0..w {
        for u in 0..h {
            let mut acc = Complex::new(0.0f64, 0.0);
            for &(di, dj, t) in offsets {
                let pu = (u as i128 * di as i128).rem_euclid(h as i128) as f64 / h as f64;
                let pv = (v as i128 * dj as i128).rem_euclid(w as i128) as f64 / w as f64;
                let theta = two_pi * (pu + pv);
                acc += Complex::new(theta.cos(), theta.sin()) * t.as_f64();
            }
            out[u + h * v] = Complex::new(T::of(acc.re), T::of(acc.im));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    fn rel(a: &DenseMatrix<f64>, b: &DenseMatrix<f64>) -> f64 {
        a.sub(b).frobenius_norm() / (1e-300 + b.frobenius_norm())
    }

    #[test]
    fn diff_row_circular_differences() {
        let op = ConvOperator::builtin(KernelName::DiffRow, 3, 1, Normalization::None).unwrap();
        let x = DenseMatrix::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(op.apply(&x).unwrap().as_slice(), &[1.0, 1.0, -2.0]);
    }

    #[test]
    fn identity_is_identity() {
        let op = ConvOperator::<f64>::identity(4, 3).unwrap();
        let x = random(12, 5, 1);
        assert_eq!(op.apply(&x).unwrap(), x);
        assert_eq!(op.adjoint(&x).unwrap(), x);
        assert!(op.spectrum().iter().all(|l| (l - Complex::new(1.0, 0.0)).norm() == 0.0));
        let rep = op.injectivity_report();
        assert_eq!(rep.min_abs_coeff, 1.0);
        assert_eq!(rep.nullspace_dim, 0);
    }

    #[test]
    fn constant_plane_in_nullspace() {
        let op = ConvOperator::builtin(KernelName::DiffRow, 5, 4, Normalization::L2).unwrap();
        let x = DenseMatrix::filled(20, 3, 2.5);
        assert!(op.apply(&x).unwrap().max_abs() == 0.0);
        assert!(op.injectivity_report().nullspace_dim >= 1);
    }

    #[test]
    fn dimension_checked() {
        let op = ConvOperator::<f64>::identity(4, 4).unwrap();
        assert!(matches!(
            op.apply(&DenseMatrix::zeros(15, 2)),
            Err(MnnError::Dimension(_))
        ));
        assert!(op.adjoint(&DenseMatrix::zeros(17, 2)).is_err());
    }

    #[test]
    fn spectral_matches_direct_16x16() {
        for name in KernelName::ALL {
            let op = ConvOperator::builtin(name, 16, 16, Normalization::L2).unwrap();
            let x = random(256, 3, 7);
            assert!(rel(&op.apply_spectral(&x).unwrap(), &op.apply(&x).unwrap()) < 1e-10);
            assert!(rel(&op.adjoint_spectral(&x).unwrap(), &op.adjoint(&x).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn diff_row_spectrum_closed_form() {
        let op = ConvOperator::<f64>::builtin(KernelName::DiffRow, 4, 3, Normalization::None).unwrap();
        for v in 0..3 {
            for u in 0..4 {
                let theta = 2.0 * std::f64::consts::PI * u as f64 / 4.0;
                let expect = Complex::new(theta.cos() - 1.0, theta.sin());
                assert!((op.spectrum()[u + 4 * v] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn laplacian_nullspace() {
        let op = ConvOperator::builtin(KernelName::Laplacian1, 8, 8, Normalization::L2).unwrap();
        assert!(op.spectrum()[0].norm() < 1e-14);
        assert_eq!(op.injectivity_report().nullspace_dim, 1);
        let x = random(64, 4, 3);
        assert!(rel(&op.adjoint(&x).unwrap(), &op.apply(&x).unwrap()) < 1e-12);
    }

    #[test]
    fn shifted_gram_solve_inverts() {
        let op = ConvOperator::builtin(KernelName::Sobel, 6, 5, Normalization::L2).unwrap();
        let x = random(30, 4, 9);
        let mut rhs = op.gram(&x).unwrap().scale(2.0);
        rhs.axpy(0.5, &x);
        let back = op.solve_shifted_gram(&rhs, 2.0, 0.5).unwrap();
        assert!(rel(&back, &x) < 1e-12);
        let lap = ConvOperator::builtin(KernelName::Laplacian1, 6, 5, Normalization::L2).unwrap();
        assert!(lap.solve_shifted_gram(&rhs, 1.0, 0.0).is_err());
    }

    #[test]
    fn f32_operator_agrees() {
        let op = ConvOperator::<f32>::builtin(KernelName::Laplacian2, 8, 8, Normalization::L2).unwrap();
        let x: DenseMatrix<f32> = random(64, 2, 4).cast();
        let a = op.apply(&x).unwrap();
        let b = op.apply_spectral(&x).unwrap();
        assert!(a.sub(&b).frobenius_norm() / a.frobenius_norm() < 1e-5);
    }
}
