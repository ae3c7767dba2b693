use std::fmt;
use std::str::FromStr;

use crate::error::{MnnError, Result};
use crate::scalar::Scalar;

/// A small 2D filter. Applying it at pixel `(i, j)` computes
/// `sum_{a,b} taps[a][b] * x(i + a - anchor.0, j + b - anchor.1)` with
/// periodic wrap-around.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2D<T> {
    kh: usize,
    kw: usize,
    taps: Vec<T>,
    anchor: (usize, usize),
}

impl<T: Scalar> Kernel2D<T> {
    /// Row-major `kh x kw` taps anchored at the central tap (top-left of
    /// the centre for even sizes).
    pub fn new(kh: usize, kw: usize, taps: Vec<T>) -> Result<Self> {
        Self::with_anchor(kh, kw, taps, ((kh.max(1) - 1) / 2, (kw.max(1) - 1) / 2))
    }

    pub fn with_anchor(kh: usize, kw: usize, taps: Vec<T>, anchor: (usize, usize)) -> Result<Self> {
        if kh == 0 || kw == 0 || taps.len() != kh * kw {
            return Err(MnnError::config(format!(
                "kernel {kh}x{kw} needs {} taps, got {}",
                kh * kw,
                taps.len()
            )));
        }
        if anchor.0 >= kh || anchor.1 >= kw {
            return Err(MnnError::config(format!(
                "anchor {anchor:?} outside {kh}x{kw} kernel"
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(MnnError::Numerics("non-finite kernel tap".into()));
        }
        if taps.iter().all(|&t| t == T::zero()) {
            return Err(MnnError::DegenerateKernel);
        }
        Ok(Kernel2D {
            kh,
            kw,
            taps,
            anchor,
        })
    }

    pub fn height(&self) -> usize {
        self.kh
    }

    pub fn width(&self) -> usize {
        self.kw
    }

    pub fn anchor(&self) -> (usize, usize) {
        self.anchor
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn tap(&self, a: usize, b: usize) -> T {
        self.taps[a * self.kw + b]
    }

    pub fn tap_sum(&self) -> T {
        self.taps.iter().copied().sum()
    }

    /// Nonzero taps as `(row offset, col offset, value)` relative to the anchor.
    pub fn offsets(&self) -> Vec<(isize, isize, T)> {
        let mut out = Vec::new();
        for a in 0..self.kh {
            for b in 0..self.kw {
                let t = self.tap(a, b);
                if t != T::zero() {
                    out.push((
                        a as isize - self.anchor.0 as isize,
                        b as isize - self.anchor.1 as isize,
                        t,
                    ));
                }
            }
        }
        out
    }

    pub fn scaled(&self, factor: T) -> Self {
        Kernel2D {
            kh: self.kh,
            kw: self.kw,
            taps: self.taps.iter().map(|&t| t * factor).collect(),
            anchor: self.anchor,
        }
    }

    pub fn cast<U: Scalar>(&self) -> Kernel2D<U> {
        Kernel2D {
            kh: self.kh,
            kw: self.kw,
            taps: self.taps.iter().map(|t| U::of(t.as_f64())).collect(),
            anchor: self.anchor,
        }
    }
}

/// The built-in filters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelName {
    Identity,
    /// `x(i+1, j) - x(i, j)`: first difference down the rows.
    DiffRow,
    /// `x(i, j+1) - x(i, j)`: first difference across the columns.
    DiffCol,
    CentralDiff,
    Sobel,
    Laplacian1,
    Laplacian2,
}

impl KernelName {
    pub const ALL: [KernelName; 7] = [
        KernelName::Identity,
        KernelName::DiffRow,
        KernelName::DiffCol,
        KernelName::CentralDiff,
        KernelName::Sobel,
        KernelName::Laplacian1,
        KernelName::Laplacian2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelName::Identity => "identity",
            KernelName::DiffRow => "diff",
            KernelName::DiffCol => "diff-col",
            KernelName::CentralDiff => "central-diff",
            KernelName::Sobel => "sobel",
            KernelName::Laplacian1 => "laplacian1",
            KernelName::Laplacian2 => "laplacian2",
        }
    }
}

impl fmt::Display for KernelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelName {
    type Err = MnnError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Ok(match norm.as_str() {
            "identity" | "nn" => KernelName::Identity,
            "diff" | "diff-row" => KernelName::DiffRow,
            "diff-col" => KernelName::DiffCol,
            "central-diff" => KernelName::CentralDiff,
            "sobel" => KernelName::Sobel,
            "laplacian1" | "l1" => KernelName::Laplacian1,
            "laplacian2" | "l2" => KernelName::Laplacian2,
            _ => return Err(MnnError::config(format!("unknown kernel {s:?}"))),
        })
    }
}

/// Unnormalized taps of a built-in filter.
pub fn builtin_kernel<T: Scalar>(name: KernelName) -> Kernel2D<T> {
    let k = |kh: usize, kw: usize, taps: &[f64]| {
        Kernel2D::new(kh, kw, taps.iter().map(|&t| T::of(t)).collect())
            .expect("built-in kernels are valid")
    };
    match name {
        KernelName::Identity => k(1, 1, &[1.0]),
        KernelName::DiffRow => k(2, 1, &[-1.0, 1.0]),
        KernelName::DiffCol => k(1, 2, &[-1.0, 1.0]),
        KernelName::CentralDiff => k(
            3,
            3,
            &[0.0, -0.5, 0.0, -0.5, 0.0, 0.5, 0.0, 0.5, 0.0],
        ),
        KernelName::Sobel => k(2, 2, &[-2.0, -1.0, -1.0, 0.0]),
        KernelName::Laplacian1 => k(3, 3, &[0.0, -1.0, 0.0, -1.0, 4.0, -1.0, 0.0, -1.0, 0.0]),
        KernelName::Laplacian2 => k(
            3,
            3,
            &[-1.0, -1.0, -1.0, -1.0, 8.0, -1.0, -1.0, -1.0, -1.0],
        ),
    }
}

/// How taps are rescaled before use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Unit tap energy.
    L2,
    /// Unit absolute tap sum; keeps every column of the induced matrix in
    /// the unit l1 ball.
    #[default]
    L1,
    None,
}

impl FromStr for Normalization {
    type Err = MnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l2" => Ok(Normalization::L2),
            "l1" => Ok(Normalization::L1),
            "none" => Ok(Normalization::None),
            _ => Err(MnnError::config(format!("unknown normalization {s:?}"))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::L2 => "l2",
            Normalization::L1 => "l1",
            Normalization::None => "none",
        })
    }
}

/// Rescales the taps; returns the normalized kernel and the divisor used.
pub fn normalize<T: Scalar>(kernel: &Kernel2D<T>, mode: Normalization) -> Result<(Kernel2D<T>, T)> {
    if kernel.taps.iter().all(|&t| t == T::zero()) {
        return Err(MnnError::DegenerateKernel);
    }
    let scale = match mode {
        Normalization::L2 => kernel.taps.iter().map(|&t| t * t).sum::<T>().sqrt(),
        Normalization::L1 => kernel.taps.iter().map(|t| t.abs()).sum(),
        Normalization::None => T::one(),
    };
    Ok((kernel.scaled(T::one() / scale), scale))
}
