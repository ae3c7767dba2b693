//! Two-dimensional DFT over column-major `h x w` planes.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Scalar;

#[derive(Clone)]
pub(crate) struct Fft2<T: Scalar> {
    h: usize,
    w: usize,
    fwd_h: Arc<dyn Fft<T>>,
    inv_h: Arc<dyn Fft<T>>,
    fwd_w: Arc<dyn Fft<T>>,
    inv_w: Arc<dyn Fft<T>>,
}

impl<T: Scalar> Fft2<T> {
    pub(crate) fn new(h: usize, w: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            h,
            w,
            fwd_h: planner.plan_fft_forward(h),
            inv_h: planner.plan_fft_inverse(h),
            fwd_w: planner.plan_fft_forward(w),
            inv_w: planner.plan_fft_inverse(w),
        }
    }

    fn run(&self, plane: &mut [Complex<T>], along_h: &dyn Fft<T>, along_w: &dyn Fft<T>) {
        debug_assert_eq!(plane.len(), self.h * self.w);
        // columns are contiguous runs of length h
        along_h.process(plane);
        if self.w > 1 {
            let mut t = vec![Complex::new(T::zero(), T::zero()); plane.len()];
            for j in 0..self.w {
                for i in 0..self.h {
                    t[j + self.w * i] = plane[i + self.h * j];
                }
            }
            along_w.process(&mut t);
            for j in 0..self.w {
                for i in 0..self.h {
                    plane[i + self.h * j] = t[j + self.w * i];
                }
            }
        }
    }

    /// Unnormalized forward transform, in place.
    pub(crate) fn forward(&self, plane: &mut [Complex<T>]) {
        self.run(plane, self.fwd_h.as_ref(), self.fwd_w.as_ref());
    }

    /// Inverse transform including the `1/(h w)` factor, in place.
    pub(crate) fn inverse(&self, plane: &mut [Complex<T>]) {
        self.run(plane, self.inv_h.as_ref(), self.inv_w.as_ref());
        let s = T::one() / T::of((self.h * self.w) as f64);
        for z in plane.iter_mut() {
            *z *= s;
        }
    }
}
