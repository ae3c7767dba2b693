//! Low-rank recovery with the modified nuclear norm `||D(X)||_*`, where `D`
//! filters each column of `X` as an image plane.
//!
//! The crate provides the transform operators, nuclear-norm machinery,
//! RPCA and matrix-completion solvers (subgradient descent and ADMM), a
//! seeded generator for jointly low-rank and piecewise-smooth data, and the
//! experiment harness (phase diagrams, convergence traces, restoration
//! metrics).
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the usual `f64` instantiation.

pub mod error;
pub mod experiments;
pub mod norms;
pub mod operators;
mod scalar;
pub mod solvers;
pub mod synth;
pub mod tensor;

pub use error::{MnnError, Result};
pub use scalar::Scalar;

pub type Matrix = tensor::DenseMatrix<f64>;
pub type Matrix32 = tensor::DenseMatrix<f32>;
pub type Stack = tensor::ImageStack<f64>;
pub type Stack32 = tensor::ImageStack<f32>;
pub type Operator = operators::ConvOperator<f64>;
pub type Operator32 = operators::ConvOperator<f32>;
pub type Kernel = operators::Kernel2D<f64>;
