//! Solvers for the modified-nuclear-norm RPCA and matrix-completion models.
//!
//! RPCA: `min ||D(X)||_* + lambda ||S||_1  s.t.  M = X + S`, or in penalized
//! form `J1(X) = ||D(X)||_* + lambda ||M - X||_1`.
//!
//! MC: `J2(X) = ||D(X)||_* + mu ||P_Omega(M - X)||_F^2`.
//!
//! Each model has a fixed-step subgradient method on `J1`/`J2` and an ADMM
//! variant splitting `Z = D(X)`.

mod admm;
mod cg;
mod subgradient;

use std::fmt;
use std::str::FromStr;

pub use admm::{mc_admm, rpca_admm};
pub use cg::pcg;
pub use subgradient::{mc_subgradient, rpca_subgradient};

use crate::error::{MnnError, Result};
use crate::norms::mnn;
use crate::operators::ConvOperator;
use crate::scalar::Scalar;
use crate::tensor::{apply_mask, DenseMatrix, SampleMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Algorithm {
    Subgradient,
    #[default]
    Admm,
}

impl FromStr for Algorithm {
    type Err = MnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "subgradient" | "sgd" => Ok(Algorithm::Subgradient),
            "admm" => Ok(Algorithm::Admm),
            _ => Err(MnnError::config(format!("unknown algorithm {s:?}"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Subgradient => "subgradient",
            Algorithm::Admm => "admm",
        })
    }
}

/// Solver parameters. `lambda` and `mu` are filled from the problem size
/// when left as `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Weight of the sparse term in RPCA; default `1/sqrt(max(n1, n2))`.
    pub lambda: Option<f64>,
    /// Weight of the data term in `J2`; default
    /// [`default_fidelity_weight`] at the observed sampling ratio.
    pub mu: Option<f64>,
    /// Noise level entering the default `mu`.
    pub sigma: f64,
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once the relative iterate change (and for ADMM the relative
    /// primal residual) drops below this.
    pub rel_tol: f64,
    pub algorithm: Algorithm,
    pub admm_rho: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Relative singular value cutoff for numerical rank.
    pub rank_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: None,
            mu: None,
            sigma: 1e-4,
            step_size: 1e-4,
            max_iters: 5000,
            rel_tol: 1e-7,
            algorithm: Algorithm::Admm,
            admm_rho: 1.0,
            cg_tol: 1e-8,
            cg_max_iters: 500,
            rank_tol: crate::norms::DEFAULT_RANK_TOL,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(MnnError::config(format!("{name} must be positive, got {v}")))
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            positive("lambda", l)?;
        }
        if let Some(m) = self.mu {
            positive("mu", m)?;
        }
        positive("sigma", self.sigma)?;
        positive("step_size", self.step_size)?;
        positive("rel_tol", self.rel_tol)?;
        positive("admm_rho", self.admm_rho)?;
        positive("cg_tol", self.cg_tol)?;
        positive("rank_tol", self.rank_tol)?;
        if self.max_iters == 0 {
            return Err(MnnError::config("max_iters must be at least 1"));
        }
        if self.cg_max_iters == 0 {
            return Err(MnnError::config("cg_max_iters must be at least 1"));
        }
        Ok(())
    }

    pub fn lambda_for(&self, n1: usize, n2: usize) -> Result<f64> {
        match self.lambda {
            Some(l) => Ok(l),
            None => default_lambda(n1, n2),
        }
    }

    pub fn mu_for(&self, n1: usize, n2: usize, p: f64) -> Result<f64> {
        match self.mu {
            Some(m) => Ok(m),
            None => default_fidelity_weight(n1, n2, p, self.sigma),
        }
    }
}

/// `1 / sqrt(max(n1, n2))`.
pub fn default_lambda(n1: usize, n2: usize) -> Result<f64> {
    if n1 == 0 || n2 == 0 {
        return Err(MnnError::config("matrix dimensions must be positive"));
    }
    Ok(1.0 / (n1.max(n2) as f64).sqrt())
}

/// Noise-calibrated regularization level `(sqrt(n1) + sqrt(n2)) sqrt(p) sigma`.
pub fn default_mu(n1: usize, n2: usize, p: f64, sigma: f64) -> Result<f64> {
    if n1 == 0 || n2 == 0 {
        return Err(MnnError::config("matrix dimensions must be positive"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(MnnError::config(format!("sampling ratio {p} outside (0, 1]")));
    }
    positive("sigma", sigma)?;
    Ok(((n1 as f64).sqrt() + (n2 as f64).sqrt()) * p.sqrt() * sigma)
}

/// Default data weight of `J2`: `1 / (2 default_mu)`.
///
/// `default_mu` is the level at which the nuclear term is weighted against
/// `1/2 ||P_Omega(M - X)||^2`; dividing that objective by it puts the
/// weight on the data term, which is how `J2` is written.
pub fn default_fidelity_weight(n1: usize, n2: usize, p: f64, sigma: f64) -> Result<f64> {
    Ok(0.5 / default_mu(n1, n2, p, sigma)?)
}

/// Per-iteration record of a solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveReport {
    /// Objective after each iteration. Subgradient methods record `J1`/`J2`
    /// at the new iterate; ADMM records the split objective
    /// `||Z||_* + (data term)` of its current variables.
    pub objective_history: Vec<f64>,
    /// `||X_k - X_{k-1}||_F / ||X_{k-1}||_F`.
    pub rel_change_history: Vec<f64>,
    /// `||X_k - X_0||_F / ||X_0||_F` when a ground truth was supplied.
    pub truth_error_history: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub wall_time: f64,
    /// `J1`/`J2` at the returned iterate.
    pub final_objective: f64,
}

impl SolveReport {
    /// Running minimum of the objective history.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.objective_history
            .iter()
            .map(|&v| {
                best = best.min(v);
                best
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct RpcaSolution<T> {
    pub x_hat: DenseMatrix<T>,
    pub s_hat: DenseMatrix<T>,
    pub report: SolveReport,
}

#[derive(Clone, Debug)]
pub struct McSolution<T> {
    pub x_hat: DenseMatrix<T>,
    pub report: SolveReport,
}

/// `J1(x) = ||D(x)||_* + lambda ||m - x||_1`.
pub fn objective_j1<T: Scalar>(x: &DenseMatrix<T>, m: &DenseMatrix<T>, op: &ConvOperator<T>, lambda: T) -> Result<T> {
    x.check_same_shape(m, "objective_j1")?;
    Ok(mnn(x, op)? + lambda * m.sub(x).l1_norm())
}

/// `J2(x) = ||D(x)||_* + mu ||P_Omega(m - x)||_F^2`.
pub fn objective_j2<T: Scalar>(
    x: &DenseMatrix<T>,
    m: &DenseMatrix<T>,
    mask: &SampleMask,
    op: &ConvOperator<T>,
    mu: T,
) -> Result<T> {
    x.check_same_shape(m, "objective_j2")?;
    let r = apply_mask(&m.sub(x), mask)?;
    Ok(mnn(x, op)? + mu * r.frobenius_norm_sq())
}

/// Runs the configured RPCA algorithm.
pub fn solve_rpca<T: Scalar>(m: &DenseMatrix<T>, op: &ConvOperator<T>, cfg: &SolverConfig) -> Result<RpcaSolution<T>> {
    solve_rpca_traced(m, op, cfg, None)
}

/// [`solve_rpca`] that also tracks the error against a known ground truth.
pub fn solve_rpca_traced<T: Scalar>(
    m: &DenseMatrix<T>,
    op: &ConvOperator<T>,
    cfg: &SolverConfig,
    truth: Option<&DenseMatrix<T>>,
) -> Result<RpcaSolution<T>> {
    match cfg.algorithm {
        Algorithm::Subgradient => subgradient::rpca(m, op, cfg, truth),
        Algorithm::Admm => admm::rpca(m, op, cfg, truth),
    }
}

pub fn solve_mc<T: Scalar>(
    m: &DenseMatrix<T>,
    mask: &SampleMask,
    op: &ConvOperator<T>,
    cfg: &SolverConfig,
) -> Result<McSolution<T>> {
    solve_mc_traced(m, mask, op, cfg, None)
}

pub fn solve_mc_traced<T: Scalar>(
    m: &DenseMatrix<T>,
    mask: &SampleMask,
    op: &ConvOperator<T>,
    cfg: &SolverConfig,
    truth: Option<&DenseMatrix<T>>,
) -> Result<McSolution<T>> {
    match cfg.algorithm {
        Algorithm::Subgradient => subgradient::mc(m, mask, op, cfg, truth),
        Algorithm::Admm => admm::mc(m, mask, op, cfg, truth),
    }
}

/// Validation shared by all solvers.
pub(crate) fn check_problem<T: Scalar>(
    m: &DenseMatrix<T>,
    op: &ConvOperator<T>,
    cfg: &SolverConfig,
    truth: Option<&DenseMatrix<T>>,
) -> Result<()> {
    cfg.validate()?;
    if !m.is_finite() {
        return Err(MnnError::Numerics("observation has non-finite entries".into()));
    }
    if m.rows() != op.n1() {
        return Err(MnnError::dims(format!(
            "operator expects {} rows, observation has {}",
            op.n1(),
            m.rows()
        )));
    }
    if let Some(t) = truth {
        t.check_same_shape(m, "ground truth")?;
    }
    Ok(())
}

pub(crate) fn check_mask<T: Scalar>(m: &DenseMatrix<T>, mask: &SampleMask) -> Result<()> {
    mask.check_shape(m)?;
    if mask.count() == 0 {
        return Err(MnnError::config("sampling mask is empty"));
    }
    Ok(())
}

/// Relative change with a floor on the denominator.
pub(crate) fn rel_change<T: Scalar>(new: &DenseMatrix<T>, old: &DenseMatrix<T>) -> f64 {
    let denom = old.frobenius_norm().as_f64().max(f64::MIN_POSITIVE);
    new.sub(old).frobenius_norm().as_f64() / denom
}

pub(crate) fn truth_error<T: Scalar>(x: &DenseMatrix<T>, truth: Option<&DenseMatrix<T>>, out: &mut Vec<f64>) {
    if let Some(t) = truth {
        let denom = t.frobenius_norm().as_f64().max(f64::MIN_POSITIVE);
        out.push(x.sub(t).frobenius_norm().as_f64() / denom);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{KernelName, Normalization};

    #[test]
    fn default_parameters() {
        assert!((default_lambda(2500, 100).unwrap() - 0.02).abs() < 1e-15);
        assert!((default_lambda(30, 256).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert!((default_mu(100, 100, 1.0, 1e-4).unwrap() - 2e-3).abs() < 1e-15);
        assert!(matches!(default_mu(100, 100, 0.0, 1e-4), Err(MnnError::Config(_))));
        assert!(default_mu(100, 100, 0.5, 0.0).is_err());
        assert!((default_fidelity_weight(100, 100, 1.0, 1e-4).unwrap() - 250.0).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            max_iters: 0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            step_size: -1.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!("admm".parse::<Algorithm>().unwrap(), Algorithm::Admm);
        assert!("newton".parse::<Algorithm>().is_err());
    }

    #[test]
    fn objective_edge_cases() {
        let op = ConvOperator::builtin(KernelName::Laplacian1, 4, 4, Normalization::L2).unwrap();
        let m = DenseMatrix::filled(16, 3, 2.0_f64);
        assert!(objective_j1(&m, &m, &op, 0.1).unwrap().abs() < 1e-12);

        let x = DenseMatrix::from_fn(16, 3, |i, j| (i * j) as f64 * 0.1);
        let j0 = objective_j1(&x, &m, &op, 0.0).unwrap();
        assert!((j0 - mnn(&x, &op).unwrap()).abs() < 1e-12);

        let empty = SampleMask::empty(16, 3);
        let j2 = objective_j2(&x, &m, &empty, &op, 5.0).unwrap();
        assert!((j2 - mnn(&x, &op).unwrap()).abs() < 1e-12);
        let full = SampleMask::full(16, 3);
        let agree = objective_j2(&m, &m, &full, &op, 5.0).unwrap();
        assert!(agree.abs() < 1e-12);

        assert!(objective_j1(&DenseMatrix::zeros(16, 2), &m, &op, 0.1).is_err());
    }
}
