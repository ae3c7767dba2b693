//! Fixed-step subgradient descent on `J1` and `J2`, returning the best
//! iterate seen (the objective is not monotone along the path).

use std::time::Instant;

use super::{
    check_mask, check_problem, rel_change, truth_error, McSolution, RpcaSolution, SolveReport,
    SolverConfig,
};
use crate::error::{MnnError, Result};
use crate::norms::svd_thin;
use crate::operators::ConvOperator;
use crate::scalar::Scalar;
use crate::tensor::{apply_mask, DenseMatrix, SampleMask};

/// `||D(x)||_*` and the subgradient `D^T(U V^T)` from one SVD.
fn mnn_and_subgradient<T: Scalar>(
    x: &DenseMatrix<T>,
    op: &ConvOperator<T>,
    rank_tol: T,
) -> Result<(T, DenseMatrix<T>)> {
    let dx = op.apply(x)?;
    let f = svd_thin(&dx, rank_tol)?;
    // sigma below the rank cutoff contributes < rank_tol * sigma_1 each
    let nuclear = f.sigma.iter().copied().sum();
    let g = op.adjoint(&f.polar_factor(dx.rows(), dx.cols()))?;
    Ok((nuclear, g))
}

fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Shared descent loop. `data_term(x)` returns the data-fit value and its
/// (sub)gradient with respect to `x`.
fn descend<T: Scalar>(
    start: DenseMatrix<T>,
    op: &ConvOperator<T>,
    cfg: &SolverConfig,
    truth: Option<&DenseMatrix<T>>,
    scale: f64,
    data_term: impl Fn(&DenseMatrix<T>) -> (T, DenseMatrix<T>),
) -> Result<(DenseMatrix<T>, SolveReport)> {
    let timer = Instant::now();
    let step = T::of(cfg.step_size);
    let rank_tol = T::of(cfg.rank_tol);
    let blowup = 1e12 * (1.0 + scale);

    let mut report = SolveReport::default();
    let mut x = start;
    let (mut nuclear, mut g_nn) = mnn_and_subgradient(&x, op, rank_tol)?;
    let (mut fit, mut g_fit) = data_term(&x);
    let mut best_obj = (nuclear + fit).as_f64();
    let mut best = x.clone();

    for iter in 1..=cfg.max_iters {
        let mut next = x.clone();
        next.axpy(-step, &g_nn);
        next.axpy(-step, &g_fit);
        let norm = next.frobenius_norm().as_f64();
        if !next.is_finite() || !norm.is_finite() || norm > blowup {
            return Err(MnnError::Divergence {
                iteration: iter,
                step_size: cfg.step_size,
            });
        }
        let change = rel_change(&next, &x);
        x = next;
        (nuclear, g_nn) = mnn_and_subgradient(&x, op, rank_tol)?;
        (fit, g_fit) = data_term(&x);
        let obj = (nuclear + fit).as_f64();
        if !obj.is_finite() {
            return Err(MnnError::Divergence {
                iteration: iter,
                step_size: cfg.step_size,
            });
        }
        if obj < best_obj {
            best_obj = obj;
            best = x.clone();
        }
        report.objective_history.push(obj);
        report.rel_change_history.push(change);
        truth_error(&x, truth, &mut report.truth_error_history);
        report.iterations_run = iter;
        if change < cfg.rel_tol {
            report.converged = true;
            break;
        }
    }
    report.final_objective = best_obj;
    report.wall_time = timer.elapsed().as_secs_f64();
    Ok((best, report))
}

pub(super) fn rpca<T: Scalar>(
    m: &DenseMatrix<T>,
    op: &ConvOperator<T>,
    cfg: &SolverConfig,
    truth: Option<&DenseMatrix<T>>,
) -> Result<RpcaSolution<T>> {
    check_problem(m, op, cfg, truth)?;
    let lambda = T::of(cfg.lambda_for(m.rows(), m.cols())?);
    let scale = m.frobenius_norm().as_f64();
    let (x_hat, report) = descend(m.clone(), op, cfg, truth, scale, |x| {
        let r = m.sub(x);
        let fit = lambda * r.l1_norm();
        // d/dx lambda |m - x| = -lambda sign(m - x)
        let g = r.map(|v| -lambda * sign(v));
        (fit, g)
    })?;
    let s_hat = m.sub(&x_hat);
    Ok(RpcaSolution {
        x_hat,
        s_hat,
        report,
    })
}

/// Subgradient descent on `J1`, starting from `X = M`.
pub fn rpca_subgradient<T: Scalar>(
    m: &DenseMatrix<T>,
    op: &ConvOperator<T>,
    cfg: &SolverConfig,
) -> Result<RpcaSolution<T>> {
    rpca(m, op, cfg, None)
}

pub(super) fn mc<T: Scalar>(
    m: &DenseMatrix<T>,
    mask: &SampleMask,
    op: &ConvOperator<T>,
    cfg: &SolverConfig,
    truth: Option<&DenseMatrix<T>>,
) -> Result<McSolution<T>> {
    check_problem(m, op, cfg, truth)?;
    check_mask(m, mask)?;
    let mu = T::of(cfg.mu_for(m.rows(), m.cols(), mask.density())?);
    let start = apply_mask(m, mask)?;
    let scale = start.frobenius_norm().as_f64();
    let two_mu = mu + mu;
    let (x_hat, report) = descend(start, op, cfg, truth, scale, |x| {
        let r = apply_mask(&m.sub(x), mask).expect("shape checked");
        let fit = mu * r.frobenius_norm_sq();
        (fit, r.scale(-two_mu))
    })?;
    Ok(McSolution { x_hat, report })
}

/// Subgradient descent on `J2`, starting from `X = P_Omega(M)`.
pub fn mc_subgradient<T: Scalar>(
    m: &DenseMatrix<T>,
    mask: &SampleMask,
    op: &ConvOperator<T>,
    cfg: &SolverConfig,
) -> Result<McSolution<T>> {
    mc(m, mask, op, cfg, None)
}
