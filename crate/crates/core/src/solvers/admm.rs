//! ADMM with the splitting `Z = D(X)`.
//!
//! RPCA keeps the equality `M = X + S` as a second constraint; its
//! `X`-subproblem `(D^T D + I) X = rhs` is diagonal in the 2D DFT basis. The
//! MC subproblem `(rho D^T D + 2 mu P_Omega) X = rhs` mixes the circulant
//! part with the mask and is solved by preconditioned CG.

use std::time::Instant;

use super::cg::pcg;
use super::{
    check_mask, check_problem, objective_j1, objective_j2, rel_change, truth_error, McSolution,
    RpcaSolution, SolveReport, SolverConfig,
};
use crate::error::{MnnError, Result};
use crate::norms::{shrink, svt_with_norm};
use crate::operators::ConvOperator;
use crate::scalar::Scalar;
use crate::tensor::{apply_mask, DenseMatrix, SampleMask};

fn diverged<T: Scalar>(iteration: usize, cfg: &SolverConfig, mats: &[&DenseMatrix<T>]) -> Result<()> {
    if mats.iter().all(|m| m.is_finite()) {
        Ok(())
    } else {
        Err(MnnError::Divergence {
            iteration,
            step_size: cfg.admm_rho,
        })
    }
}

pub(super) fn rpca<T: Scalar>(
    m: &DenseMatrix<T>,
    op: &ConvOperator<T>,
    cfg: &SolverConfig,
    truth: Option<&DenseMatrix<T>>,
) -> Result<RpcaSolution<T>> {
    check_problem(m, op, cfg, truth)?;
    let timer = Instant::now();
    let lambda = T::of(cfg.lambda_for(m.rows(), m.cols())?);
    let rho = T::of(cfg.admm_rho);
    let inv_rho = T::one() / rho;
    let tol = cfg.rel_tol * m.frobenius_norm().as_f64().max(f64::MIN_POSITIVE);

    let mut x = m.clone();
    let mut dx = op.apply(&x)?;
    let mut s = DenseMatrix::zeros(m.rows(), m.cols());
    let mut y1 = DenseMatrix::zeros(m.rows(), m.cols());
    let mut y2 = DenseMatrix::zeros(m.rows(), m.cols());
    let mut report = SolveReport::default();

    for iter in 1..=cfg.max_iters {
        // Z = prox_{||.||_*/rho}(D X + Y1/rho)
        let mut v = dx.clone();
        v.axpy(inv_rho, &y1);
        let (z, z_nuclear) = svt_with_norm(&v, inv_rho)?;

        // S = prox_{lambda ||.||_1/rho}(M - X + Y2/rho)
        let thr = lambda * inv_rho;
        s = DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| {
            shrink(m[(i, j)] - x[(i, j)] + inv_rho * y2[(i, j)], thr)
        });

        // (D^T D + I) X = D^T (Z - Y1/rho) + (M - S + Y2/rho)
        let mut a = z.clone();
        a.axpy(-inv_rho, &y1);
        let mut rhs = op.adjoint(&a)?;
        rhs.axpy(T::one(), m);
        rhs.axpy(-T::one(), &s);
        rhs.axpy(inv_rho, &y2);
        let x_new = op.solve_shifted_gram(&rhs, T::one(), T::one())?;
        let change = rel_change(&x_new, &x);
        x = x_new;
        dx = op.apply(&x)?;

        let r1 = dx.sub(&z);
        let r2 = m.sub(&x).sub(&s);
        y1.axpy(rho, &r1);
        y2.axpy(rho, &r2);
        diverged(iter, cfg, &[&x, &y1, &y2])?;

        let primal = r1.frobenius_norm().as_f64().max(r2.frobenius_norm().as_f64());
        report
            .objective_history
            .push((z_nuclear + lambda * s.l1_norm()).as_f64());
        report.rel_change_history.push(change);
        truth_error(&x, truth, &mut report.truth_error_history);
        report.iterations_run = iter;
        if primal < tol && change < cfg.rel_tol {
            report.converged = true;
            break;
        }
    }
    report.final_objective = objective_j1(&x, m, op, lambda)?.as_f64();
    report.wall_time = timer.elapsed().as_secs_f64();
    Ok(RpcaSolution {
        x_hat: x,
        s_hat: s,
        report,
    })
}

/// ADMM for `min ||Z||_* + lambda ||S||_1` s.t. `Z = D(X)`, `M = X + S`.
pub fn rpca_admm<T: Scalar>(m: &DenseMatrix<T>, op: &ConvOperator<T>, cfg: &SolverConfig) -> Result<RpcaSolution<T>> {
    rpca(m, op, cfg, None)
}

/// Diagonal of `D^T D`: the energy of the taps after folding offsets that
/// alias on the plane.
fn gram_diagonal<T: Scalar>(op: &ConvOperator<T>) -> T {
    let (h, w) = op.plane_dims();
    let mut folded: Vec<((usize, usize), T)> = Vec::new();
    for (di, dj, t) in op.kernel().offsets() {
        let key = (
            di.rem_euclid(h as isize) as usize,
            dj.rem_euclid(w as isize) as usize,
        );
        match folded.iter_mut().find(|(k, _)| *k == key) {
            Some((_, acc)) => *acc += t,
            None => folded.push((key, t)),
        }
    }
    folded.iter().map(|&(_, t)| t * t).sum()
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
    let timer = Instant::now();
    let mu = T::of(cfg.mu_for(m.rows(), m.cols(), mask.density())?);
    let two_mu = mu + mu;
    let rho = T::of(cfg.admm_rho);
    let inv_rho = T::one() / rho;

    let pm = apply_mask(m, mask)?;
    let tol = cfg.rel_tol * pm.frobenius_norm().as_f64().max(f64::MIN_POSITIVE);
    let ind: DenseMatrix<T> = mask.to_indicator();
    let gd = gram_diagonal(op);
    let diag = ind.map(|k| rho * gd + two_mu * k);
    let system = |v: &DenseMatrix<T>| {
        let mut out = op.gram(v).expect("shape checked").scale(rho);
        out.axpy(two_mu, &apply_mask(v, mask).expect("shape checked"));
        out
    };
    let data_rhs = pm.scale(two_mu);

    let mut x = pm.clone();
    let mut dx = op.apply(&x)?;
    let mut y = DenseMatrix::zeros(m.rows(), m.cols());
    let mut report = SolveReport::default();

    for iter in 1..=cfg.max_iters {
        let mut v = dx.clone();
        v.axpy(inv_rho, &y);
        let (z, z_nuclear) = svt_with_norm(&v, inv_rho)?;

        // (rho D^T D + 2 mu P) X = D^T (rho Z - Y) + 2 mu P M
        let mut a = z.scale(rho);
        a.axpy(-T::one(), &y);
        let mut rhs = op.adjoint(&a)?;
        rhs.axpy(T::one(), &data_rhs);
        let mut x_new = x.clone();
        pcg(system, &rhs, &mut x_new, &diag, cfg.cg_tol, cfg.cg_max_iters)?;
        let change = rel_change(&x_new, &x);
        x = x_new;
        dx = op.apply(&x)?;

        let r = dx.sub(&z);
        y.axpy(rho, &r);
        diverged(iter, cfg, &[&x, &y])?;

        let fit = mu * apply_mask(&m.sub(&x), mask)?.frobenius_norm_sq();
        report.objective_history.push((z_nuclear + fit).as_f64());
        report.rel_change_history.push(change);
        truth_error(&x, truth, &mut report.truth_error_history);
        report.iterations_run = iter;
        if r.frobenius_norm().as_f64() < tol && change < cfg.rel_tol {
            report.converged = true;
            break;
        }
    }
    report.final_objective = objective_j2(&x, m, mask, op, mu)?.as_f64();
    report.wall_time = timer.elapsed().as_secs_f64();
    Ok(McSolution { x_hat: x, report })
}

/// ADMM for `min ||Z||_* + mu ||P_Omega(M - X)||^2` s.t. `Z = D(X)`.
pub fn mc_admm<T: Scalar>(
    m: &DenseMatrix<T>,
    mask: &SampleMask,
    op: &ConvOperator<T>,
    cfg: &SolverConfig,
) -> Result<McSolution<T>> {
    mc(m, mask, op, cfg, None)
}
