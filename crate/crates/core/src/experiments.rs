//! Phase-transition sweeps, convergence traces and restoration metrics.
//!
//! Sweeps use common random numbers: trial `t` of every cell is generated
//! from [`subseed`]`(seed, t)`, so neighbouring cells share factors and
//! nested corruption supports. Cells run on the ambient rayon pool; results
//! are assembled by index and do not depend on scheduling.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{MnnError, Result};
use crate::operators::OperatorSpec;
use crate::scalar::Scalar;
use crate::solvers::{solve_mc_traced, solve_rpca_traced, SolveReport, SolverConfig};
use crate::synth::{gen_mc_instance, gen_rpca_instance, subseed, GenConfig, MaskScheme};
use crate::tensor::{fold3, read_tensor, unfold3, write_tensor, DenseMatrix, ImageStack, SampleMask};

/// Relative Frobenius error at or below which a recovery counts as exact.
pub const SUCCESS_THRESHOLD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    Rpca,
    Mc,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Rpca => "rpca",
            Task::Mc => "mc",
        }
    }
}

impl FromStr for Task {
    type Err = MnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rpca" => Ok(Task::Rpca),
            "mc" => Ok(Task::Mc),
            _ => Err(MnnError::config(format!("unknown task {s:?}"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `||x_hat - x0||_F / ||x0||_F`.
pub fn relative_error<T: Scalar>(x_hat: &DenseMatrix<T>, x0: &DenseMatrix<T>) -> Result<f64> {
    x_hat.check_same_shape(x0, "relative error")?;
    if x0.max_abs() == T::zero() {
        return Err(MnnError::DegenerateInput("reference matrix is zero".into()));
    }
    Ok(x_hat.rel_error(x0).as_f64())
}

pub fn success<T: Scalar>(x_hat: &DenseMatrix<T>, x0: &DenseMatrix<T>) -> Result<bool> {
    Ok(relative_error(x_hat, x0)? <= SUCCESS_THRESHOLD)
}

/// `10 log10(peak^2 / MSE)`; `+inf` when the inputs coincide.
pub fn psnr<T: Scalar>(x_hat: &DenseMatrix<T>, x0: &DenseMatrix<T>, peak: f64) -> Result<f64> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(MnnError::config(format!("psnr peak must be positive, got {peak}")));
    }
    x_hat.check_same_shape(x0, "psnr")?;
    let mse = x_hat.sub(x0).frobenius_norm_sq().as_f64() / x0.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    /// Side of the square sliding window (clipped to the plane size).
    pub window: usize,
    /// Dynamic range `L` of the data.
    pub dynamic_range: f64,
    pub k1: f64,
    pub k2: f64,
}

impl SsimParams {
    pub fn with_range(dynamic_range: f64) -> Self {
        SsimParams {
            window: 8,
            dynamic_range,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

/// Mean structural similarity over bands, each band averaged over all
/// `window x window` patches at stride 1.
pub fn ssim<T: Scalar>(x_hat: &ImageStack<T>, x0: &ImageStack<T>, params: &SsimParams) -> Result<f64> {
    if x_hat.dims() != x0.dims() {
        return Err(MnnError::dims(format!(
            "ssim on stacks {:?} vs {:?}",
            x_hat.dims(),
            x0.dims()
        )));
    }
    if !(params.dynamic_range > 0.0 && params.dynamic_range.is_finite()) || params.window == 0 {
        return Err(MnnError::config("ssim needs a positive window and dynamic range"));
    }
    let (h, w, b) = x0.dims();
    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let (wh, ww) = (params.window.min(h), params.window.min(w));
    let n = (wh * ww) as f64;

    let mut total = 0.0;
    for k in 0..b {
        let (pa, pb) = (x_hat.band(k), x0.band(k));
        let mut band_sum = 0.0;
        let mut patches = 0usize;
        for i0 in 0..=h - wh {
            for j0 in 0..=w - ww {
                let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for j in j0..j0 + ww {
                    for i in i0..i0 + wh {
                        let a = pa[i + h * j].as_f64();
                        let v = pb[i + h * j].as_f64();
                        sa += a;
                        sb += v;
                        saa += a * a;
                        sbb += v * v;
                        sab += a * v;
                    }
                }
                let (ma, mb) = (sa / n, sb / n);
                let va = (saa / n - ma * ma).max(0.0);
                let vb = (sbb / n - mb * mb).max(0.0);
                let cov = sab / n - ma * mb;
                band_sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                patches += 1;
            }
        }
        total += band_sum / patches as f64;
    }
    Ok(total / b as f64)
}

/// Sweep layout for a phase diagram.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub h: usize,
    pub w: usize,
    pub b: usize,
    pub c: usize,
    pub r_values: Vec<usize>,
    /// Corruption fractions (RPCA) or sampling ratios (MC).
    pub ratio_values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub mask_scheme: MaskScheme,
}

impl GridSpec {
    /// 16x16x30 planes, seven ranks, ten ratios (RPCA) or nine (MC).
    pub fn desk(task: Task) -> Self {
        let ratio_values = match task {
            Task::Rpca => (1..=10).map(|i| i as f64 / 20.0).collect(),
            Task::Mc => (1..=9).map(|i| i as f64 / 10.0).collect(),
        };
        GridSpec {
            h: 16,
            w: 16,
            b: 30,
            c: 10,
            r_values: vec![1, 2, 4, 6, 8, 10, 12],
            ratio_values,
            trials: 10,
            seed: 0,
            mask_scheme: MaskScheme::Bernoulli,
        }
    }

    /// The full 50x50x100 grid with ranks 1..=50.
    pub fn full(task: Task) -> Self {
        let ratio_values = match task {
            Task::Rpca => (1..=50).map(|i| i as f64 / 100.0).collect(),
            Task::Mc => (0..50).map(|k| (1 + 2 * k) as f64 / 100.0).collect(),
        };
        GridSpec {
            h: 50,
            w: 50,
            b: 100,
            r_values: (1..=50).collect(),
            ratio_values,
            ..Self::desk(task)
        }
    }

    fn cell_config(&self, task: Task, r: usize, ratio: f64, trial: usize) -> GenConfig {
        let mut cfg = GenConfig {
            h: self.h,
            w: self.w,
            b: self.b,
            r,
            c: self.c,
            seed: subseed(self.seed, trial as u64),
            ..GenConfig::default()
        };
        match task {
            Task::Rpca => cfg.rho_s = ratio,
            Task::Mc => cfg.p = ratio,
        }
        cfg
    }

    pub fn validate(&self, task: Task) -> Result<()> {
        if self.r_values.is_empty() || self.ratio_values.is_empty() {
            return Err(MnnError::config("phase grid needs at least one rank and one ratio"));
        }
        if self.trials == 0 {
            return Err(MnnError::config("phase grid needs at least one trial"));
        }
        for &r in &self.r_values {
            for &ratio in &self.ratio_values {
                self.cell_config(task, r, ratio, 0).validate()?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialFailure {
    pub r: usize,
    pub ratio: f64,
    pub trial: usize,
    pub tag: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    pub task: Task,
    pub operator_name: String,
    pub r_values: Vec<usize>,
    pub ratio_values: Vec<f64>,
    pub trials_per_cell: usize,
    /// Successful trials, indexed `[rank][ratio]`.
    pub successes: Vec<Vec<usize>>,
    pub success_rate: Vec<Vec<f64>>,
    /// Trials that errored; each also counts as a failure.
    pub failures: Vec<TrialFailure>,
}

impl PhaseGrid {
    pub fn total_successes(&self) -> usize {
        self.successes.iter().flatten().sum()
    }

    /// Cells whose success rate is below one half.
    pub fn hard_cells(&self) -> usize {
        self.success_rate.iter().flatten().filter(|&&s| s < 0.5).count()
    }

    /// Fraction of rank rows whose success rate never improves as the
    /// problem gets harder (more corruption, or fewer samples for MC).
    pub fn monotone_row_fraction(&self) -> f64 {
        let ok = self
            .success_rate
            .iter()
            .filter(|row| {
                row.windows(2).all(|p| match self.task {
                    Task::Rpca => p[1] <= p[0],
                    Task::Mc => p[1] >= p[0],
                })
            })
            .count();
        ok as f64 / self.success_rate.len() as f64
    }

    /// `r,ratio,success_rate,trials`, one line per cell, ranks outermost.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,ratio,success_rate,trials\n");
        for (ri, &r) in self.r_values.iter().enumerate() {
            for (ai, &ratio) in self.ratio_values.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{r},{ratio},{},{}",
                    self.success_rate[ri][ai], self.trials_per_cell
                );
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_csv())
    }
}

/// Relative error of one synthetic trial.
fn run_trial(task: Task, gen: &GenConfig, scheme: MaskScheme, op: &crate::Operator, cfg: &SolverConfig) -> Result<f64> {
    match task {
        Task::Rpca => {
            let inst = gen_rpca_instance(gen)?;
            let sol = solve_rpca_traced(&inst.m, op, cfg, None)?;
            relative_error(&sol.x_hat, &inst.x0)
        }
        Task::Mc => {
            let inst = gen_mc_instance(gen, scheme)?;
            let sol = solve_mc_traced(&inst.m, &inst.mask, op, cfg, None)?;
            relative_error(&sol.x_hat, &inst.x0)
        }
    }
}

/// Sweeps every `(rank, ratio)` cell for `grid.trials` trials.
pub fn run_phase_diagram(task: Task, spec: &OperatorSpec, grid: &GridSpec, cfg: &SolverConfig) -> Result<PhaseGrid> {
    grid.validate(task)?;
    let op = spec.build::<f64>(grid.h, grid.w)?;
    let (nr, na, nt) = (grid.r_values.len(), grid.ratio_values.len(), grid.trials);

    let outcomes: Vec<Result<f64>> = (0..nr * na * nt)
        .into_par_iter()
        .map(|job| {
            let (ri, rest) = (job / (na * nt), job % (na * nt));
            let (ai, t) = (rest / nt, rest % nt);
            let gen = grid.cell_config(task, grid.r_values[ri], grid.ratio_values[ai], t);
            run_trial(task, &gen, grid.mask_scheme, &op, cfg)
        })
        .collect();

    let mut successes = vec![vec![0usize; na]; nr];
    let mut failures = Vec::new();
    for (job, outcome) in outcomes.into_iter().enumerate() {
        let (ri, rest) = (job / (na * nt), job % (na * nt));
        let (ai, t) = (rest / nt, rest % nt);
        match outcome {
            Ok(err) if err <= SUCCESS_THRESHOLD => successes[ri][ai] += 1,
            Ok(_) => {}
            Err(e) => failures.push(TrialFailure {
                r: grid.r_values[ri],
                ratio: grid.ratio_values[ai],
                trial: t,
                tag: e.to_string(),
            }),
        }
    }
    let success_rate = successes
        .iter()
        .map(|row| row.iter().map(|&s| s as f64 / nt as f64).collect())
        .collect();
    Ok(PhaseGrid {
        task,
        operator_name: spec.label.clone(),
        r_values: grid.r_values.clone(),
        ratio_values: grid.ratio_values.clone(),
        trials_per_cell: nt,
        successes,
        success_rate,
        failures,
    })
}

/// Generates one synthetic instance and solves it while recording the
/// error against the ground truth at every iteration.
pub fn run_trace(
    task: Task,
    spec: &OperatorSpec,
    gen: &GenConfig,
    scheme: MaskScheme,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    gen.validate()?;
    let op = spec.build::<f64>(gen.h, gen.w)?;
    Ok(match task {
        Task::Rpca => {
            let inst = gen_rpca_instance(gen)?;
            solve_rpca_traced(&inst.m, &op, cfg, Some(&inst.x0))?.report
        }
        Task::Mc => {
            let inst = gen_mc_instance(gen, scheme)?;
            solve_mc_traced(&inst.m, &inst.mask, &op, cfg, Some(&inst.x0))?.report
        }
    })
}

/// `iter,objective,rel_change[,rel_err_vs_truth]`, iterations from 1.
pub fn trace_csv(report: &SolveReport) -> String {
    let with_truth = !report.truth_error_history.is_empty();
    let mut out = String::from("iter,objective,rel_change");
    out.push_str(if with_truth { ",rel_err_vs_truth\n" } else { "\n" });
    for (k, (obj, change)) in report
        .objective_history
        .iter()
        .zip(&report.rel_change_history)
        .enumerate()
    {
        let _ = write!(out, "{},{obj},{change}", k + 1);
        if with_truth {
            let _ = write!(out, ",{}", report.truth_error_history[k]);
        }
        out.push('\n');
    }
    out
}

pub fn write_trace_csv(path: impl AsRef<Path>, report: &SolveReport) -> Result<()> {
    write_text(path.as_ref(), &trace_csv(report))
}

/// One line of a restoration report; metrics against the truth are absent
/// when no ground truth was supplied.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub dataset: String,
    pub task: Task,
    pub operator: String,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub rel_err: Option<f64>,
    pub wall_time: f64,
    /// Model objective at the returned estimate.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const METRICS_HEADER: &str = "dataset,task,operator,psnr,ssim,rel_err,wall_time_s";

fn opt_field(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl MetricsRow {
    /// CSV line without trailing newline. Wall time is written as `NA`
    /// unless `with_timing` is set, keeping repeated runs byte-identical.
    pub fn to_csv_line(&self, with_timing: bool) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.dataset,
            self.task,
            self.operator,
            opt_field(self.psnr),
            opt_field(self.ssim),
            opt_field(self.rel_err),
            opt_field(with_timing.then_some(self.wall_time)),
        )
    }
}

pub fn metrics_csv(rows: &[MetricsRow], with_timing: bool) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for row in rows {
        out.push_str(&row.to_csv_line(with_timing));
        out.push('\n');
    }
    out
}

/// Files and settings for one restoration run.
#[derive(Clone, Debug, PartialEq)]
pub struct RestorationJob {
    pub dataset: String,
    pub task: Task,
    /// Observed stack (MNNT).
    pub input: PathBuf,
    /// Optional ground truth, same dimensions as the input.
    pub truth: Option<PathBuf>,
    /// Sampling mask (nonzero = observed); required for MC.
    pub mask: Option<PathBuf>,
    /// Where the recovered stack is written.
    pub output: PathBuf,
    /// PSNR peak; defaults to the truth's largest magnitude.
    pub peak: Option<f64>,
    /// SSIM dynamic range; defaults to the truth's max minus min.
    pub dynamic_range: Option<f64>,
}

fn read_conformable(path: &Path, dims: (usize, usize, usize), what: &str) -> Result<ImageStack<f64>> {
    let stack = read_tensor(path)?;
    if stack.dims() != dims {
        return Err(MnnError::dims(format!(
            "{what} {} has dims {:?}, input has {:?}",
            path.display(),
            stack.dims(),
            dims
        )));
    }
    Ok(stack)
}

/// Solves the restoration problem, writes the recovered stack and reports
/// metrics.
pub fn run_restoration(job: &RestorationJob, spec: &OperatorSpec, cfg: &SolverConfig) -> Result<MetricsRow> {
    let input = read_tensor(&job.input)?;
    let (h, w, b) = input.dims();
    let truth = job
        .truth
        .as_deref()
        .map(|p| read_conformable(p, (h, w, b), "truth"))
        .transpose()?;
    let op = spec.build::<f64>(h, w)?;
    let m = unfold3(&input);
    let truth_m = truth.as_ref().map(unfold3);

    let (x_hat, report) = match job.task {
        Task::Rpca => {
            let sol = solve_rpca_traced(&m, &op, cfg, None)?;
            (sol.x_hat, sol.report)
        }
        Task::Mc => {
            let mask_path = job
                .mask
                .as_deref()
                .ok_or_else(|| MnnError::config("matrix completion needs a sampling mask file"))?;
            let mask = SampleMask::from_indicator(&unfold3(&read_conformable(mask_path, (h, w, b), "mask")?));
            let sol = solve_mc_traced(&m, &mask, &op, cfg, None)?;
            (sol.x_hat, sol.report)
        }
    };
    let recovered = fold3(&x_hat, h, w)?;
    write_tensor(&job.output, &recovered)?;

    let (mut psnr_v, mut ssim_v, mut rel_v) = (None, None, None);
    if let (Some(t), Some(tm)) = (truth.as_ref(), truth_m.as_ref()) {
        let peak = job.peak.unwrap_or_else(|| tm.max_abs());
        let range = job.dynamic_range.unwrap_or_else(|| tm.max() - tm.min());
        rel_v = Some(relative_error(&x_hat, tm)?);
        psnr_v = Some(psnr(&x_hat, tm, if peak > 0.0 { peak } else { 1.0 })?);
        let params = SsimParams::with_range(if range > 0.0 { range } else { 1.0 });
        ssim_v = Some(ssim(&recovered, t, &params)?);
    }
    Ok(MetricsRow {
        dataset: job.dataset.clone(),
        task: job.task,
        operator: spec.label.clone(),
        psnr: psnr_v,
        ssim: ssim_v,
        rel_err: rel_v,
        wall_time: report.wall_time,
        objective: report.final_objective,
        iterations: report.iterations_run,
        converged: report.converged,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| MnnError::io(path, e))
}
