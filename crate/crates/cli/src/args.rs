use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mnn_core::experiments::Task;
use mnn_core::operators::{KernelName, Normalization, OperatorSpec};
use mnn_core::solvers::{Algorithm, SolverConfig};
use mnn_core::synth::{GenConfig, MaskScheme};

/// Low-rank recovery with the modified nuclear norm.
#[derive(Debug, Parser)]
#[command(name = "mnn", version)]
pub struct Cli {
    /// File of `key = value` lines giving defaults for the subcommand's
    /// flags (`#` starts a comment; flags on the command line win).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic ground truth and its corrupted or sampled observation.
    #[command(args_override_self = true)]
    GenData(GenDataArgs),
    /// Robust PCA: separate a low-rank stack from sparse corruption.
    #[command(args_override_self = true)]
    Rpca(SolveArgs),
    /// Matrix completion from a sampling mask.
    #[command(args_override_self = true)]
    Mc(SolveArgs),
    /// Success-rate sweep over (rank, ratio) cells.
    #[command(args_override_self = true)]
    Phase(PhaseArgs),
    /// Per-iteration objective and error on one synthetic instance.
    #[command(args_override_self = true)]
    Trace(TraceArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Rpca(_) => "rpca",
            Command::Mc(_) => "mc",
            Command::Phase(_) => "phase",
            Command::Trace(_) => "trace",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Rpca,
    Mc,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Rpca => Task::Rpca,
            TaskArg::Mc => Task::Mc,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Plane height.
    #[arg(long, default_value_t = 16)]
    pub h: usize,
    /// Plane width.
    #[arg(long, default_value_t = 16)]
    pub w: usize,
    /// Number of bands (columns of the unfolded matrix).
    #[arg(long, default_value_t = 30)]
    pub b: usize,
    /// Rank of the ground truth.
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    /// Piecewise-constant regions per factor plane.
    #[arg(long, default_value_t = 10)]
    pub c: usize,
    /// Fraction of corrupted entries (rpca).
    #[arg(long, default_value_t = 0.05)]
    pub rho_s: f64,
    /// Sampling ratio (mc).
    #[arg(long, default_value_t = 0.4)]
    pub p: f64,
    /// Mask sampling scheme: bernoulli or uniform-m.
    #[arg(long, default_value = "bernoulli")]
    pub mask_scheme: MaskScheme,
    /// Master seed; sub-seeds for trials are derived from it.
    #[arg(long, env = "MNN_SEED", default_value_t = 0)]
    pub seed: u64,
}

impl DataArgs {
    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            h: self.h,
            w: self.w,
            b: self.b,
            r: self.r,
            c: self.c,
            seed: self.seed,
            rho_s: self.rho_s,
            p: self.p,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OperatorArgs {
    /// Built-in transform: identity, diff, diff-col, central-diff, sobel,
    /// laplacian1, laplacian2.
    #[arg(long, default_value = "diff")]
    pub operator: KernelName,
    /// CSV file of kernel taps (one row per line); replaces --operator.
    #[arg(long, value_name = "FILE")]
    pub kernel_file: Option<PathBuf>,
    /// Tap normalization: l1, l2 or none.
    #[arg(long, default_value = "l1")]
    pub normalize: Normalization,
}

impl OperatorArgs {
    pub fn spec(&self) -> mnn_core::Result<OperatorSpec> {
        match &self.kernel_file {
            Some(path) => OperatorSpec::from_kernel_file(path, self.normalize),
            None => Ok(OperatorSpec::builtin(self.operator, self.normalize)),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// admm or subgradient [default: subgradient for trace, admm otherwise].
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    /// Sparse-term weight [default: 1/sqrt(max(n1, n2))].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Data-term weight of the completion objective [default: derived from
    /// sigma and the sampling ratio].
    #[arg(long)]
    pub mu: Option<f64>,
    /// Noise level used for the default data weight.
    #[arg(long, default_value = "1e-4")]
    pub sigma: f64,
    /// Subgradient step size.
    #[arg(long, default_value = "1e-4")]
    pub step_size: f64,
    /// Iteration cap [default: 500 for phase, 5000 otherwise].
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative-change stopping tolerance [default: 1e-5 for phase, 1e-7 otherwise].
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// ADMM penalty parameter.
    #[arg(long, default_value_t = 1.0)]
    pub admm_rho: f64,
    /// Conjugate-gradient tolerance for the completion X-update.
    #[arg(long, default_value = "1e-8")]
    pub cg_tol: f64,
    /// Conjugate-gradient iteration cap.
    #[arg(long, default_value_t = 500)]
    pub cg_max_iters: usize,
    /// Relative singular value cutoff.
    #[arg(long, default_value = "1e-9")]
    pub rank_tol: f64,
}

/// Per-command fallbacks for the solver flags without a fixed default.
pub struct SolverDefaults {
    pub algorithm: Algorithm,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl SolverArgs {
    pub fn config(&self, defaults: SolverDefaults) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            mu: self.mu,
            sigma: self.sigma,
            step_size: self.step_size,
            max_iters: self.max_iters.unwrap_or(defaults.max_iters),
            rel_tol: self.rel_tol.unwrap_or(defaults.rel_tol),
            algorithm: self.algorithm.unwrap_or(defaults.algorithm),
            admm_rho: self.admm_rho,
            cg_tol: self.cg_tol,
            cg_max_iters: self.cg_max_iters,
            rank_tol: self.rank_tol,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Recovery problem.
    #[arg(long, value_enum, default_value = "rpca")]
    pub task: TaskArg,
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Observed stack (MNNT). Without it a synthetic instance is generated
    /// from the data flags.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Ground truth stack for metrics.
    #[arg(long, value_name = "FILE")]
    pub truth: Option<PathBuf>,
    /// Sampling mask stack, nonzero where observed (mc with --input).
    #[arg(long, value_name = "FILE")]
    pub mask: Option<PathBuf>,
    /// Dataset name for the metrics file [default: input file stem, or synthetic].
    #[arg(long)]
    pub dataset: Option<String>,
    /// PSNR peak [default: largest magnitude of the truth].
    #[arg(long)]
    pub peak: Option<f64>,
    /// SSIM dynamic range [default: range of the truth].
    #[arg(long)]
    pub dynamic_range: Option<f64>,
    /// Write measured wall time to the metrics file (otherwise NA).
    #[arg(long)]
    pub record_timing: bool,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub operator: OperatorArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridKind {
    /// 16x16x30 planes, ranks 1..12, ten (rpca) or nine (mc) ratios.
    Desk,
    /// 50x50x100 planes, ranks 1..50, fifty ratios.
    Full,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    /// Recovery problem.
    #[arg(long, value_enum, default_value = "rpca")]
    pub task: TaskArg,
    /// Base grid.
    #[arg(long, value_enum, default_value = "desk")]
    pub grid: GridKind,
    /// Comma-separated ranks replacing the grid's.
    #[arg(long, value_delimiter = ',')]
    pub r_values: Option<Vec<usize>>,
    /// Comma-separated corruption (rpca) or sampling (mc) ratios replacing the grid's.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    /// Trials per cell.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Plane height replacing the grid's.
    #[arg(long)]
    pub h: Option<usize>,
    /// Plane width replacing the grid's.
    #[arg(long)]
    pub w: Option<usize>,
    /// Band count replacing the grid's.
    #[arg(long)]
    pub b: Option<usize>,
    /// Regions per factor plane.
    #[arg(long, default_value_t = 10)]
    pub c: usize,
    /// Mask sampling scheme (mc).
    #[arg(long, default_value = "bernoulli")]
    pub mask_scheme: MaskScheme,
    /// Master seed.
    #[arg(long, env = "MNN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads [default: number of logical cores].
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub operator: OperatorArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output CSV file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Recovery problem.
    #[arg(long, value_enum, default_value = "rpca")]
    pub task: TaskArg,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub operator: OperatorArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output CSV file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}
