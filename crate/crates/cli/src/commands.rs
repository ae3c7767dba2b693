use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use mnn_core::experiments::{
    metrics_csv, run_phase_diagram, run_restoration, run_trace, write_trace_csv, GridSpec, RestorationJob, Task,
};
use mnn_core::solvers::{Algorithm, SolverConfig};
use mnn_core::synth::{gen_mc_instance, gen_rpca_instance, GenConfig};
use mnn_core::tensor::{fold3, write_tensor, DenseMatrix};
use mnn_core::MnnError;

use crate::args::{Command, GenDataArgs, GridKind, PhaseArgs, SolveArgs, SolverDefaults, TraceArgs};
use crate::CliError;

const SINGLE_SOLVE: SolverDefaults = SolverDefaults {
    algorithm: Algorithm::Admm,
    max_iters: 5000,
    rel_tol: 1e-7,
};

const SWEEP: SolverDefaults = SolverDefaults {
    algorithm: Algorithm::Admm,
    max_iters: 500,
    rel_tol: 1e-5,
};

const TRACE: SolverDefaults = SolverDefaults {
    algorithm: Algorithm::Subgradient,
    max_iters: 5000,
    rel_tol: 1e-7,
};

pub fn run(command: Command, argv: &[OsString]) -> Result<(), CliError> {
    let name = command.name();
    match command {
        Command::GenData(a) => gen_data(a, name, argv),
        Command::Rpca(a) => solve(a, Task::Rpca, name, argv),
        Command::Mc(a) => solve(a, Task::Mc, name, argv),
        Command::Phase(a) => phase(a, name, argv),
        Command::Trace(a) => trace(a, name, argv),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| MnnError::Io {
        path: dir.into(),
        source: e,
    })?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| MnnError::Io {
        path: path.into(),
        source: e,
    })?;
    Ok(())
}

/// Tool version, subcommand, seed and the full argument list (after config
/// expansion). Holds nothing run-dependent, so repeated runs match.
fn write_provenance(path: &Path, command: &str, seed: u64, argv: &[OsString]) -> Result<(), CliError> {
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let text = format!(
        "tool = mnn {}\ncommand = {command}\nseed = {seed}\nargs = {}\n",
        env!("CARGO_PKG_VERSION"),
        args.join(" ")
    );
    write_text(path, &text)
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".provenance.txt");
    out.with_file_name(name)
}

fn write_stack(path: &Path, m: &DenseMatrix<f64>, cfg: &GenConfig) -> Result<(), CliError> {
    write_tensor(path, &fold3(m, cfg.h, cfg.w)?)?;
    Ok(())
}

/// Writes a synthetic instance into `dir`; returns the paths of the
/// observation, truth and (for MC) mask.
fn write_instance(task: Task, cfg: &GenConfig, scheme: mnn_core::synth::MaskScheme, dir: &Path) -> Result<[PathBuf; 3], CliError> {
    let observed = dir.join("m.mnnt");
    let truth = dir.join("x0.mnnt");
    match task {
        Task::Rpca => {
            let inst = gen_rpca_instance(cfg)?;
            let s0 = dir.join("s0.mnnt");
            write_stack(&truth, &inst.x0, cfg)?;
            write_stack(&observed, &inst.m, cfg)?;
            write_stack(&s0, &inst.s0, cfg)?;
            Ok([observed, truth, s0])
        }
        Task::Mc => {
            let inst = gen_mc_instance(cfg, scheme)?;
            let mask = dir.join("mask.mnnt");
            write_stack(&truth, &inst.x0, cfg)?;
            write_stack(&observed, &inst.m, cfg)?;
            write_stack(&mask, &inst.mask.to_indicator(), cfg)?;
            Ok([observed, truth, mask])
        }
    }
}

fn gen_data(a: GenDataArgs, name: &str, argv: &[OsString]) -> Result<(), CliError> {
    let cfg = a.data.gen_config();
    cfg.validate()?;
    create_dir(&a.out)?;
    let written = write_instance(a.task.into(), &cfg, a.data.mask_scheme, &a.out)?;
    write_provenance(&a.out.join("provenance.txt"), name, cfg.seed, argv)?;
    for p in &written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn validated(cfg: SolverConfig) -> Result<SolverConfig, CliError> {
    cfg.validate()?;
    Ok(cfg)
}

fn solve(a: SolveArgs, task: Task, name: &str, argv: &[OsString]) -> Result<(), CliError> {
    let solver = validated(a.solver.config(SINGLE_SOLVE))?;
    let spec = a.operator.spec()?;
    create_dir(&a.out)?;

    let (input, truth, mask, dataset) = match &a.input {
        Some(input) => {
            let dataset = a.dataset.clone().unwrap_or_else(|| {
                input
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "input".into())
            });
            (input.clone(), a.truth.clone(), a.mask.clone(), dataset)
        }
        None => {
            let cfg = a.data.gen_config();
            cfg.validate()?;
            let [observed, truth, extra] = write_instance(task, &cfg, a.data.mask_scheme, &a.out)?;
            let mask = (task == Task::Mc).then_some(extra);
            let dataset = a.dataset.clone().unwrap_or_else(|| "synthetic".into());
            (observed, Some(truth), mask, dataset)
        }
    };

    let job = RestorationJob {
        dataset,
        task,
        input,
        truth,
        mask,
        output: a.out.join("recovered.mnnt"),
        peak: a.peak,
        dynamic_range: a.dynamic_range,
    };
    let row = run_restoration(&job, &spec, &solver)?;
    write_text(&a.out.join("metrics.csv"), &metrics_csv(std::slice::from_ref(&row), a.record_timing))?;
    write_provenance(&a.out.join("provenance.txt"), name, a.data.seed, argv)?;
    if !row.converged {
        eprintln!(
            "warning: stopped at the iteration cap ({}) before reaching rel_tol",
            row.iterations
        );
    }
    eprintln!("{}", row.to_csv_line(true));
    Ok(())
}

fn phase(a: PhaseArgs, name: &str, argv: &[OsString]) -> Result<(), CliError> {
    let task: Task = a.task.into();
    let solver = validated(a.solver.config(SWEEP))?;
    let spec = a.operator.spec()?;
    let base = match a.grid {
        GridKind::Desk => GridSpec::desk(task),
        GridKind::Full => GridSpec::full(task),
    };
    let grid = GridSpec {
        h: a.h.unwrap_or(base.h),
        w: a.w.unwrap_or(base.w),
        b: a.b.unwrap_or(base.b),
        c: a.c,
        r_values: a.r_values.clone().unwrap_or(base.r_values),
        ratio_values: a.ratios.clone().unwrap_or(base.ratio_values),
        trials: a.trials,
        seed: a.seed,
        mask_scheme: a.mask_scheme,
    };
    grid.validate(task)?;
    let jobs = match a.jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    let result = pool.install(|| run_phase_diagram(task, &spec, &grid, &solver))?;
    result.write_csv(&a.out)?;
    write_provenance(&sidecar(&a.out), name, a.seed, argv)?;
    eprintln!(
        "{}: {} successes over {} cells, {} hard cells, {} failed trials",
        result.operator_name,
        result.total_successes(),
        grid.r_values.len() * grid.ratio_values.len(),
        result.hard_cells(),
        result.failures.len()
    );
    for f in &result.failures {
        eprintln!("  r={} ratio={} trial={}: {}", f.r, f.ratio, f.trial, f.tag);
    }
    Ok(())
}

fn trace(a: TraceArgs, name: &str, argv: &[OsString]) -> Result<(), CliError> {
    let solver = validated(a.solver.config(TRACE))?;
    let spec = a.operator.spec()?;
    let cfg = a.data.gen_config();
    cfg.validate()?;
    let report = run_trace(a.task.into(), &spec, &cfg, a.data.mask_scheme, &solver)?;
    write_trace_csv(&a.out, &report)?;
    write_provenance(&sidecar(&a.out), name, cfg.seed, argv)?;
    eprintln!(
        "{} iterations, final objective {}",
        report.iterations_run, report.final_objective
    );
    Ok(())
}
