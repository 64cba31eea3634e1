//! Library side of the `fbse` command: configuration, runs and reports.

pub mod config;
pub mod report;
pub mod run;

use std::io::Write;
use std::path::PathBuf;

use fbse::checks::{
    complexity_decay, descent_ledger, grad_psi_fd, invariant_suite, objective_gradient_fd,
    CheckReport, Family, SuiteOptions,
};
use fbse::SolveStatus;
use rayon::prelude::*;

use config::{Experiment, Format, RunConfig};
use report::{median_row, write_csv_file, SummaryRow};
use run::{cells, run_cell, CellOutcome};

/// Finite-difference points per gradient check in `check`.
pub const FD_POINTS: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("solver error: {0}")]
    Solve(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) | CliError::Solve(_) => 3,
        }
    }
}

/// Command-line flags that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub formats: Vec<Format>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if !self.formats.is_empty() {
            cfg.formats = self.formats.iter().copied().collect();
        }
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w.max(1));
    }
    b.build().map_err(|e| CliError::Solve(e.to_string()))
}

fn prepare_output(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", cfg.output_dir.display())))
}

/// Runs every cell on the worker pool. Results come back in cell order.
fn run_all(
    cfg: &RunConfig,
    workers: Option<usize>,
) -> Result<Vec<Result<CellOutcome, CliError>>, CliError> {
    prepare_output(cfg)?;
    let cells = cells(cfg);
    Ok(pool(workers)?.install(|| cells.par_iter().map(|&c| run_cell(cfg, c)).collect()))
}

fn write_table(cfg: &RunConfig, name: &str, rows: &[SummaryRow]) -> Result<(), CliError> {
    if cfg.formats.contains(&Format::Csv) {
        let path = cfg.output_dir.join(name);
        write_csv_file(&path, rows)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn status_line(out: &mut dyn Write, o: &CellOutcome) -> std::io::Result<()> {
    let r = o.row.record();
    writeln!(
        out,
        "{:<28} {:?}: iterations {}, f {}, stationarity {}, feasibility {}, time {}",
        r.instance,
        o.status,
        r.iterations,
        r.function_value,
        r.stationarity,
        r.feasibility,
        r.cpu_time_s
    )
}

/// Splits successes from failures; failures are reported after the
/// successful artifacts have been written.
fn partition(results: Vec<Result<CellOutcome, CliError>>) -> (Vec<CellOutcome>, Vec<String>) {
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(o) => ok.push(o),
            Err(e) => errors.push(e.to_string()),
        }
    }
    (ok, errors)
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Solves every configured cell and writes `summary.csv` plus one JSONL log
/// per run. Returns whether every run converged.
pub fn cmd_solve(
    cfg: &RunConfig,
    workers: Option<usize>,
    out: &mut dyn Write,
) -> Result<bool, CliError> {
    let (done, errors) = partition(run_all(cfg, workers)?);
    for o in &done {
        status_line(out, o).map_err(io_err)?;
    }
    let rows: Vec<SummaryRow> = done.iter().map(|o| o.row.clone()).collect();
    write_table(cfg, "summary.csv", &rows)?;
    if !errors.is_empty() {
        return Err(CliError::Solve(errors.join("; ")));
    }
    Ok(done.iter().all(|o| o.status == SolveStatus::Converged))
}

/// Per-run rows in `runs.csv` and one median row per size in `bench.csv`.
pub fn cmd_bench(
    cfg: &RunConfig,
    workers: Option<usize>,
    out: &mut dyn Write,
) -> Result<bool, CliError> {
    let (done, errors) = partition(run_all(cfg, workers)?);
    for o in &done {
        status_line(out, o).map_err(io_err)?;
    }
    let runs: Vec<SummaryRow> = done.iter().map(|o| o.row.clone()).collect();
    write_table(cfg, "runs.csv", &runs)?;

    let mut medians = Vec::new();
    for size in &cfg.sizes {
        let group: Vec<SummaryRow> = done
            .iter()
            .filter(|o| o.cell.size == *size)
            .map(|o| o.row.clone())
            .collect();
        if group.is_empty() {
            continue;
        }
        let name = match cfg.experiment {
            Experiment::SdpAffine => format!("sdp_affine_n{}_m{}", size.n, size.m),
            e => format!("{}_n{}", e.name(), size.n),
        };
        medians.push(median_row(
            name,
            format!("{}-median{}", run::SOLVER_NAME, group.len()),
            &group,
        ));
    }
    writeln!(out).map_err(io_err)?;
    report::write_csv(&mut *out, &medians).map_err(|e| CliError::Io(e.to_string()))?;
    write_table(cfg, "bench.csv", &medians)?;
    if !errors.is_empty() {
        return Err(CliError::Solve(errors.join("; ")));
    }
    Ok(done.iter().all(|o| o.status == SolveStatus::Converged))
}

fn family(e: Experiment) -> Family {
    match e {
        Experiment::SdpSphere => Family::SdpSphere,
        Experiment::SdpAffine => Family::SdpAffine,
        Experiment::Toy => Family::Toy,
    }
}

/// Sampled invariants at the configured sizes, then residual decay and the
/// nonmonotone acceptance ledger on every configured run.
pub fn check_reports(
    cfg: &RunConfig,
    workers: Option<usize>,
) -> Result<Vec<CheckReport>, CliError> {
    let fam = family(cfg.experiment);
    let check_err = |e: fbse::FbseError| CliError::Solve(e.to_string());
    let mut reports = Vec::new();
    for size in &cfg.sizes {
        let opts = SuiteOptions {
            samples: cfg.check_samples,
            seed: cfg.seeds[0],
            side: size.n,
            constraints: size.m,
            nu: cfg.nu,
            cap: cfg.cap,
            envelope: Some(cfg.envelope),
        };
        let prefix = match cfg.experiment {
            Experiment::Toy => String::new(),
            Experiment::SdpSphere => format!("n{} ", size.n),
            Experiment::SdpAffine => format!("n{} m{} ", size.n, size.m),
        };
        let points = FD_POINTS.min(cfg.check_samples);
        let mut suite = invariant_suite(fam, &opts).map_err(check_err)?;
        suite.push(grad_psi_fd(fam, points, &opts).map_err(check_err)?);
        suite.push(objective_gradient_fd(fam, points, &opts).map_err(check_err)?);
        reports.extend(suite.into_iter().map(|r| CheckReport {
            name: format!("{prefix}{}", r.name),
            ..r
        }));
    }
    let (done, errors) = partition(run_all(cfg, workers)?);
    if !errors.is_empty() {
        return Err(CliError::Solve(errors.join("; ")));
    }
    for o in &done {
        let name = o.row.instance.clone();
        reports.push(complexity_decay(&name, &o.log));
        reports.push(
            descent_ledger(
                &name,
                &o.log,
                cfg.solver.nonmonotone_window,
                cfg.solver.ls_sufficient,
            )
            .map_err(check_err)?,
        );
    }
    Ok(reports)
}

/// Prints one line per invariant; true when all pass.
pub fn cmd_check(
    cfg: &RunConfig,
    workers: Option<usize>,
    out: &mut dyn Write,
) -> Result<bool, CliError> {
    let reports = check_reports(cfg, workers)?;
    for r in &reports {
        writeln!(out, "{r}").map_err(io_err)?;
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    writeln!(out, "check: {passed}/{} passed", reports.len()).map_err(io_err)?;
    if cfg.formats.contains(&Format::Jsonl) {
        let path = cfg.output_dir.join("check.jsonl");
        let mut text = String::new();
        for r in &reports {
            text.push_str(&serde_json::to_string(r).map_err(|e| CliError::Io(e.to_string()))?);
            text.push('\n');
        }
        std::fs::write(&path, text)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(passed == reports.len())
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub struct CliChapter;
