//! One (size, seed) cell: build the instance, solve it, keep its log.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use fbse::problems::{gen_sdp_affine, gen_sdp_sphere, toy_problem};
use fbse::random;
use fbse::solver::IterateLog;
use fbse::{pgd_solve, FbseProblem, SolveStatus};
use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, Format, RunConfig, Size};
use crate::report::{CpuTime, SummaryRow};
use crate::CliError;

pub const SOLVER_NAME: &str = "pgd";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub size: Size,
    pub seed: u64,
}

impl Cell {
    pub fn instance(&self, experiment: Experiment) -> String {
        match experiment {
            Experiment::SdpSphere => format!("sdp_sphere_n{}_s{}", self.size.n, self.seed),
            Experiment::SdpAffine => {
                format!(
                    "sdp_affine_n{}_m{}_s{}",
                    self.size.n, self.size.m, self.seed
                )
            }
            Experiment::Toy => format!("toy_s{}", self.seed),
        }
    }
}

/// Sizes outer, seeds inner.
pub fn cells(cfg: &RunConfig) -> Vec<Cell> {
    cfg.sizes
        .iter()
        .flat_map(|&size| cfg.seeds.iter().map(move |&seed| Cell { size, seed }))
        .collect()
}

/// The seeded instance of a cell and its start point.
pub fn build(cfg: &RunConfig, cell: Cell) -> fbse::Result<(FbseProblem, DVector<f64>)> {
    let Size { n, m } = cell.size;
    match cfg.experiment {
        Experiment::SdpSphere => {
            let (inst, _) = gen_sdp_sphere(n, cfg.nu, cfg.cap, cell.seed)?;
            Ok((inst.problem(cfg.envelope)?, inst.x0))
        }
        Experiment::SdpAffine => {
            let (inst, _) = gen_sdp_affine(n, m, cfg.nu, cfg.cap, cell.seed)?;
            Ok((inst.problem(cfg.envelope)?, inst.x0))
        }
        Experiment::Toy => {
            let mut prob = toy_problem(&DVector::from_vec(cfg.target.clone()))?;
            prob.config = cfg.envelope;
            // start on the open arc of the feasible quarter circle
            let mut rng = random::stream(cell.seed, "toy/x0");
            let angle = rng.random_range(0.05..std::f64::consts::FRAC_PI_2 - 0.05);
            let mut x0 = DVector::zeros(n);
            x0[0] = angle.cos();
            x0[1] = angle.sin();
            Ok((prob, x0))
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cell: Cell,
    pub status: SolveStatus,
    pub row: SummaryRow,
    pub log: Vec<IterateLog>,
    pub y_final: DVector<f64>,
}

/// Final point of a run, flattened column-major for the matrix families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub instance: String,
    pub status: SolveStatus,
    pub x: Vec<f64>,
}

pub fn solution_path(dir: &Path, instance: &str) -> std::path::PathBuf {
    dir.join(format!("{instance}.solution.json"))
}

pub fn log_path(dir: &Path, instance: &str) -> std::path::PathBuf {
    dir.join(format!("{instance}.jsonl"))
}

/// Solves one cell; writes its JSONL log when that format is enabled.
pub fn run_cell(cfg: &RunConfig, cell: Cell) -> Result<CellOutcome, CliError> {
    let instance = cell.instance(cfg.experiment);
    let (prob, x0) = build(cfg, cell).map_err(|e| CliError::Solve(format!("{instance}: {e}")))?;
    let start = Instant::now();
    let result = pgd_solve(&prob, &x0, &cfg.solver)
        .map_err(|e| CliError::Solve(format!("{instance}: {e}")))?;
    let seconds = start.elapsed().as_secs_f64();

    if cfg.formats.contains(&Format::Jsonl) {
        write_log(&log_path(&cfg.output_dir, &instance), &result.log)?;
        let solution = Solution {
            instance: instance.clone(),
            status: result.status,
            x: result.y_final.iter().copied().collect(),
        };
        let path = solution_path(&cfg.output_dir, &instance);
        let text = serde_json::to_string(&solution).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&path, text)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    let cpu_time = if result.status == SolveStatus::TimeLimit {
        CpuTime::Capped
    } else {
        CpuTime::Seconds(seconds)
    };
    let row = SummaryRow {
        instance,
        solver: SOLVER_NAME.into(),
        function_value: result.f_final,
        iterations: result.iterations(),
        function_evaluations: result.function_evaluations,
        stationarity: result.stationarity,
        feasibility: result.feasibility,
        cpu_time,
    };
    Ok(CellOutcome {
        cell,
        status: result.status,
        row,
        log: result.log,
        y_final: result.y_final,
    })
}

pub fn write_log(path: &Path, log: &[IterateLog]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for entry in log {
        let line = serde_json::to_string(entry).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_log(path: &Path) -> Result<Vec<IterateLog>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    text.lines()
        .map(|l| {
            serde_json::from_str(l).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        })
        .collect()
}
