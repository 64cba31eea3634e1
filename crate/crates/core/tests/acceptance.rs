//! Acceptance criteria, one line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use fbse::checks::{
    complexity_decay, descent_ledger, grad_psi_fd, invariant_suite, log_difference,
    objective_gradient_fd, CheckReport, Family, SuiteOptions,
};
use fbse::problems::{
    benchmark_options, gen_sdp_affine, gen_sdp_sphere, toy_problem, toy_solution, BENCH_TOL,
    DEFAULT_CAP, DEFAULT_NU, TOY_MU,
};
use fbse::random;
use fbse::solver::{
    feasibility_measure, pgd_solve, stationarity_measure, SolveResult, SolveStatus, SolverOptions,
};
use fbse::FbseProblem;
use nalgebra::DVector;
use rand::Rng;

const SEEDS: [u64; 3] = [0, 1, 2];
const SPHERE_SIZES: [usize; 4] = [10, 20, 30, 50];
const AFFINE_SIZES: [(usize, usize); 3] = [(10, 3), (20, 5), (30, 5)];

struct Outcome {
    id: usize,
    title: &'static str,
    passed: bool,
    detail: String,
}

struct Run {
    name: String,
    opts: SolverOptions,
    result: SolveResult,
    seconds: f64,
}

fn timed_solve(name: String, prob: &FbseProblem, x0: &DVector<f64>, opts: SolverOptions) -> Run {
    let start = Instant::now();
    let result = pgd_solve(prob, x0, &opts).expect("solve runs");
    Run {
        name,
        opts,
        result,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn failures(reports: &[CheckReport]) -> Vec<String> {
    reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.to_string())
        .collect()
}

fn invariant_suites() -> Outcome {
    let start = Instant::now();
    let opts = SuiteOptions::default();
    let mut reports = Vec::new();
    for family in Family::ALL {
        reports.extend(invariant_suite(family, &opts).expect("suite runs"));
    }
    let seconds = start.elapsed().as_secs_f64();
    let bad = failures(&reports);
    let worst = reports
        .iter()
        .filter(|r| r.bound == fbse::checks::Bound::Upper)
        .map(|r| r.worst)
        .fold(0.0, f64::max);
    Outcome {
        id: 1,
        title: "invariant suites, 1000 samples per check per family",
        passed: bad.is_empty() && seconds <= 60.0,
        detail: format!(
            "{} checks, worst upper-bounded violation {worst:.2e}, {seconds:.2} s{}",
            reports.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; failing: {}", bad.join(" | "))
            }
        ),
    }
}

fn gradient_fidelity() -> Outcome {
    let opts = SuiteOptions::default();
    let mut reports = Vec::new();
    for family in Family::ALL {
        reports.push(grad_psi_fd(family, 20, &opts).expect("fd runs"));
        reports.push(objective_gradient_fd(family, 20, &opts).expect("fd runs"));
    }
    let bad = failures(&reports);
    let summary: Vec<String> = reports
        .iter()
        .map(|r| format!("{} {:.1e}", r.name, r.worst))
        .collect();
    Outcome {
        id: 2,
        title: "gradient fidelity against central differences",
        passed: bad.is_empty(),
        detail: summary.join(", "),
    }
}

fn exactness_transfer() -> Outcome {
    let mut cases: Vec<(String, FbseProblem, DVector<f64>)> = Vec::new();
    let a = DVector::from_vec(vec![2.0, 0.0]);
    cases.push((
        "toy".into(),
        toy_problem(&a).unwrap(),
        DVector::from_vec(vec![0.6, 0.8]),
    ));
    for seed in SEEDS {
        let (inst, prob) = gen_sdp_sphere(10, DEFAULT_NU, DEFAULT_CAP, seed).unwrap();
        cases.push((
            format!("sdp_sphere n=10 seed={seed}"),
            prob,
            inst.x0.clone(),
        ));
    }
    let mut passed = true;
    let mut notes = Vec::new();
    for (name, prob, x0) in cases {
        let mut opts = benchmark_options(prob.config.mu, BENCH_TOL);
        opts.tol_residual = 1e-8;
        let out = pgd_solve(&prob, &x0, &opts).unwrap();
        let residual = out.log.last().map_or(f64::INFINITY, |l| l.residual);
        let t = prob.forward_backward_step(&out.x_final).unwrap();
        let stat = stationarity_measure(&prob, &t).unwrap();
        let feas = feasibility_measure(&prob, &t).unwrap();
        let ok = residual <= 1e-8 && stat <= 1e-5 && feas <= 1e-8;
        passed &= ok;
        notes.push(format!(
            "{name}: residual {residual:.1e} stationarity {stat:.1e} feasibility {feas:.1e}"
        ));
    }
    Outcome {
        id: 3,
        title: "small residual implies stationarity and feasibility at T",
        passed,
        detail: notes.join("; "),
    }
}

fn toy_end_to_end() -> Outcome {
    let a = DVector::from_vec(vec![2.0, 0.0]);
    let prob = toy_problem(&a).unwrap();
    let target = toy_solution(&a);
    let opts = benchmark_options(TOY_MU, BENCH_TOL);
    let mut rng = random::stream(0, "acceptance/toy-starts");
    let start = Instant::now();
    let mut worst_err: f64 = 0.0;
    let mut worst_iter = 0;
    let mut all_converged = true;
    for _ in 0..10 {
        let angle = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
        let x0 = DVector::from_vec(vec![angle.cos(), angle.sin()]);
        let out = pgd_solve(&prob, &x0, &opts).unwrap();
        all_converged &= out.status == SolveStatus::Converged;
        worst_err = worst_err.max((&out.y_final - &target).norm());
        worst_iter = worst_iter.max(out.iterations());
    }
    let seconds = start.elapsed().as_secs_f64();
    Outcome {
        id: 4,
        title: "toy problem from 10 starts",
        passed: all_converged && worst_err <= 1e-6 && worst_iter <= 1000 && seconds <= 5.0,
        detail: format!(
            "max error {worst_err:.1e}, max iterations {worst_iter}, total {seconds:.3} s"
        ),
    }
}

fn sphere_runs() -> Vec<Run> {
    let mut runs = Vec::new();
    for n in SPHERE_SIZES {
        for seed in SEEDS {
            let (inst, prob) = gen_sdp_sphere(n, DEFAULT_NU, DEFAULT_CAP, seed).unwrap();
            let opts = benchmark_options(prob.config.mu, BENCH_TOL);
            runs.push(timed_solve(
                format!("sdp_sphere n={n} seed={seed}"),
                &prob,
                &inst.x0,
                opts,
            ));
        }
    }
    runs
}

fn affine_runs() -> Vec<Run> {
    let mut runs = Vec::new();
    for (n, m) in AFFINE_SIZES {
        for seed in SEEDS {
            let (inst, prob) = gen_sdp_affine(n, m, DEFAULT_NU, DEFAULT_CAP, seed).unwrap();
            let opts = benchmark_options(prob.config.mu, BENCH_TOL);
            runs.push(timed_solve(
                format!("sdp_affine n={n} m={m} seed={seed}"),
                &prob,
                &inst.x0,
                opts,
            ));
        }
    }
    runs
}

fn band(
    id: usize,
    title: &'static str,
    runs: &[Run],
    feas_tol: f64,
    iters: (usize, usize),
    max_seconds: Option<f64>,
) -> Outcome {
    let mut bad = Vec::new();
    let (mut lo, mut hi, mut worst_feas, mut slowest) = (usize::MAX, 0, 0.0f64, 0.0f64);
    for run in runs {
        let r = &run.result;
        let k = r.iterations();
        lo = lo.min(k);
        hi = hi.max(k);
        worst_feas = worst_feas.max(r.feasibility);
        slowest = slowest.max(run.seconds);
        let ok = r.status == SolveStatus::Converged
            && r.feasibility <= feas_tol
            && (iters.0..=iters.1).contains(&k)
            && max_seconds.is_none_or(|s| run.seconds <= s);
        if !ok {
            bad.push(format!(
                "{} ({:?}, {k} it, feas {:.1e}, {:.2} s)",
                run.name, r.status, r.feasibility, run.seconds
            ));
        }
    }
    Outcome {
        id,
        title,
        passed: bad.is_empty(),
        detail: format!(
            "{} runs, iterations {lo}..{hi}, worst feasibility {worst_feas:.1e}, slowest {slowest:.2} s{}",
            runs.len(),
            if bad.is_empty() { String::new() } else { format!("; failing: {}", bad.join(", ")) }
        ),
    }
}

fn decay(runs: &[Run]) -> Outcome {
    let reports: Vec<CheckReport> = runs
        .iter()
        .map(|r| complexity_decay(&r.name, &r.result.log))
        .collect();
    let bad = failures(&reports).len();
    let worst = reports.iter().map(|r| r.worst).fold(0.0, f64::max);
    let best = reports
        .iter()
        .map(|r| r.worst)
        .fold(f64::INFINITY, f64::min);
    Outcome {
        id: 7,
        title: "best residual times sqrt(K) within 10x of its median",
        passed: bad == 0,
        detail: format!(
            "{bad} of {} runs exceed 10x; max/median ratio ranges {best:.1e}..{worst:.1e}",
            reports.len()
        ),
    }
}

fn ledger(runs: &[Run]) -> Outcome {
    let reports: Vec<CheckReport> = runs
        .iter()
        .map(|r| {
            descent_ledger(
                &r.name,
                &r.result.log,
                r.opts.nonmonotone_window,
                r.opts.ls_sufficient,
            )
            .unwrap()
        })
        .collect();
    let bad = failures(&reports);
    let steps: usize = reports.iter().map(|r| r.samples).sum();
    Outcome {
        id: 8,
        title: "nonmonotone acceptance inequality at every logged step",
        passed: bad.is_empty(),
        detail: format!(
            "{steps} steps over {} runs{}",
            reports.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; failing: {}", bad.join(" | "))
            }
        ),
    }
}

fn determinism() -> Outcome {
    let mut worst: f64 = 0.0;
    for _ in 0..2 {
        let (inst, prob) = gen_sdp_sphere(20, DEFAULT_NU, DEFAULT_CAP, 7).unwrap();
        let (inst2, prob2) = gen_sdp_sphere(20, DEFAULT_NU, DEFAULT_CAP, 7).unwrap();
        let opts = benchmark_options(prob.config.mu, BENCH_TOL);
        let a = pgd_solve(&prob, &inst.x0, &opts).unwrap();
        let b = pgd_solve(&prob2, &inst2.x0, &opts).unwrap();
        worst = worst.max(log_difference(&a.log, &b.log));
    }
    let (inst, prob) = gen_sdp_affine(10, 3, DEFAULT_NU, DEFAULT_CAP, 7).unwrap();
    let (inst2, prob2) = gen_sdp_affine(10, 3, DEFAULT_NU, DEFAULT_CAP, 7).unwrap();
    let opts = benchmark_options(prob.config.mu, BENCH_TOL);
    let a = pgd_solve(&prob, &inst.x0, &opts).unwrap();
    let b = pgd_solve(&prob2, &inst2.x0, &opts).unwrap();
    worst = worst.max(log_difference(&a.log, &b.log));
    Outcome {
        id: 9,
        title: "same seed reproduces every logged scalar",
        passed: worst <= 1e-12,
        detail: format!("largest relative difference {worst:.1e}"),
    }
}

fn main() -> ExitCode {
    let mut outcomes = vec![
        invariant_suites(),
        gradient_fidelity(),
        exactness_transfer(),
        toy_end_to_end(),
    ];
    let sphere = sphere_runs();
    let affine = affine_runs();
    outcomes.push(band(
        5,
        "sdp_sphere band",
        &sphere,
        1e-8,
        (20, 2000),
        Some(30.0),
    ));
    outcomes.push(band(6, "sdp_affine band", &affine, 1e-10, (50, 3000), None));
    let all: Vec<Run> = sphere.into_iter().chain(affine).collect();
    outcomes.push(decay(&all));
    outcomes.push(ledger(&all));
    outcomes.push(determinism());

    let mut failed = 0;
    for o in &outcomes {
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!o.passed);
        println!("criterion {} [{verdict}] {}: {}", o.id, o.title, o.detail);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        outcomes.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
