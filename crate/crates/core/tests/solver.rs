use fbse::problems::{benchmark_options, gen_sdp_affine, gen_sdp_sphere, toy_problem};
use fbse::solver::{
    inexact_gradient, pgd_solve, stationarity_measure, BbVariant, SolveStatus, SolverOptions,
};
use fbse::FbseProblem;
use nalgebra::DVector;

/// Iterates `x_k` recovered by replaying the deterministic run with
/// `max_iter = k`.
fn iterates(prob: &FbseProblem, x0: &DVector<f64>, opts: &SolverOptions) -> Vec<DVector<f64>> {
    let total = pgd_solve(prob, x0, opts).unwrap().iterations();
    (0..=total)
        .map(|k| {
            let mut o = opts.clone();
            o.max_iter = k;
            pgd_solve(prob, x0, &o).unwrap().x_final
        })
        .collect()
}

#[test]
fn iterates_stay_feasible_and_steps_stay_tangent() {
    let (inst, prob) = gen_sdp_sphere(4, 1.0, 1e6, 1).unwrap();
    let (ainst, aprob) = gen_sdp_affine(4, 2, 1.0, 1e6, 1).unwrap();
    let toy = toy_problem(&DVector::from_vec(vec![2.0, 0.0])).unwrap();
    let cases = [
        (prob, inst.x0.clone()),
        (aprob, ainst.x0.clone()),
        (toy, DVector::from_vec(vec![0.6, 0.8])),
    ];
    for (prob, x0) in cases {
        let mut opts = benchmark_options(prob.config.mu, 1e-5);
        opts.max_iter = 60;
        for x in iterates(&prob, &x0, &opts) {
            assert!(prob.constraint.evaluate_c(&x).unwrap().norm() <= 1e-10);
            let g = inexact_gradient(&prob.with_mu(opts.mu).unwrap(), &x).unwrap();
            let jac = prob.constraint.evaluate_jacobian(&x).unwrap();
            assert!(jac.tr_mul(&g).norm() <= 1e-10 * (1.0 + g.norm()));
        }
    }
}

#[test]
fn nonmonotone_window_bounds_every_accepted_value() {
    let (inst, prob) = gen_sdp_sphere(8, 1.0, 1e6, 2).unwrap();
    let opts = benchmark_options(prob.config.mu, 1e-5);
    let out = pgd_solve(&prob, &inst.x0, &opts).unwrap();
    let w = opts.nonmonotone_window;
    for k in 1..out.log.len() {
        let reference = out.log[k.saturating_sub(w)..k]
            .iter()
            .map(|e| e.psi)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(out.log[k].psi <= reference);
    }
}

#[test]
fn converged_runs_satisfy_the_result_contract() {
    let (inst, prob) = gen_sdp_sphere(10, 1.0, 1e6, 0).unwrap();
    let opts = SolverOptions::for_mu(prob.config.mu);
    let out = pgd_solve(&prob, &inst.x0, &opts).unwrap();
    assert_eq!(out.status, SolveStatus::Converged);
    assert!(prob.set.distance(&out.y_final).unwrap() <= 1e-10);
    assert!(stationarity_measure(&prob, &out.y_final).unwrap() <= opts.tol_stationarity);
    assert!(out.feasibility <= 1e-8);
    assert!(
        (20..=500).contains(&out.iterations()),
        "{}",
        out.iterations()
    );
}

#[test]
fn tighter_tolerance_shrinks_both_measures() {
    let (inst, prob) = gen_sdp_affine(10, 3, 1.0, 1e6, 0).unwrap();
    let loose = pgd_solve(&prob, &inst.x0, &benchmark_options(prob.config.mu, 1e-4)).unwrap();
    let tight = pgd_solve(&prob, &inst.x0, &benchmark_options(prob.config.mu, 1e-6)).unwrap();
    assert_eq!(tight.status, SolveStatus::Converged);
    assert!(
        loose.stationarity >= 10.0 * tight.stationarity,
        "{} {}",
        loose.stationarity,
        tight.stationarity
    );
    assert!(
        loose.feasibility >= 10.0 * tight.feasibility,
        "{} {}",
        loose.feasibility,
        tight.feasibility
    );
}

#[test]
fn every_bb_variant_converges_on_the_toy() {
    let prob = toy_problem(&DVector::from_vec(vec![2.0, 0.0])).unwrap();
    for v in [BbVariant::Bb1, BbVariant::Bb2, BbVariant::Alternating] {
        let mut opts = SolverOptions::for_mu(prob.config.mu);
        opts.bb_variant = v;
        let out = pgd_solve(&prob, &DVector::from_vec(vec![0.0, 1.0]), &opts).unwrap();
        assert_eq!(out.status, SolveStatus::Converged, "{v:?}");
    }
}

#[test]
fn time_limit_is_reported() {
    let (inst, prob) = gen_sdp_sphere(10, 1.0, 1e6, 0).unwrap();
    let mut opts = SolverOptions::for_mu(prob.config.mu);
    opts.max_time = 1e-9;
    opts.tol_residual = 0.0;
    opts.tol_stationarity = 0.0;
    let out = pgd_solve(&prob, &inst.x0, &opts).unwrap();
    assert_eq!(out.status, SolveStatus::TimeLimit);
}

#[test]
fn stationary_points_are_fixed_by_the_forward_backward_map() {
    let (inst, prob) = gen_sdp_sphere(6, 1.0, 1e6, 3).unwrap();
    let out = pgd_solve(&prob, &inst.x0, &benchmark_options(prob.config.mu, 1e-9)).unwrap();
    assert_eq!(out.status, SolveStatus::Converged);
    let x = &out.x_final;
    let t = prob.forward_backward_step(x).unwrap();
    assert!((&t - x).norm() <= 1e-6, "{}", (&t - x).norm());

    let toy = toy_problem(&DVector::from_vec(vec![2.0, 0.0])).unwrap();
    let e1 = DVector::from_vec(vec![1.0, 0.0]);
    assert!((toy.forward_backward_step(&e1).unwrap() - &e1).norm() <= 1e-14);
}
