//! Projected inexact gradient descent on the envelope.
//!
//! Each iteration uses the tangent part of the forward-backward residual as
//! the search direction and retracts onto the constraint manifold:
//!
//! ```text
//! g_k     = (I - grad c grad c^+)(x_k - T(x_k)) / mu
//! x_{k+1} = Proj_M(x_k - eta_k g_k)
//! ```
//!
//! `eta_k` starts from a safeguarded Barzilai-Borwein ratio and is shrunk
//! until a nonmonotone (max over a trailing window) sufficient-decrease test
//! on `psi` passes. `H(x)` is never needed.

use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envelope::{EnvelopeEval, FbseProblem};
use crate::error::{FbseError, Result};
use crate::random;

/// Hard cap on step shrinkages per iteration.
pub const MAX_BACKTRACKS: usize = 30;

/// Separation of the point pairs behind the sampled Lipschitz ratios.
const LIPSCHITZ_PAIR_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BbVariant {
    Bb1,
    Bb2,
    /// BB1 on odd iterations, BB2 on even ones.
    Alternating,
}

/// Which tests end a run with `Converged`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopRule {
    /// Residual below `tol_residual` or stationarity below `tol_stationarity`.
    #[default]
    Either,
    /// Residual below `tol_residual`, with stationarity below
    /// `tol_stationarity` confirmed at the same iterate. The stationarity
    /// measure is then an output check rather than a stopping test.
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub mu: f64,
    pub eta_init: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    pub bb_variant: BbVariant,
    pub nonmonotone_window: usize,
    pub ls_shrink: f64,
    pub ls_sufficient: f64,
    pub max_iter: usize,
    /// Threshold on `||x - T(x)|| / mu`.
    pub tol_residual: f64,
    pub tol_stationarity: f64,
    #[serde(default)]
    pub stop_rule: StopRule,
    /// Wall-clock budget in seconds.
    pub max_time: f64,
    /// Seed recorded with the run; the iteration itself is deterministic.
    pub rng_seed: u64,
}

impl SolverOptions {
    /// Defaults scaled to the envelope parameter `mu`.
    pub fn for_mu(mu: f64) -> Self {
        let tol_stationarity = 1e-5;
        Self {
            mu,
            eta_init: mu,
            eta_min: 1e-10,
            eta_max: 1e3 * mu,
            bb_variant: BbVariant::Alternating,
            nonmonotone_window: 10,
            ls_shrink: 0.5,
            ls_sufficient: 1e-4,
            max_iter: 5000,
            tol_residual: tol_stationarity * mu,
            tol_stationarity,
            stop_rule: StopRule::Either,
            max_time: 300.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(FbseError::InvalidInput(m));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return err(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.eta_min > 0.0 && self.eta_min <= self.eta_init && self.eta_init <= self.eta_max) {
            return err(format!(
                "step bounds must satisfy 0 < eta_min <= eta_init <= eta_max, got {} / {} / {}",
                self.eta_min, self.eta_init, self.eta_max
            ));
        }
        if !(self.ls_shrink > 0.0 && self.ls_shrink < 1.0) {
            return err(format!(
                "ls_shrink must lie in (0, 1), got {}",
                self.ls_shrink
            ));
        }
        if self.ls_sufficient.is_nan() || self.ls_sufficient <= 0.0 {
            return err(format!(
                "ls_sufficient must be positive, got {}",
                self.ls_sufficient
            ));
        }
        if self.nonmonotone_window == 0 {
            return err("nonmonotone_window must be at least 1".into());
        }
        if self.tol_residual < 0.0 || self.tol_stationarity < 0.0 {
            return err("tolerances must be nonnegative".into());
        }
        if self.max_time.is_nan() || self.max_time <= 0.0 {
            return err(format!("max_time must be positive, got {}", self.max_time));
        }
        Ok(())
    }
}

/// One logged iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateLog {
    pub k: usize,
    pub psi: f64,
    pub f: f64,
    /// Step length that produced this iterate (0 for the start point).
    pub eta: f64,
    /// `||x_k - T(x_k)|| / mu`.
    pub residual: f64,
    pub stationarity: f64,
    pub feasibility: f64,
    /// Norm of the search direction `g_k` at this iterate.
    #[serde(default)]
    pub grad_norm: f64,
    pub ls_backtracks: usize,
    /// Seconds since the solve started.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    TimeLimit,
    LicqFailure,
    LineSearchFailure,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x_final: DVector<f64>,
    /// `Proj_X(x_final)`, the reported solution.
    pub y_final: DVector<f64>,
    pub status: SolveStatus,
    pub log: Vec<IterateLog>,
    /// Number of envelope (`T`, `psi`) evaluations.
    pub function_evaluations: usize,
    /// Objective at `y_final`.
    pub f_final: f64,
    pub stationarity: f64,
    pub feasibility: f64,
    /// Name of the stationarity measure, recorded for reports.
    pub stationarity_measure: &'static str,
}

impl SolveResult {
    pub fn iterations(&self) -> usize {
        self.log.last().map_or(0, |l| l.k)
    }
}

pub const STATIONARITY_MEASURE: &str = "projected-residual-min-multiplier";

/// Tangent component of the forward-backward residual, scaled by `1/mu`.
pub fn inexact_gradient(prob: &FbseProblem, x: &DVector<f64>) -> Result<DVector<f64>> {
    let t = prob.forward_backward_step(x)?;
    inexact_gradient_from(prob, x, &t)
}

fn inexact_gradient_from(
    prob: &FbseProblem,
    x: &DVector<f64>,
    t: &DVector<f64>,
) -> Result<DVector<f64>> {
    let r = (x - t) / prob.config.mu;
    prob.constraint.tangent_project(x, &r)
}

/// Safeguarded Barzilai-Borwein step.
///
/// `s` is the iterate difference and `y_diff` the gradient difference.
/// Falls back to `fallback` on vanishing or negative curvature.
pub fn bb_stepsize(
    s: &DVector<f64>,
    y_diff: &DVector<f64>,
    variant: BbVariant,
    bounds: (f64, f64),
    fallback: f64,
) -> f64 {
    let variant = match variant {
        BbVariant::Alternating => BbVariant::Bb1,
        v => v,
    };
    let sy = s.dot(y_diff);
    let (num, den) = match variant {
        BbVariant::Bb1 => (s.norm_squared(), sy),
        _ => (sy, y_diff.norm_squared()),
    };
    let scale = s.norm() * y_diff.norm();
    if sy <= 0.0 || den <= 1e-16 * scale || !num.is_finite() || !den.is_finite() {
        return fallback.clamp(bounds.0, bounds.1);
    }
    let ratio = num / den;
    if ratio.is_nan() || ratio <= 0.0 {
        return fallback.clamp(bounds.0, bounds.1);
    }
    ratio.clamp(bounds.0, bounds.1)
}

/// Fixed-point residual `||y - Proj_X(y - r)||` at `y = Proj_X(x)` with
/// `r = grad f(y) + grad c(y) lambda`.
///
/// Two multipliers are tried, the plain least-squares one and the one from
/// the dissolving system `(grad c^T Q grad c + tau I) lambda = -grad c^T Q
/// grad f`, and the smaller residual is returned. The second choice is exact
/// at stationary points even when the normal-cone component of the gradient
/// is not orthogonal to `range(grad c)`, which the first one is not.
pub fn stationarity_measure(prob: &FbseProblem, x: &DVector<f64>) -> Result<f64> {
    let y = prob.set.project(x)?;
    let grad = prob.objective.gradient(&y);
    let residual =
        |r: &DVector<f64>| -> Result<f64> { Ok((&y - prob.set.project(&(&y - r))?).norm()) };
    if prob.constraint.num_constraints() == 0 {
        return residual(&grad);
    }
    let least_squares = match prob.constraint.jacobian_qr(&y) {
        Ok(qr) => Some(residual(&qr.project_out(&grad))?),
        Err(FbseError::RankDeficient { .. }) => None,
        Err(e) => return Err(e),
    };
    let dissolving = match prob.system(&y) {
        Ok(sys) => Some(residual(&sys.j_apply(&grad))?),
        Err(e) if least_squares.is_none() => return Err(e),
        Err(_) => None,
    };
    Ok(least_squares
        .into_iter()
        .chain(dissolving)
        .fold(f64::INFINITY, f64::min))
}

/// `||c(Proj_X(x))||`.
pub fn feasibility_measure(prob: &FbseProblem, x: &DVector<f64>) -> Result<f64> {
    let y = prob.set.project(x)?;
    Ok(prob.constraint.evaluate_c(&y)?.norm())
}

struct Iterate {
    x: DVector<f64>,
    eval: EnvelopeEval,
    g: DVector<f64>,
}

/// Run projected inexact gradient descent from `x0`.
pub fn pgd_solve(
    prob: &FbseProblem,
    x0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    let prob = prob.with_mu(opts.mu)?;
    let prob = &prob;
    let start = Instant::now();
    let mu = opts.mu;

    let x = prob.constraint.project_to_manifold(x0)?;
    let mut evals = 1usize;
    let eval = prob.evaluate(&x)?;
    let g = match inexact_gradient_from(prob, &x, &eval.t) {
        Ok(g) => g,
        Err(FbseError::RankDeficient { .. }) => {
            return finish(prob, x, SolveStatus::LicqFailure, Vec::new(), evals);
        }
        Err(e) => return Err(e),
    };
    let mut cur = Iterate { x, eval, g };
    let mut history: VecDeque<f64> = VecDeque::with_capacity(opts.nonmonotone_window);
    let mut log: Vec<IterateLog> = Vec::new();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut eta_used = 0.0;
    let mut backtracks_used = 0usize;
    let mut k = 0usize;

    loop {
        let residual = (&cur.x - &cur.eval.t).norm() / mu;
        let stationarity = stationarity_measure(prob, &cur.x)?;
        let feasibility = feasibility_measure(prob, &cur.x)?;
        log.push(IterateLog {
            k,
            psi: cur.eval.psi,
            f: cur.eval.f,
            eta: eta_used,
            residual,
            stationarity,
            feasibility,
            grad_norm: cur.g.norm(),
            ls_backtracks: backtracks_used,
            wall_time: start.elapsed().as_secs_f64(),
        });
        if best.as_ref().is_none_or(|(s, _)| stationarity < *s) {
            best = Some((stationarity, cur.x.clone()));
        }
        if history.len() == opts.nonmonotone_window {
            history.pop_front();
        }
        history.push_back(cur.eval.psi);

        let done = match opts.stop_rule {
            StopRule::Either => {
                residual <= opts.tol_residual || stationarity <= opts.tol_stationarity
            }
            StopRule::Residual => {
                residual <= opts.tol_residual && stationarity <= opts.tol_stationarity
            }
        };
        if done {
            return finish(prob, cur.x, SolveStatus::Converged, log, evals);
        }
        if k >= opts.max_iter {
            return finish(prob, cur.x, SolveStatus::MaxIter, log, evals);
        }
        if start.elapsed().as_secs_f64() > opts.max_time {
            return finish(prob, cur.x, SolveStatus::TimeLimit, log, evals);
        }

        let bounds = (opts.eta_min, opts.eta_max);
        let mut eta = match &prev {
            None => opts.eta_init,
            Some((s, yd)) => {
                let variant = match opts.bb_variant {
                    BbVariant::Alternating if k.is_multiple_of(2) => BbVariant::Bb2,
                    BbVariant::Alternating => BbVariant::Bb1,
                    v => v,
                };
                bb_stepsize(s, yd, variant, bounds, eta_used)
            }
        };
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gnorm2 = cur.g.norm_squared();
        let mut backtracks = 0usize;
        let accepted = loop {
            let trial = prob
                .constraint
                .project_to_manifold(&(&cur.x - &cur.g * eta));
            let candidate = match trial {
                Ok(xt) => {
                    evals += 1;
                    let ev = prob.evaluate(&xt)?;
                    if ev.psi.is_finite() && ev.psi <= reference - opts.ls_sufficient * eta * gnorm2
                    {
                        Some((xt, ev))
                    } else {
                        None
                    }
                }
                Err(FbseError::RestorationFailure { .. }) | Err(FbseError::ZeroPoint) => None,
                Err(e) => return Err(e),
            };
            if let Some(found) = candidate {
                break Some(found);
            }
            if backtracks >= MAX_BACKTRACKS || eta <= opts.eta_min {
                break None;
            }
            backtracks += 1;
            eta = (eta * opts.ls_shrink).max(opts.eta_min);
        };
        let Some((x_new, eval_new)) = accepted else {
            let x_best = best.map(|(_, x)| x).unwrap_or(cur.x);
            return finish(prob, x_best, SolveStatus::LineSearchFailure, log, evals);
        };
        let g_new = match inexact_gradient_from(prob, &x_new, &eval_new.t) {
            Ok(g) => g,
            Err(FbseError::RankDeficient { .. }) => {
                return finish(prob, x_new, SolveStatus::LicqFailure, log, evals);
            }
            Err(e) => return Err(e),
        };
        prev = Some((&x_new - &cur.x, &g_new - &cur.g));
        cur = Iterate {
            x: x_new,
            eval: eval_new,
            g: g_new,
        };
        eta_used = eta;
        backtracks_used = backtracks;
        k += 1;
    }
}

fn finish(
    prob: &FbseProblem,
    x_final: DVector<f64>,
    status: SolveStatus,
    log: Vec<IterateLog>,
    function_evaluations: usize,
) -> Result<SolveResult> {
    let y_final = prob.set.project(&x_final)?;
    let f_final = prob.objective.value(&y_final);
    let stationarity = stationarity_measure(prob, &x_final)?;
    let feasibility = feasibility_measure(prob, &x_final)?;
    Ok(SolveResult {
        x_final,
        y_final,
        status,
        log,
        function_evaluations,
        f_final,
        stationarity,
        feasibility,
        stationarity_measure: STATIONARITY_MEASURE,
    })
}

/// Empirical problem constants and the resulting step-size bound estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuMaxEstimate {
    pub m_f: f64,
    pub l_f: f64,
    pub m_c: f64,
    pub l_c: f64,
    pub m_q: f64,
    pub l_q: f64,
    pub l_d: f64,
    pub sigma_c: f64,
    pub sigma_q: f64,
    pub sigma_res: f64,
    pub m_j: f64,
    pub m_h: f64,
    pub l_h: f64,
    pub f_range: f64,
    pub rho: f64,
    /// The five candidate bounds whose minimum is `mu_max`.
    pub terms: [f64; 5],
    pub mu_max: f64,
}

/// Monte Carlo estimate of the envelope parameter bound.
///
/// Samples points within distance one of `X` (around a bounded region of the
/// set), forms max / ratio statistics for the constants and evaluates the
/// bound on them. The result is advisory: sampled suprema underestimate the
/// true constants.
pub fn estimate_mu_max(prob: &FbseProblem, samples: usize, rng_seed: u64) -> Result<MuMaxEstimate> {
    if samples < 100 {
        return Err(FbseError::InvalidInput(format!(
            "at least 100 samples required, got {samples}"
        )));
    }
    let n = prob.dim();
    let mut rng = random::stream(rng_seed, "mu-max");
    let mut points = Vec::with_capacity(samples);
    let mut feasible = Vec::new();
    for _ in 0..samples {
        // anchor near X ∩ M so unbounded sets still give a bounded sample
        let g = random::normal_vector(&mut rng, n);
        let anchor = match prob.constraint.project_to_manifold(&g) {
            Ok(m) => m,
            Err(_) => g,
        };
        let base = prob.set.project(&anchor)?;
        if let Ok(y) = prob.constraint.project_to_manifold(&base) {
            if prob.set.distance(&y)? <= 1e-8 {
                feasible.push(y);
            }
        }
        let dir = random::normal_vector(&mut rng, n);
        // half the samples sit on the outer shell, where the sup-type constants peak
        let radius: f64 = if rng.random_bool(0.5) {
            1.0
        } else {
            rng.random::<f64>()
        };
        points.push(&base + dir.normalize() * radius);
    }
    let op_norm = |q: &crate::projective::ProjectiveOperator,
                   other: Option<&crate::projective::ProjectiveOperator>,
                   rng: &mut rand_chacha::ChaCha20Rng|
     -> Result<f64> {
        let mut v = random::normal_vector(rng, n).normalize();
        let mut est = 0.0;
        for _ in 0..30 {
            let mut w = q.apply(&v)?;
            if let Some(o) = other {
                w -= o.apply(&v)?;
            }
            est = w.norm();
            if est == 0.0 {
                break;
            }
            v = w / est;
        }
        Ok(est)
    };

    let mut m_f: f64 = 0.0;
    let mut l_f: f64 = 0.0;
    let mut m_c: f64 = 0.0;
    let mut l_c: f64 = 0.0;
    let mut m_q: f64 = 0.0;
    let mut l_q: f64 = 0.0;
    let mut l_d: f64 = 0.0;
    let mut m_j: f64 = 0.0;
    let mut m_h: f64 = 0.0;
    let mut l_h: f64 = 0.0;
    let mut f_lo = f64::INFINITY;
    let mut f_hi = f64::NEG_INFINITY;
    let probe = random::normal_vector(&mut rng, n).normalize();
    let stats_at = |x: &DVector<f64>| -> Result<PointStats> {
        let jac = prob.constraint.evaluate_jacobian(x)?;
        let q = prob.projective_at(x)?;
        let gram = jac.tr_mul(&q.apply_columns(&jac)?);
        Ok(PointStats {
            x: x.clone(),
            grad: prob.objective.gradient(x),
            jac,
            q,
            gram,
            hv: prob.h_apply(x, &probe)?,
        })
    };
    for x in &points {
        let f = prob.objective.value(x);
        f_lo = f_lo.min(f);
        f_hi = f_hi.max(f);
        let here = stats_at(x)?;
        m_f = m_f.max(here.grad.norm());
        m_c = m_c.max(if here.jac.ncols() > 0 {
            here.jac.singular_values().max()
        } else {
            0.0
        });
        m_q = m_q.max(op_norm(&here.q, None, &mut rng)?);
        m_j = m_j.max(prob.system(x)?.j_apply(&probe).norm());
        m_h = m_h.max(here.hv.norm());
        // Lipschitz ratios from a short random pair
        let step = random::normal_vector(&mut rng, n).normalize() * LIPSCHITZ_PAIR_STEP;
        let there = stats_at(&(x + &step))?;
        let dx = (&there.x - &here.x).norm();
        l_f = l_f.max((&there.grad - &here.grad).norm() / dx);
        l_c = l_c.max((&there.jac - &here.jac).norm() / dx);
        l_q = l_q.max(op_norm(&there.q, Some(&here.q), &mut rng)? / dx);
        l_d = l_d.max((&there.gram - &here.gram).norm() / dx);
        l_h = l_h.max((&there.hv - &here.hv).norm() / dx);
    }

    let mut sigma_c = f64::INFINITY;
    let mut sigma_q = f64::INFINITY;
    for y in &feasible {
        let jac = prob.constraint.evaluate_jacobian(y)?;
        if jac.ncols() == 0 {
            continue;
        }
        sigma_c = sigma_c.min(jac.singular_values().min());
        let q = prob.projective_at(y)?;
        let gram = jac.tr_mul(&q.apply_columns(&jac)?);
        sigma_q = sigma_q.min(gram.symmetric_eigenvalues().min());
    }
    let threshold = if l_d > 0.0 {
        sigma_q / (2.0 * l_d)
    } else {
        f64::INFINITY
    };
    // the infimum over {dist(x, M) >= t} sits on the level dist = t, so each
    // sample is moved along its own normal direction to that level
    let mut sigma_res = f64::INFINITY;
    if threshold.is_finite() {
        for x in &points {
            let Ok(y) = prob.constraint.project_to_manifold(x) else {
                continue;
            };
            let away = x - &y;
            let len = away.norm();
            if len == 0.0 {
                continue;
            }
            let z = &y + away * (threshold / len);
            if prob.set.distance(&z)? <= 1.0 {
                sigma_res = sigma_res.min(prob.constraint.evaluate_c(&z)?.norm());
            }
        }
    }
    let rho_tilde = 1.0_f64.min(sigma_res * sigma_res);
    let l_tau = prob.config.l_tau;
    let rho = rho_tilde
        .min(sigma_q * l_q * m_j / (m_q * l_tau))
        .min(sigma_q / (8.0 * m_c * m_c * l_q))
        .min(sigma_c / (8.0 * l_c));
    let f_range = f_hi - f_lo;
    let terms = [
        rho / (64.0 * (m_j * m_f + 1.0)),
        sigma_q
            / (16.0 * m_c * m_c * l_q * m_j * m_f + (16.0 * m_c * m_c * m_q + 4.0 * sigma_q) * m_h),
        1.0 / (4.0 * l_h + 12.0 * m_h + 4.0 * l_f),
        rho * rho / (16.0 * f_range),
        sigma_c / (6.0 * (m_j + 1.0) * m_f * l_c),
    ];
    let mu_max = terms
        .iter()
        .copied()
        .map(|t| if t.is_nan() { f64::INFINITY } else { t })
        .fold(f64::INFINITY, f64::min);
    Ok(MuMaxEstimate {
        m_f,
        l_f,
        m_c,
        l_c,
        m_q,
        l_q,
        l_d,
        sigma_c,
        sigma_q,
        sigma_res,
        m_j,
        m_h,
        l_h,
        f_range,
        rho,
        terms,
        mu_max,
    })
}

struct PointStats {
    x: DVector<f64>,
    grad: DVector<f64>,
    jac: nalgebra::DMatrix<f64>,
    q: crate::projective::ProjectiveOperator,
    gram: nalgebra::DMatrix<f64>,
    hv: DVector<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{EnvelopeConfig, Objective};
    use crate::manifold::ConstraintMap;
    use crate::problems::toy_problem;
    use crate::projective::ProjectiveOperator;
    use crate::sets::ConvexSet;
    use nalgebra::DMatrix;
    use std::sync::Arc;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn bb_examples() {
        let bounds = (1e-10, 1e3);
        let s = dv(&[1.0, -2.0, 0.5]);
        for v in [BbVariant::Bb1, BbVariant::Bb2] {
            assert!((bb_stepsize(&s, &s, v, bounds, 0.3) - 1.0).abs() < 1e-15);
            assert!((bb_stepsize(&(&s * 2.0), &s, v, bounds, 0.3) - 2.0).abs() < 1e-15);
            assert_eq!(bb_stepsize(&s, &(-&s), v, bounds, 0.3), 0.3);
            assert_eq!(bb_stepsize(&s, &dv(&[2.0, 1.0, 0.0]), v, bounds, 0.3), 0.3);
        }
        assert_eq!(
            bb_stepsize(&(&s * 1e6), &s, BbVariant::Bb1, (1e-3, 10.0), 0.3),
            10.0
        );
    }

    #[test]
    fn stationarity_at_toy_solution() {
        let prob = toy_problem(&dv(&[2.0, 0.0])).unwrap();
        assert!(stationarity_measure(&prob, &dv(&[1.0, 0.0])).unwrap() <= 1e-12);
        assert!(stationarity_measure(&prob, &dv(&[0.6, 0.8])).unwrap() > 1e-3);
    }

    struct Linear(DVector<f64>);

    impl Objective for Linear {
        fn value(&self, x: &DVector<f64>) -> f64 {
            self.0.dot(x)
        }
        fn gradient(&self, _x: &DVector<f64>) -> DVector<f64> {
            self.0.clone()
        }
        fn hessian_vector(&self, _x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
            Some(v * 0.0)
        }
    }

    #[test]
    fn stationarity_reduces_to_gradient_norm_without_constraints() {
        let prob = FbseProblem::new(
            Arc::new(Linear(dv(&[0.3, -0.4]))),
            ConvexSet::ball(2, 10.0).unwrap(),
            ConstraintMap::unconstrained(2),
            EnvelopeConfig::default(),
        )
        .unwrap();
        let s = stationarity_measure(&prob, &dv(&[1.0, 1.0])).unwrap();
        assert!((s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn feasibility_examples() {
        let prob = toy_problem(&dv(&[2.0, 0.0])).unwrap();
        assert!((feasibility_measure(&prob, &dv(&[2.0, 0.0])).unwrap() - 3.0).abs() < 1e-15);
        // Proj_X(-1, 0) = (0, 0) and c(0) = -1
        assert!((feasibility_measure(&prob, &dv(&[-1.0, 0.0])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(feasibility_measure(&prob, &dv(&[0.6, 0.8])).unwrap(), 0.0);
    }

    #[test]
    fn toy_solve_logs_tangent_steps_on_the_sphere() {
        let prob = toy_problem(&dv(&[2.0, 0.0])).unwrap();
        let out = pgd_solve(&prob, &dv(&[0.6, 0.8]), &SolverOptions::for_mu(0.1)).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert!(out.stationarity <= 1e-5);
        for (i, e) in out.log.iter().enumerate() {
            assert_eq!(e.k, i);
            assert!(e.residual >= 0.0);
        }
        assert!((out.x_final.norm() - 1.0).abs() <= 1e-10);
        assert!(out.y_final.iter().all(|&t| t >= 0.0));
    }

    #[test]
    fn start_at_solution_stops_immediately() {
        let prob = toy_problem(&dv(&[2.0, 0.0])).unwrap();
        let out = pgd_solve(&prob, &dv(&[1.0, 0.0]), &SolverOptions::for_mu(0.1)).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert!(out.iterations() <= 1);
    }

    #[test]
    fn residual_rule_requires_both_tests() {
        let prob = toy_problem(&dv(&[2.0, 0.0])).unwrap();
        let mut opts = SolverOptions::for_mu(0.1);
        opts.stop_rule = StopRule::Residual;
        opts.tol_residual = 1e-9;
        let out = pgd_solve(&prob, &dv(&[0.6, 0.8]), &opts).unwrap();
        let last = out.log.last().unwrap();
        assert!(last.residual <= 1e-9 && last.stationarity <= opts.tol_stationarity);
    }

    #[test]
    fn max_iter_is_reported() {
        let (inst, prob) = crate::problems::gen_sdp_sphere(4, 1.0, 1e6, 0).unwrap();
        let mut opts = SolverOptions::for_mu(prob.config.mu);
        opts.max_iter = 2;
        opts.tol_residual = 0.0;
        opts.tol_stationarity = 0.0;
        let out = pgd_solve(&prob, &inst.x0, &opts).unwrap();
        assert_eq!(out.status, SolveStatus::MaxIter);
        assert_eq!(out.log.len(), 3);
    }

    #[test]
    fn options_are_validated() {
        let mut opts = SolverOptions::for_mu(0.1);
        opts.ls_shrink = 1.0;
        assert!(opts.validate().is_err());
        let mut opts = SolverOptions::for_mu(0.1);
        opts.eta_min = 1.0;
        assert!(opts.validate().is_err());
        assert!(SolverOptions::for_mu(-1.0).validate().is_err());
    }

    #[test]
    fn mu_max_is_deterministic_and_stable_on_the_toy() {
        let prob = toy_problem(&dv(&[2.0, 0.0])).unwrap();
        assert!(estimate_mu_max(&prob, 99, 0).is_err());
        let a = estimate_mu_max(&prob, 300, 4).unwrap();
        let b = estimate_mu_max(&prob, 300, 4).unwrap();
        assert_eq!(a, b);
        let values: Vec<f64> = (0..5)
            .map(|s| estimate_mu_max(&prob, 1000, s).unwrap().mu_max)
            .collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi.is_finite(), "{values:?}");
        assert!(hi <= 2.0 * lo, "{values:?}");
    }

    #[test]
    fn mu_max_with_constant_q_and_linear_f() {
        let factory: crate::envelope::ProjectiveFactory =
            Arc::new(|_x: &DVector<f64>| Ok(ProjectiveOperator::from_fn(3, |d| d.clone())));
        let prob = FbseProblem::new(
            Arc::new(Linear(dv(&[1.0, 2.0, 3.0]))),
            ConvexSet::ball(3, 2.0).unwrap(),
            ConstraintMap::affine(
                DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 1.0]),
                dv(&[1.0]),
            )
            .unwrap(),
            EnvelopeConfig::default(),
        )
        .unwrap()
        .with_projective(factory);
        let est = estimate_mu_max(&prob, 200, 0).unwrap();
        assert_eq!(est.l_f, 0.0);
        assert_eq!(est.l_q, 0.0);
        // With L_Q = 0 the collapse radius, and with it mu_max, is 0.
        assert_eq!(est.rho, 0.0);
        assert_eq!(est.mu_max, 0.0);
    }
}
