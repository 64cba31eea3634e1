//! Sampled invariant checks.
//!
//! Each check draws seeded points, measures a violation and compares the
//! worst value against a fixed bound. The suites back the test harness and
//! the `check` command of the CLI.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::envelope::{EnvelopeConfig, FbseProblem};
use crate::error::{FbseError, Result};
use crate::linalg::{reshape, vectorize};
use crate::manifold::ConstraintMap;
use crate::problems::{
    constraint_jacobian, gen_sdp_affine, gen_sdp_sphere, toy_problem, DEFAULT_CAP, DEFAULT_NU,
};
use crate::random;
use crate::sets::{ConvexSet, SetKind};
use crate::solver::IterateLog;

/// How a measured value is compared with its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    /// Pass when the worst value is at most the tolerance.
    Upper,
    /// Pass when the worst value is at least the tolerance.
    Lower,
    /// Pass when the worst value is finite.
    Finite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub samples: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl CheckReport {
    pub fn new(
        name: impl Into<String>,
        samples: usize,
        worst: f64,
        tolerance: f64,
        bound: Bound,
    ) -> Self {
        let passed = match bound {
            Bound::Upper => worst <= tolerance,
            Bound::Lower => worst >= tolerance,
            Bound::Finite => worst.is_finite(),
        };
        Self {
            name: name.into(),
            samples,
            worst,
            tolerance,
            bound,
            passed,
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let rule = match self.bound {
            Bound::Upper => format!("<= {:.1e}", self.tolerance),
            Bound::Lower => format!(">= {:.1e}", self.tolerance),
            Bound::Finite => "finite".to_string(),
        };
        write!(
            f,
            "[{verdict}] {}: worst {:.3e} ({rule}) over {} samples",
            self.name, self.worst, self.samples
        )
    }
}

/// Problem families covered by the sampled suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Toy,
    SdpSphere,
    SdpAffine,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Toy, Family::SdpSphere, Family::SdpAffine];

    pub fn name(self) -> &'static str {
        match self {
            Family::Toy => "toy",
            Family::SdpSphere => "sdp_sphere",
            Family::SdpAffine => "sdp_affine",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub samples: usize,
    pub seed: u64,
    /// Matrix side for the SDP families.
    pub side: usize,
    /// Number of linear constraints for the affine family.
    pub constraints: usize,
    pub nu: f64,
    pub cap: f64,
    /// Envelope parameters; `None` keeps the family default.
    pub envelope: Option<EnvelopeConfig>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 0,
            side: 6,
            constraints: 3,
            nu: DEFAULT_NU,
            cap: DEFAULT_CAP,
            envelope: None,
        }
    }
}

/// Seeded point generator for one family.
pub struct Sampler {
    family: Family,
    base: FbseProblem,
    /// Columns `vec(B_i)` for the affine family.
    affine_jac: Option<DMatrix<f64>>,
    side: usize,
    rng: ChaCha20Rng,
}

impl Sampler {
    pub fn new(family: Family, opts: &SuiteOptions, tag: &str) -> Result<Self> {
        let (mut base, affine_jac, side) = match family {
            Family::Toy => (toy_problem(&DVector::from_vec(vec![2.0, 0.0]))?, None, 0),
            Family::SdpSphere => {
                let (_, prob) = gen_sdp_sphere(opts.side, opts.nu, opts.cap, opts.seed)?;
                (prob, None, opts.side)
            }
            Family::SdpAffine => {
                let (inst, prob) =
                    gen_sdp_affine(opts.side, opts.constraints, opts.nu, opts.cap, opts.seed)?;
                (
                    prob,
                    Some(constraint_jacobian(&inst.constraints)),
                    opts.side,
                )
            }
        };
        if let Some(config) = opts.envelope {
            config.validate()?;
            base.config = config;
        }
        let rng = random::stream(opts.seed, &format!("check/{}/{tag}", family.name()));
        Ok(Self {
            family,
            base,
            affine_jac,
            side,
            rng,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// The family instance drawn from the suite seed.
    pub fn problem(&self) -> &FbseProblem {
        &self.base
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    /// A point of `X` with a nontrivial normal cone most of the time.
    pub fn point_in_set(&mut self) -> DVector<f64> {
        match self.family {
            Family::Toy => DVector::from_fn(2, |_, _| {
                if self.rng.random_bool(0.4) {
                    0.0
                } else {
                    self.rng.random_range(0.05..2.0)
                }
            }),
            Family::SdpSphere | Family::SdpAffine => {
                let min_rank = if self.family == Family::SdpAffine {
                    3
                } else {
                    1
                };
                let scale = self.rng.random_range(0.5..2.0);
                random_psd(&mut self.rng, self.side, min_rank, scale)
            }
        }
    }

    /// A point of `X ∩ M` and the problem whose manifold contains it.
    ///
    /// For the affine family the right-hand side is reset to `B(x)` so the
    /// sampled point is feasible; the operator `B` and the objective are kept.
    pub fn feasible_point(&mut self) -> Result<(FbseProblem, DVector<f64>)> {
        match self.family {
            Family::Toy => {
                let t = match self.rng.random_range(0..8) {
                    0 => 0.0,
                    1 => std::f64::consts::FRAC_PI_2,
                    _ => self.rng.random_range(0.0..std::f64::consts::FRAC_PI_2),
                };
                Ok((self.base.clone(), DVector::from_vec(vec![t.cos(), t.sin()])))
            }
            Family::SdpSphere => {
                let x = self.point_in_set();
                let x = &x / x.norm();
                Ok((self.base.clone(), x))
            }
            Family::SdpAffine => {
                let x = self.point_in_set();
                let jac = self
                    .affine_jac
                    .clone()
                    .expect("affine family has a jacobian");
                let rhs = jac.tr_mul(&x);
                let mut prob = self.base.clone();
                prob.constraint = ConstraintMap::affine(jac, rhs)?;
                Ok((prob, x))
            }
        }
    }

    /// A point of `M` within roughly `radius` of `X ∩ M`, in general position.
    pub fn near_point(&mut self, radius: f64) -> Result<(FbseProblem, DVector<f64>)> {
        let (prob, x) = self.feasible_point()?;
        let noise = random::normal_vector(&mut self.rng, x.len());
        let noise = symmetric_part(&noise, &prob.set);
        let step = self.rng.random_range(0.1..1.0) * radius / noise.norm().max(1e-300);
        let moved = prob.constraint.project_to_manifold(&(&x + noise * step))?;
        Ok((prob, moved))
    }
}

fn symmetric_part(v: &DVector<f64>, set: &ConvexSet) -> DVector<f64> {
    match set.kind {
        SetKind::PsdCap { .. } => {
            let m = reshape(v, set.dim);
            vectorize(&((&m + m.transpose()) * 0.5))
        }
        _ => v.clone(),
    }
}

fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    random::normal_matrix(rng, n, n).qr().q()
}

/// Random PSD matrix with rank in `[min_rank, n]`, nonzero eigenvalues in
/// `scale * [0.1, 1]`, flattened column-major.
fn random_psd<R: Rng>(rng: &mut R, n: usize, min_rank: usize, scale: f64) -> DVector<f64> {
    let u = random_orthogonal(rng, n);
    let rank = rng.random_range(min_rank.min(n)..=n);
    let lam = DVector::from_fn(n, |i, _| {
        if i < rank {
            scale * rng.random_range(0.1..1.0)
        } else {
            0.0
        }
    });
    vectorize(&(&u * DMatrix::from_diagonal(&lam) * u.transpose()))
}

fn normal_dirs(set: &ConvexSet, x: &DVector<f64>, seed: u64) -> Result<Vec<DVector<f64>>> {
    set.sample_normal_directions(x, 4, seed)
}

/// `J(x) grad c(x) lambda = 0` at points of `X ∩ M`, for unit `grad c lambda`.
pub fn normals_annihilated(family: Family, opts: &SuiteOptions) -> Result<CheckReport> {
    let mut s = Sampler::new(family, opts, "normals")?;
    let mut worst: f64 = 0.0;
    for _ in 0..opts.samples {
        let (prob, x) = s.feasible_point()?;
        let sys = prob.system(&x)?;
        let p = sys.jacobian().ncols();
        let lam = random::normal_vector(s.rng(), p);
        let v = sys.jacobian() * lam;
        let v = &v / v.norm();
        worst = worst.max(sys.j_apply(&v).norm());
    }
    Ok(CheckReport::new(
        format!("{family}/J grad c = 0 on X∩M"),
        opts.samples,
        worst,
        1e-10,
        Bound::Upper,
    ))
}

/// `J grad c = tau grad c D^{-1}` at arbitrary points near `X`, relative to
/// `||grad c||`.
pub fn dissolving_image_form(family: Family, opts: &SuiteOptions) -> Result<CheckReport> {
    let mut s = Sampler::new(family, opts, "image-form")?;
    let mut worst: f64 = 0.0;
    for _ in 0..opts.samples {
        let (prob, x) = s.feasible_point()?;
        let noise = random::normal_vector(s.rng(), x.len()) * 0.1;
        let x = x + noise;
        let sys = prob.system(&x)?;
        let jac = sys.jacobian();
        let p = jac.ncols();
        let mut lhs = DMatrix::zeros(jac.nrows(), p);
        let mut d_inv = DMatrix::zeros(p, p);
        for j in 0..p {
            lhs.set_column(j, &sys.j_apply(&jac.column(j).into_owned()));
            let mut e = DVector::zeros(p);
            e[j] = 1.0;
            d_inv.set_column(j, &sys.solve(&e));
        }
        let rhs = jac * d_inv * sys.tau();
        let scale = jac.norm().max(1e-300);
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    Ok(CheckReport::new(
        format!("{family}/J grad c = tau grad c D^-1"),
        opts.samples,
        worst,
        1e-10,
        Bound::Upper,
    ))
}

/// `J(x) nu = nu` for unit normal directions at points of `X`.
pub fn normal_cone_fixed(family: Family, opts: &SuiteOptions) -> Result<CheckReport> {
    let mut s = Sampler::new(family, opts, "normal-cone")?;
    let prob = s.problem().clone();
    let mut worst: f64 = 0.0;
    let mut counted = 0;
    for k in 0..opts.samples {
        let x = s.point_in_set();
        let dirs = normal_dirs(&prob.set, &x, opts.seed.wrapping_add(k as u64))?;
        if dirs.is_empty() {
            continue;
        }
        counted += 1;
        let sys = prob.system(&x)?;
        for nu in &dirs {
            worst = worst.max((sys.j_apply(nu) - nu).norm());
        }
    }
    Ok(CheckReport::new(
        format!("{family}/J nu = nu"),
        counted,
        worst,
        1e-10,
        Bound::Upper,
    ))
}

/// `psi(x) <= f(x) - ||T(x) - x||^2 / (2 mu)` at points of `X`.
///
/// The violation is scaled by `max(1, |f(x)|)`.
pub fn envelope_upper_bound(family: Family, opts: &SuiteOptions) -> Result<CheckReport> {
    let mut s = Sampler::new(family, opts, "upper-bound")?;
    let prob = s.problem().clone();
    let mu = prob.config.mu;
    let mut worst: f64 = 0.0;
    for _ in 0..opts.samples {
        let x = s.point_in_set();
        let ev = prob.evaluate(&x)?;
        let gap = ev.psi - ev.f + (&ev.t - &x).norm_squared() / (2.0 * mu);
        worst = worst.max(gap.max(0.0) / ev.f.abs().max(1.0));
    }
    Ok(CheckReport::new(
        format!("{family}/psi <= f - |T - x|^2/(2 mu)"),
        opts.samples,
        worst,
        1e-12,
        Bound::Upper,
    ))
}

/// Ratio `||(T - x)^T Q(T) grad c(x)|| / (mu ||T - x||)` at points of `M`
/// near `X`. Returns the report (largest ratio, must be finite) and the
/// median ratio.
pub fn slope_bound(family: Family, opts: &SuiteOptions) -> Result<(CheckReport, f64)> {
    let mut s = Sampler::new(family, opts, "slope")?;
    let mut ratios = Vec::with_capacity(opts.samples);
    for _ in 0..opts.samples {
        let (prob, x) = s.near_point(0.1)?;
        let mu = prob.config.mu;
        let t = prob.forward_backward_step(&x)?;
        let step = &t - &x;
        let len = step.norm();
        if len < 1e-14 {
            continue;
        }
        let jac = prob.constraint.evaluate_jacobian(&x)?;
        let q_jac = prob.projective_at(&t)?.apply_columns(&jac)?;
        let inner = q_jac.tr_mul(&step).norm() / mu;
        ratios.push(inner / len);
    }
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let median = median(&mut ratios.clone());
    let report = CheckReport::new(
        format!("{family}/slope bound"),
        ratios.len(),
        worst,
        f64::INFINITY,
        Bound::Finite,
    );
    Ok((report, median))
}

/// `||Q(x) nu|| <= 1e-10` for unit normals at sampled boundary points of
/// the family set.
pub fn null_space_alignment(family: Family, opts: &SuiteOptions) -> Result<CheckReport> {
    let s = Sampler::new(family, opts, "null-space")?;
    let set = s.problem().set;
    let (report, _) = set_projective_suite(&set, opts.samples, opts.seed)?;
    Ok(CheckReport {
        name: format!("{family}/{}", report.name),
        ..report
    })
}

/// Null-space alignment and tangent positivity of the built-in projective
/// mapping of `set`, on `samples` seeded boundary points.
pub fn set_projective_suite(
    set: &ConvexSet,
    samples: usize,
    seed: u64,
) -> Result<(CheckReport, CheckReport)> {
    let mut rng = random::stream(seed, "check/projective");
    let mut worst_null: f64 = 0.0;
    let mut worst_tangent = f64::INFINITY;
    for k in 0..samples {
        let (x, tangents) = boundary_point(set, &mut rng)?;
        let q = crate::projective::make_projective(set, &x)?;
        for nu in set.sample_normal_directions(&x, 4, seed.wrapping_add(k as u64))? {
            worst_null = worst_null.max(q.apply(&nu)?.norm());
        }
        for d in tangents {
            let ratio = d.dot(&q.apply(&d)?) / d.norm_squared();
            worst_tangent = worst_tangent.min(ratio);
        }
    }
    let label = set_label(set);
    Ok((
        CheckReport::new(
            format!("{label}/null(Q) contains normals"),
            samples,
            worst_null,
            1e-10,
            Bound::Upper,
        ),
        CheckReport::new(
            format!("{label}/Q positive on tangents"),
            samples,
            worst_tangent,
            1e-8,
            Bound::Lower,
        ),
    ))
}

fn set_label(set: &ConvexSet) -> String {
    match set.kind {
        SetKind::Box => format!("box({})", set.dim),
        SetKind::Ball { radius } => format!("ball({}, {radius})", set.dim),
        SetKind::Simplex => format!("simplex({})", set.dim),
        SetKind::PsdCap { cap } => format!("psd({}, {cap:e})", set.dim),
    }
}

/// A point of `set` with strict activity, plus tangent directions of the
/// active face.
fn boundary_point<R: Rng>(
    set: &ConvexSet,
    rng: &mut R,
) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
    let n = set.dim;
    let mut tangents = Vec::new();
    let x = match set.kind {
        SetKind::Box => {
            let x = DVector::from_fn(n, |_, _| {
                if rng.random_bool(0.4) {
                    0.0
                } else {
                    rng.random_range(0.05..2.0)
                }
            });
            for _ in 0..3 {
                let d = DVector::from_fn(n, |i, _| {
                    if x[i] > 0.0 {
                        rng.random_range(-1.0..1.0)
                    } else {
                        0.0
                    }
                });
                if d.norm() > 0.0 {
                    tangents.push(d);
                }
            }
            x
        }
        SetKind::Ball { radius } => {
            let dir = random::normal_vector(rng, n).normalize();
            let on_boundary = rng.random_bool(0.7);
            let x = if on_boundary {
                dir * radius
            } else {
                dir * (radius * rng.random_range(0.0..0.9))
            };
            for _ in 0..3 {
                let mut d = random::normal_vector(rng, n);
                if on_boundary {
                    let u = &x / radius;
                    d -= &u * u.dot(&d);
                }
                tangents.push(d);
            }
            x
        }
        SetKind::Simplex => {
            let active: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
            let free = if active.iter().all(|&a| a) {
                vec![0]
            } else {
                (0..n).filter(|&i| !active[i]).collect()
            };
            let mut x = DVector::zeros(n);
            for &i in &free {
                x[i] = rng.random_range(0.2..1.0);
            }
            let total = x.sum();
            x /= total;
            if free.len() > 1 {
                for _ in 0..3 {
                    let mut d = DVector::zeros(n);
                    for &i in &free {
                        d[i] = rng.random_range(-1.0..1.0);
                    }
                    let mean = d.sum() / free.len() as f64;
                    for &i in &free {
                        d[i] -= mean;
                    }
                    tangents.push(d);
                }
            }
            x
        }
        SetKind::PsdCap { cap } => {
            let u = random_orthogonal(rng, n);
            let upper = (cap - 1.5).min(1.0);
            let use_cap = cap <= 1e3;
            // 0 = zero eigenvalue, 1 = free, 2 = at the cap
            let status: Vec<u8> = (0..n)
                .map(|_| {
                    let r = rng.random_range(0.0..1.0);
                    if r < 0.3 {
                        0
                    } else if use_cap && r > 0.85 {
                        2
                    } else {
                        1
                    }
                })
                .collect();
            let lam = DVector::from_fn(n, |i, _| match status[i] {
                0 => 0.0,
                2 => cap,
                _ => rng.random_range(0.1..upper),
            });
            let x = vectorize(&(&u * DMatrix::from_diagonal(&lam) * u.transpose()));
            let free: Vec<usize> = (0..n).filter(|&i| status[i] == 1).collect();
            let fixed: Vec<usize> = (0..n).filter(|&i| status[i] != 1).collect();
            if !free.is_empty() {
                for _ in 0..3 {
                    let mut d = DMatrix::zeros(n, n);
                    for (a, &i) in free.iter().enumerate() {
                        for &j in &free[a..] {
                            let w = rng.random_range(-1.0..1.0);
                            let ui = u.column(i);
                            let uj = u.column(j);
                            d += (ui * uj.transpose() + uj * ui.transpose()) * w;
                        }
                        for &j in &fixed {
                            let w = rng.random_range(-1.0..1.0);
                            let ui = u.column(i);
                            let uj = u.column(j);
                            d += (ui * uj.transpose() + uj * ui.transpose()) * w;
                        }
                    }
                    tangents.push(vectorize(&d));
                }
            }
            x
        }
    };
    Ok((x, tangents))
}

/// Central differences of `func` at `x` with step `h (1 + ||x||)`.
pub fn central_difference<F>(func: F, x: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let step = h * (1.0 + x.norm());
    let mut g = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = func(&probe)?;
        probe[i] = x[i] - step;
        let down = func(&probe)?;
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * step);
    }
    Ok(g)
}

fn relative_error(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}

/// Step used for the finite-difference references.
pub const FD_CHECK_STEP: f64 = 1e-6;

/// `grad psi` against central differences of `psi` at points near `X ∩ M`.
pub fn grad_psi_fd(family: Family, points: usize, opts: &SuiteOptions) -> Result<CheckReport> {
    let mut s = Sampler::new(family, opts, "grad-psi")?;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let (prob, x) = s.near_point(0.05)?;
        let g = prob.grad_psi(&x)?;
        let fd = central_difference(|z| prob.psi(z), &x, FD_CHECK_STEP)?;
        worst = worst.max(relative_error(&g, &fd));
    }
    Ok(CheckReport::new(
        format!("{family}/grad psi vs FD"),
        points,
        worst,
        1e-5,
        Bound::Upper,
    ))
}

/// Objective gradient against central differences of `f`.
pub fn objective_gradient_fd(
    family: Family,
    points: usize,
    opts: &SuiteOptions,
) -> Result<CheckReport> {
    let mut s = Sampler::new(family, opts, "grad-f")?;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let (prob, x) = s.near_point(0.05)?;
        let g = prob.objective.gradient(&x);
        let fd = central_difference(|z| Ok(prob.objective.value(z)), &x, FD_CHECK_STEP)?;
        worst = worst.max(relative_error(&g, &fd));
    }
    Ok(CheckReport::new(
        format!("{family}/grad f vs FD"),
        points,
        worst,
        1e-6,
        Bound::Upper,
    ))
}

/// Every sampled invariant for one family: `J grad c` in both forms, fixed
/// normals, the envelope upper bound, null-space alignment, tangent
/// positivity and the slope bound.
pub fn invariant_suite(family: Family, opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    let s = Sampler::new(family, opts, "suite")?;
    let set = s.problem().set;
    let (null, tangent) = set_projective_suite(&set, opts.samples, opts.seed)?;
    let prefix = |r: CheckReport| CheckReport {
        name: format!("{family}/{}", r.name),
        ..r
    };
    Ok(vec![
        normals_annihilated(family, opts)?,
        dissolving_image_form(family, opts)?,
        normal_cone_fixed(family, opts)?,
        envelope_upper_bound(family, opts)?,
        prefix(null),
        prefix(tangent),
        slope_bound(family, opts)?.0,
    ])
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    }
}

/// First iteration count included in the decay fit.
pub const DECAY_START: usize = 10;

/// Best-so-far residual times `sqrt(K)`, for `K >= DECAY_START`.
pub fn decay_profile(log: &[IterateLog]) -> Vec<(usize, f64)> {
    let mut best = f64::INFINITY;
    let mut out = Vec::new();
    for entry in log {
        best = best.min(entry.residual);
        if entry.k >= DECAY_START {
            out.push((entry.k, best * (entry.k as f64).sqrt()));
        }
    }
    out
}

/// Largest `best_K sqrt(K)` over its median; passes at or below 10.
pub fn complexity_decay(name: &str, log: &[IterateLog]) -> CheckReport {
    let profile: Vec<f64> = decay_profile(log).into_iter().map(|(_, s)| s).collect();
    let worst = if profile.is_empty() {
        0.0
    } else {
        let med = median(&mut profile.clone());
        let top = profile.iter().copied().fold(0.0, f64::max);
        if med > 0.0 {
            top / med
        } else if top > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    CheckReport::new(
        format!("{name}/residual decay"),
        profile.len(),
        worst,
        10.0,
        Bound::Upper,
    )
}

/// Largest violation of the nonmonotone acceptance test along a log,
/// relative to `max(1, |reference|)`.
pub fn descent_ledger(
    name: &str,
    log: &[IterateLog],
    window: usize,
    sufficient: f64,
) -> Result<CheckReport> {
    if window == 0 {
        return Err(FbseError::InvalidInput("window must be at least 1".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    for k in 1..log.len() {
        let lo = k.saturating_sub(window);
        let reference = log[lo..k]
            .iter()
            .map(|e| e.psi)
            .fold(f64::NEG_INFINITY, f64::max);
        let g = log[k - 1].grad_norm;
        let bound = reference - sufficient * log[k].eta * g * g;
        worst = worst.max((log[k].psi - bound) / reference.abs().max(1.0));
    }
    let steps = log.len().saturating_sub(1);
    if steps == 0 {
        worst = 0.0;
    }
    Ok(CheckReport::new(
        format!("{name}/nonmonotone acceptance"),
        steps,
        worst,
        1e-12,
        Bound::Upper,
    ))
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Largest relative difference between matching scalars of two logs,
/// wall time excluded. Logs of different length compare as infinite.
pub fn log_difference(a: &[IterateLog], b: &[IterateLog]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        if x.k != y.k || x.ls_backtracks != y.ls_backtracks {
            return f64::INFINITY;
        }
        for (u, v) in [
            (x.psi, y.psi),
            (x.f, y.f),
            (x.eta, y.eta),
            (x.residual, y.residual),
            (x.stationarity, y.stationarity),
            (x.feasibility, y.feasibility),
            (x.grad_norm, y.grad_norm),
        ] {
            worst = worst.max(rel_diff(u, v));
        }
    }
    worst
}
