//! Seeded problem generators.
//!
//! Two matrix families share the objective
//!
//! ```text
//! f(X) = <B, X> + 1/2 <X, H(X)> + nu/6 ||X||_F^3,   H(X) = Phi(reshape(T vec(Phi(X))))
//! ```
//!
//! over the capped PSD cone; the sphere family adds `||X||_F^2 = 1`, the
//! affine family adds `<B_i, X> = b_i`. `T` is a symmetrized standard normal
//! `n^2 x n^2` matrix scaled to unit spectral norm. A small vector fixture
//! with a closed-form solution rounds out the set.
//!
//! Every random draw comes from a tagged sub-stream of the instance seed (see
//! [`crate::random`]), so a `(generator, parameters, seed)` triple always
//! produces the same instance.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::envelope::{EnvelopeConfig, FbseProblem, Objective};
use crate::error::{check_len, FbseError, Result};
use crate::linalg::{lanczos_spectral_norm, reshape, symmetrize, vectorize, ThinQr};
use crate::manifold::ConstraintMap;
use crate::random;
use crate::sets::ConvexSet;
use crate::solver::{SolverOptions, StopRule};

/// Default envelope parameter of the sphere family.
pub const SPHERE_MU: f64 = 0.01;
/// Default envelope parameter of the affine family.
pub const AFFINE_MU: f64 = 0.001;
/// Default envelope parameter of the vector fixture.
pub const TOY_MU: f64 = 0.1;
/// Cubic regularization used by the matrix experiments.
pub const DEFAULT_NU: f64 = 1.0;
/// Operator-norm cap used by the matrix experiments.
pub const DEFAULT_CAP: f64 = 1e6;
/// Benchmark tolerance.
pub const BENCH_TOL: f64 = 1e-5;

const MAX_REGENERATIONS: usize = 10;

/// `Phi(reshape(T vec(Phi(X))))`, self-adjoint on all `n x n` matrices.
pub fn apply_selfadjoint_h(t: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let side = x.nrows();
    check_len(side, x.ncols())?;
    check_len(side * side, t.nrows())?;
    check_len(side * side, t.ncols())?;
    let v = vectorize(&symmetrize(x));
    Ok(symmetrize(&reshape(&(t * v), side)))
}

/// Quadratic-plus-cubic matrix objective on column-stacked `n x n` points.
#[derive(Debug, Clone)]
pub struct SdpObjective {
    side: usize,
    linear: DVector<f64>,
    t: Arc<DMatrix<f64>>,
    nu: f64,
}

impl SdpObjective {
    pub fn new(b: &DMatrix<f64>, t: Arc<DMatrix<f64>>, nu: f64) -> Result<Self> {
        let side = b.nrows();
        check_len(side, b.ncols())?;
        check_len(side * side, t.nrows())?;
        Ok(Self {
            side,
            linear: vectorize(b),
            t,
            nu,
        })
    }

    fn h_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let sym = vectorize(&symmetrize(&reshape(x, self.side)));
        let tx = &*self.t * sym;
        vectorize(&symmetrize(&reshape(&tx, self.side)))
    }
}

impl Objective for SdpObjective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let nrm = x.norm();
        self.linear.dot(x) + 0.5 * x.dot(&self.h_vec(x)) + self.nu / 6.0 * nrm * nrm * nrm
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.linear + self.h_vec(x) + x * (0.5 * self.nu * x.norm())
    }

    fn hessian_vector(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        let nrm = x.norm();
        let mut out = self.h_vec(v) + v * (0.5 * self.nu * nrm);
        if nrm > 0.0 {
            out += x * (0.5 * self.nu * x.dot(v) / nrm);
        }
        Some(out)
    }
}

/// Row-major matrix payload used by the instance text format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixPayload {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixPayload {
    fn from(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter());
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl MatrixPayload {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        check_len(self.rows * self.cols, self.data.len())?;
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSphereInstance {
    pub n: usize,
    pub b: DMatrix<f64>,
    pub t: Arc<DMatrix<f64>>,
    pub nu: f64,
    pub cap: f64,
    pub seed: u64,
    /// Spectral norm of the symmetrized draw before scaling.
    pub t_raw_norm: f64,
    /// Start point on the sphere.
    pub x0: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpAffineInstance {
    pub n: usize,
    pub m: usize,
    pub b0: DMatrix<f64>,
    pub t: Arc<DMatrix<f64>>,
    pub constraints: Vec<DMatrix<f64>>,
    pub b: DVector<f64>,
    pub nu: f64,
    pub cap: f64,
    pub seed: u64,
    pub t_raw_norm: f64,
    /// Regeneration attempts needed for a full-rank constraint Jacobian.
    pub constraint_attempts: usize,
    /// Start point: PSD projection of a normal draw, then affine projection.
    pub x0: DVector<f64>,
}

fn symmetric_normal(seed: u64, tag: &str, side: usize) -> DMatrix<f64> {
    symmetrize(&random::normal_matrix(
        &mut random::stream(seed, tag),
        side,
        side,
    ))
}

/// Symmetrized normal `n^2 x n^2` matrix scaled to unit spectral norm.
fn generate_t(n: usize, seed: u64) -> (DMatrix<f64>, f64) {
    let dim = n * n;
    let mut t = random::normal_matrix(&mut random::stream(seed, "T"), dim, dim);
    for j in 0..dim {
        for i in (j + 1)..dim {
            let avg = 0.5 * (t[(i, j)] + t[(j, i)]);
            t[(i, j)] = avg;
            t[(j, i)] = avg;
        }
    }
    let start = random::normal_vector(&mut random::stream(seed, "T-norm"), dim);
    let norm = lanczos_spectral_norm(dim, &start, |v| &t * v);
    t /= norm;
    (t, norm)
}

fn psd_start(n: usize, seed: u64, cap: f64) -> Result<DVector<f64>> {
    let psd = ConvexSet::psd_cap(n, cap)?;
    for attempt in 0..MAX_REGENERATIONS {
        let tag = if attempt == 0 {
            "X0".to_string()
        } else {
            format!("X0/{attempt}")
        };
        let raw = random::normal_matrix(&mut random::stream(seed, &tag), n, n);
        let x = psd.project(&vectorize(&raw))?;
        if x.norm() > 1e-8 {
            return Ok(x);
        }
    }
    Err(FbseError::Generation(
        "PSD projection of the start draw vanished repeatedly".into(),
    ))
}

fn check_sizes(n: usize, nu: f64, cap: f64) -> Result<()> {
    if n < 2 {
        return Err(FbseError::InvalidInput(format!(
            "matrix side must be >= 2, got {n}"
        )));
    }
    if nu.is_nan() || nu <= 0.0 {
        return Err(FbseError::InvalidInput(format!(
            "nu must be positive, got {nu}"
        )));
    }
    if cap.is_nan() || cap <= 0.0 {
        return Err(FbseError::InvalidInput(format!(
            "cap must be positive, got {cap}"
        )));
    }
    Ok(())
}

/// Solver settings used for the benchmark families: tolerance `tol` on the
/// scaled residual test, stationarity checked at the exit point.
pub fn benchmark_options(mu: f64, tol: f64) -> SolverOptions {
    let mut opts = SolverOptions::for_mu(mu);
    opts.tol_stationarity = tol;
    opts.tol_residual = tol * mu;
    opts.stop_rule = StopRule::Residual;
    opts
}

/// Capped-PSD instance on the Frobenius unit sphere.
pub fn gen_sdp_sphere(
    n: usize,
    nu: f64,
    cap: f64,
    seed: u64,
) -> Result<(SdpSphereInstance, FbseProblem)> {
    check_sizes(n, nu, cap)?;
    let (t, t_raw_norm) = generate_t(n, seed);
    let b = symmetric_normal(seed, "B", n);
    let x0 = psd_start(n, seed, cap)?.normalize();
    let inst = SdpSphereInstance {
        n,
        b,
        t: Arc::new(t),
        nu,
        cap,
        seed,
        t_raw_norm,
        x0,
    };
    let prob = inst.problem(EnvelopeConfig::with_mu(SPHERE_MU))?;
    Ok((inst, prob))
}

impl SdpSphereInstance {
    pub fn problem(&self, config: EnvelopeConfig) -> Result<FbseProblem> {
        FbseProblem::new(
            Arc::new(SdpObjective::new(&self.b, self.t.clone(), self.nu)?),
            ConvexSet::psd_cap(self.n, self.cap)?,
            ConstraintMap::sphere(self.n * self.n),
            config,
        )
    }

    pub fn to_json(&self) -> String {
        let doc = InstanceDoc {
            family: "sdp_sphere".into(),
            n: self.n,
            m: 0,
            nu: self.nu,
            cap: self.cap,
            seed: self.seed,
            t_raw_norm: self.t_raw_norm,
            b: (&self.b).into(),
            t: (&*self.t).into(),
            constraints: Vec::new(),
            rhs: Vec::new(),
            constraint_attempts: 0,
            x0: self.x0.iter().copied().collect(),
            metadata: "x0 = PSD projection of a normal draw, scaled to unit Frobenius norm".into(),
        };
        serde_json::to_string(&doc).expect("instance serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: InstanceDoc = parse_doc(s, "sdp_sphere")?;
        Ok(Self {
            n: doc.n,
            b: doc.b.to_matrix()?,
            t: Arc::new(doc.t.to_matrix()?),
            nu: doc.nu,
            cap: doc.cap,
            seed: doc.seed,
            t_raw_norm: doc.t_raw_norm,
            x0: DVector::from_vec(doc.x0),
        })
    }
}

/// Capped-PSD instance with `m` random linear equality constraints.
pub fn gen_sdp_affine(
    n: usize,
    m: usize,
    nu: f64,
    cap: f64,
    seed: u64,
) -> Result<(SdpAffineInstance, FbseProblem)> {
    check_sizes(n, nu, cap)?;
    if m == 0 || m > n * (n + 1) / 2 - 1 {
        return Err(FbseError::InvalidInput(format!(
            "number of constraints must lie in [1, {}], got {m}",
            n * (n + 1) / 2 - 1
        )));
    }
    let (t, t_raw_norm) = generate_t(n, seed);
    let b0 = symmetric_normal(seed, "B", n);
    let mut chosen = None;
    for attempt in 0..MAX_REGENERATIONS {
        let mats: Vec<DMatrix<f64>> = (0..m)
            .map(|i| symmetric_normal(seed, &format!("B{}/{attempt}", i + 1), n))
            .collect();
        let jac = constraint_jacobian(&mats);
        if ThinQr::new(&jac).is_ok() {
            chosen = Some((mats, attempt + 1));
            break;
        }
    }
    let (constraints, constraint_attempts) = chosen.ok_or_else(|| {
        FbseError::Generation(format!(
            "constraint Jacobian rank deficient after {MAX_REGENERATIONS} attempts"
        ))
    })?;
    let b = random::normal_vector(&mut random::stream(seed, "b"), m);
    let mut inst = SdpAffineInstance {
        n,
        m,
        b0,
        t: Arc::new(t),
        constraints,
        b,
        nu,
        cap,
        seed,
        t_raw_norm,
        constraint_attempts,
        x0: DVector::zeros(n * n),
    };
    let prob = inst.problem(EnvelopeConfig::with_mu(AFFINE_MU))?;
    inst.x0 = prob
        .constraint
        .project_to_manifold(&psd_start(n, seed, cap)?)?;
    Ok((inst, prob))
}

/// `n^2 x m` matrix with columns `vec(B_i)`.
pub fn constraint_jacobian(mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = mats.first().map_or(0, |m| m.len());
    let mut jac = DMatrix::zeros(rows, mats.len());
    for (j, m) in mats.iter().enumerate() {
        jac.set_column(j, &vectorize(m));
    }
    jac
}

impl SdpAffineInstance {
    pub fn problem(&self, config: EnvelopeConfig) -> Result<FbseProblem> {
        FbseProblem::new(
            Arc::new(SdpObjective::new(&self.b0, self.t.clone(), self.nu)?),
            ConvexSet::psd_cap(self.n, self.cap)?,
            ConstraintMap::affine(constraint_jacobian(&self.constraints), self.b.clone())?,
            config,
        )
    }

    pub fn to_json(&self) -> String {
        let doc = InstanceDoc {
            family: "sdp_affine".into(),
            n: self.n,
            m: self.m,
            nu: self.nu,
            cap: self.cap,
            seed: self.seed,
            t_raw_norm: self.t_raw_norm,
            b: (&self.b0).into(),
            t: (&*self.t).into(),
            constraints: self.constraints.iter().map(MatrixPayload::from).collect(),
            rhs: self.b.iter().copied().collect(),
            constraint_attempts: self.constraint_attempts,
            x0: self.x0.iter().copied().collect(),
            metadata: "x0 = affine projection of the PSD projection of a normal draw".into(),
        };
        serde_json::to_string(&doc).expect("instance serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: InstanceDoc = parse_doc(s, "sdp_affine")?;
        Ok(Self {
            n: doc.n,
            m: doc.m,
            b0: doc.b.to_matrix()?,
            t: Arc::new(doc.t.to_matrix()?),
            constraints: doc
                .constraints
                .iter()
                .map(MatrixPayload::to_matrix)
                .collect::<Result<_>>()?,
            b: DVector::from_vec(doc.rhs),
            nu: doc.nu,
            cap: doc.cap,
            seed: doc.seed,
            t_raw_norm: doc.t_raw_norm,
            constraint_attempts: doc.constraint_attempts,
            x0: DVector::from_vec(doc.x0),
        })
    }
}

/// On-disk instance document. Matrices are row-major payloads.
#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    family: String,
    n: usize,
    m: usize,
    nu: f64,
    cap: f64,
    seed: u64,
    t_raw_norm: f64,
    b: MatrixPayload,
    t: MatrixPayload,
    constraints: Vec<MatrixPayload>,
    rhs: Vec<f64>,
    constraint_attempts: usize,
    x0: Vec<f64>,
    metadata: String,
}

fn parse_doc(s: &str, family: &str) -> Result<InstanceDoc> {
    let doc: InstanceDoc =
        serde_json::from_str(s).map_err(|e| FbseError::InvalidInput(e.to_string()))?;
    if doc.family != family {
        return Err(FbseError::InvalidInput(format!(
            "expected a {family} instance, found {}",
            doc.family
        )));
    }
    Ok(doc)
}

struct ShiftedQuadratic {
    target: DVector<f64>,
}

impl Objective for ShiftedQuadratic {
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x - &self.target).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.target
    }

    fn hessian_vector(&self, _x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        Some(v.clone())
    }
}

/// `min 1/2 ||x - a||^2` over the nonnegative part of the unit sphere.
///
/// The minimizer is `a+ / ||a+||`, see [`toy_solution`].
pub fn toy_problem(a: &DVector<f64>) -> Result<FbseProblem> {
    if !a.iter().any(|&t| t > 0.0) {
        return Err(FbseError::InvalidInput(
            "target needs a positive coordinate".into(),
        ));
    }
    FbseProblem::new(
        Arc::new(ShiftedQuadratic { target: a.clone() }),
        ConvexSet::nonneg_orthant(a.len()),
        ConstraintMap::sphere(a.len()),
        EnvelopeConfig::with_mu(TOY_MU),
    )
}

/// Closed-form minimizer of [`toy_problem`].
pub fn toy_solution(a: &DVector<f64>) -> DVector<f64> {
    a.map(|t| t.max(0.0)).normalize()
}
