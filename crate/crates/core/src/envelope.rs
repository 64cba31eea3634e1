//! The forward-backward semi-envelope of `min f(x) s.t. x in X, c(x) = 0`.
//!
//! With a projective mapping `Q` for `X`, define
//!
//! ```text
//! tau(x) = L_tau (||c(x)||^2 + dist(x, X)^2)
//! D(x)   = grad c^T Q grad c + tau I_p
//! J(x)   = I - grad c D^{-1} grad c^T Q
//! A(x)   = x - Q grad c D^{-1} c(x)
//! T(x)   = Proj_X(x - mu J(x) grad f(x))
//! psi(x) = f(x) + <J grad f, T - x> + ||T - x||^2 / (2 mu)
//! ```
//!
//! `psi` is continuously differentiable and its gradient is
//! `(I - mu H)(x - T) / mu + (I - J) grad f`, where `H(x)` is the transposed
//! Jacobian of `x -> J(x) grad f(x)`. Minimizing `psi` over `{c = 0}` has the
//! same first-order stationary points as the original problem near `X` for
//! small enough `mu`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, FbseError, Result};
use crate::manifold::{ConstraintKind, ConstraintMap};
use crate::projective::{make_projective, ProjectiveOperator};
use crate::sets::ConvexSet;

/// Smooth objective `f` with its gradient and an optional Hessian-vector
/// product.
///
/// Implementations must be callable from several threads at once; the bench
/// harness solves independent instances concurrently.
pub trait Objective: Send + Sync {
    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    fn hessian_vector(&self, _x: &DVector<f64>, _v: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    /// Envelope parameter.
    pub mu: f64,
    /// Weight of the infeasibility term in `tau`.
    pub l_tau: f64,
    /// Relative step for the finite-difference `H` products.
    pub fd_step: f64,
    /// Extra diagonal floor added to `D` before factorization.
    pub ridge: f64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            mu: 1e-3,
            l_tau: 1.0,
            fd_step: 1e-6,
            ridge: 0.0,
        }
    }
}

impl EnvelopeConfig {
    pub fn with_mu(mu: f64) -> Self {
        Self {
            mu,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad =
            |what: &str, v: f64| Err(FbseError::InvalidInput(format!("{what} out of range: {v}")));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("mu", self.mu);
        }
        if !(self.l_tau > 0.0 && self.l_tau.is_finite()) {
            return bad("l_tau", self.l_tau);
        }
        if !(1e-8..=1e-4).contains(&self.fd_step) {
            return bad("fd_step", self.fd_step);
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad("ridge", self.ridge);
        }
        Ok(())
    }
}

pub type ProjectiveFactory = Arc<dyn Fn(&DVector<f64>) -> Result<ProjectiveOperator> + Send + Sync>;

/// How [`FbseProblem::h_apply`] evaluates `H(x) v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianPath {
    /// Central differences of `z -> <J(z) grad f(z), v>` in every coordinate.
    FiniteDifference,
    /// Exact `grad^2 f (J^T v)` plus central differences of
    /// `z -> <J(z) w, v>` with `w = grad f(x)` frozen.
    Split,
}

/// Values produced by one envelope evaluation at a point.
#[derive(Debug, Clone)]
pub struct EnvelopeEval {
    pub f: f64,
    pub grad_f: DVector<f64>,
    /// `J(x) grad f(x)`.
    pub j_grad: DVector<f64>,
    /// Forward-backward step `T(x)`.
    pub t: DVector<f64>,
    pub psi: f64,
}

/// A problem instance together with its envelope parameters.
#[derive(Clone)]
pub struct FbseProblem {
    pub objective: Arc<dyn Objective>,
    pub set: ConvexSet,
    pub constraint: ConstraintMap,
    pub config: EnvelopeConfig,
    projective: Option<ProjectiveFactory>,
}

impl fmt::Debug for FbseProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FbseProblem")
            .field("set", &self.set)
            .field("constraint", &self.constraint)
            .field("config", &self.config)
            .field("custom_projective", &self.projective.is_some())
            .finish()
    }
}

impl FbseProblem {
    pub fn new(
        objective: Arc<dyn Objective>,
        set: ConvexSet,
        constraint: ConstraintMap,
        config: EnvelopeConfig,
    ) -> Result<Self> {
        check_len(set.ambient_len(), constraint.dim())?;
        config.validate()?;
        Ok(Self {
            objective,
            set,
            constraint,
            config,
            projective: None,
        })
    }

    /// Replace the set's built-in projective mapping.
    pub fn with_projective(mut self, factory: ProjectiveFactory) -> Self {
        self.projective = Some(factory);
        self
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        let mut out = self.clone();
        out.config.mu = mu;
        out.config.validate()?;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.set.ambient_len()
    }

    pub fn projective_at(&self, x: &DVector<f64>) -> Result<ProjectiveOperator> {
        match &self.projective {
            Some(factory) => factory(x),
            None => make_projective(&self.set, x),
        }
    }

    /// `L_tau (||c(x)||^2 + dist(x, X)^2)`.
    pub fn tau(&self, x: &DVector<f64>) -> Result<f64> {
        let c = self.constraint.evaluate_c(x)?;
        let dist = self.set.distance(x)?;
        Ok(self.config.l_tau * (c.norm_squared() + dist * dist))
    }

    /// Factorized linear system behind `J(x)` and `A(x)`.
    pub fn system(&self, x: &DVector<f64>) -> Result<EnvelopeSystem> {
        check_len(self.dim(), x.len())?;
        let jac = self.constraint.evaluate_jacobian(x)?;
        let c = self.constraint.evaluate_c(x)?;
        let q = self.projective_at(x)?;
        let q_jac = q.apply_columns(&jac)?;
        let tau = self.tau(x)?;
        let p = jac.ncols();
        let gram = jac.tr_mul(&q_jac);
        let mut d = (&gram + gram.transpose()) * 0.5;
        for i in 0..p {
            d[(i, i)] += tau + self.config.ridge;
        }
        let chol = factor_spd(&d)?;
        Ok(EnvelopeSystem {
            jac,
            q_jac,
            c,
            q,
            tau,
            d,
            chol,
        })
    }

    /// `J(x) v`.
    pub fn j_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.dim(), v.len())?;
        Ok(self.system(x)?.j_apply(v))
    }

    /// `J(x)^T v`.
    pub fn j_transpose_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.dim(), v.len())?;
        Ok(self.system(x)?.jt_apply(v))
    }

    /// The constraint dissolving map `A(x)`.
    pub fn dissolve(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let sys = self.system(x)?;
        let lam = sys.solve(&sys.c);
        Ok(x - &sys.q_jac * lam)
    }

    /// `T(x) = Proj_X(x - mu J(x) grad f(x))`.
    pub fn forward_backward_step(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.evaluate(x)?.t)
    }

    pub fn psi(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.evaluate(x)?.psi)
    }

    /// One pass computing `f`, `grad f`, `J grad f`, `T` and `psi` at `x`.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<EnvelopeEval> {
        let sys = self.system(x)?;
        let f = self.objective.value(x);
        let grad_f = self.objective.gradient(x);
        check_len(self.dim(), grad_f.len())?;
        let j_grad = sys.j_apply(&grad_f);
        let mu = self.config.mu;
        let t = self.set.project(&(x - &j_grad * mu))?;
        let step = &t - x;
        let psi = f + j_grad.dot(&step) + step.norm_squared() / (2.0 * mu);
        Ok(EnvelopeEval {
            f,
            grad_f,
            j_grad,
            t,
            psi,
        })
    }

    /// Gradient of `psi`.
    pub fn grad_psi(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let ev = self.evaluate(x)?;
        let mu = self.config.mu;
        let r = x - &ev.t;
        let hr = self.h_apply(x, &r)?;
        Ok((&r - hr * mu) / mu + (&ev.grad_f - &ev.j_grad))
    }

    fn default_path(&self, x: &DVector<f64>, v: &DVector<f64>) -> HessianPath {
        let analytic_constraint = matches!(
            self.constraint.kind,
            ConstraintKind::Sphere | ConstraintKind::Affine { .. }
        );
        if analytic_constraint && self.objective.hessian_vector(x, v).is_some() {
            HessianPath::Split
        } else {
            HessianPath::FiniteDifference
        }
    }

    /// `H(x) v` for `H(x)` the transposed Jacobian of `x -> J(x) grad f(x)`.
    pub fn h_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.h_apply_with(x, v, self.default_path(x, v))
    }

    pub fn h_apply_with(
        &self,
        x: &DVector<f64>,
        v: &DVector<f64>,
        path: HessianPath,
    ) -> Result<DVector<f64>> {
        let n = self.dim();
        check_len(n, x.len())?;
        check_len(n, v.len())?;
        if v.iter().all(|&t| t == 0.0) {
            return Ok(DVector::zeros(n));
        }
        match path {
            HessianPath::FiniteDifference => self.fd_gradient(x, |z| {
                let sys = self.system(z)?;
                Ok(sys.j_apply(&self.objective.gradient(z)).dot(v))
            }),
            HessianPath::Split => {
                let w = self.objective.gradient(x);
                let jt_v = self.system(x)?.jt_apply(v);
                let hess = self.objective.hessian_vector(x, &jt_v).ok_or_else(|| {
                    FbseError::InvalidInput("objective has no Hessian-vector product".into())
                })?;
                let rest = self.fd_gradient(x, |z| Ok(self.system(z)?.j_apply(&w).dot(v)))?;
                Ok(hess + rest)
            }
        }
    }

    fn fd_gradient(
        &self,
        x: &DVector<f64>,
        phi: impl Fn(&DVector<f64>) -> Result<f64>,
    ) -> Result<DVector<f64>> {
        let n = x.len();
        let h = self.config.fd_step * (1.0 + x.norm());
        let mut out = DVector::zeros(n);
        let mut z = x.clone();
        for i in 0..n {
            z[i] = x[i] + h;
            let up = phi(&z)?;
            z[i] = x[i] - h;
            let down = phi(&z)?;
            z[i] = x[i];
            out[i] = (up - down) / (2.0 * h);
        }
        Ok(out)
    }
}

fn factor_spd(d: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let p = d.nrows();
    if p == 0 {
        return Ok(Cholesky::new(DMatrix::zeros(0, 0)).expect("empty factorization"));
    }
    if let Some(ch) = Cholesky::new(d.clone()) {
        return Ok(ch);
    }
    let trace = d.trace();
    if trace.is_finite() && trace > 0.0 {
        let mut bumped = d.clone();
        let extra = 1e-12 * trace / p as f64;
        for i in 0..p {
            bumped[(i, i)] += extra;
        }
        if let Some(ch) = Cholesky::new(bumped) {
            return Ok(ch);
        }
    }
    let min_eigenvalue = d.clone().symmetric_eigenvalues().min();
    Err(FbseError::SingularEnvelope { min_eigenvalue })
}

/// Quantities shared by `J(x)`, `J(x)^T` and `A(x)` at one point.
#[derive(Clone)]
pub struct EnvelopeSystem {
    jac: DMatrix<f64>,
    q_jac: DMatrix<f64>,
    c: DVector<f64>,
    q: ProjectiveOperator,
    tau: f64,
    d: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl EnvelopeSystem {
    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jac
    }

    /// `Q(x) grad c(x)`.
    pub fn q_jacobian(&self) -> &DMatrix<f64> {
        &self.q_jac
    }

    pub fn projective(&self) -> &ProjectiveOperator {
        &self.q
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `grad c^T Q grad c + (tau + ridge) I`.
    pub fn d_matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// `D^{-1} rhs`.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        if rhs.is_empty() {
            return DVector::zeros(0);
        }
        self.chol.solve(rhs)
    }

    /// `J v = v - grad c D^{-1} (Q grad c)^T v`.
    pub fn j_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.jac.ncols() == 0 {
            return v.clone();
        }
        let lam = self.solve(&self.q_jac.tr_mul(v));
        v - &self.jac * lam
    }

    /// `J^T v = v - Q grad c D^{-1} grad c^T v`.
    pub fn jt_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.jac.ncols() == 0 {
            return v.clone();
        }
        let lam = self.solve(&self.jac.tr_mul(v));
        v - &self.q_jac * lam
    }
}
