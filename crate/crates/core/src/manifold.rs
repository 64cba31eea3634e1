//! Equality constraints `c(x) = 0`: values, Jacobians, tangent projection and
//! the projection (or retraction) onto the constraint manifold.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, FbseError, Result};
use crate::linalg::ThinQr;

type ValueFn =
    Arc<dyn Fn(&DVector<f64>) -> std::result::Result<DVector<f64>, String> + Send + Sync>;
type JacobianFn =
    Arc<dyn Fn(&DVector<f64>) -> std::result::Result<DMatrix<f64>, String> + Send + Sync>;

/// Feasibility target of the Gauss-Newton restoration.
pub const RESTORATION_TOL: f64 = 1e-12;
/// Iteration cap of the Gauss-Newton restoration.
pub const RESTORATION_MAX_ITER: usize = 50;

#[derive(Clone)]
pub enum ConstraintKind {
    /// `c(x) = ||x||^2 - 1`.
    Sphere,
    /// `c(x) = B^T x - b`, with the factorization of `B` cached.
    Affine {
        jacobian: DMatrix<f64>,
        rhs: DVector<f64>,
        qr: ThinQr,
    },
    /// User callbacks for `c` and its `n x p` Jacobian.
    UserSmooth {
        value: ValueFn,
        jacobian: JacobianFn,
    },
}

#[derive(Clone)]
pub struct ConstraintMap {
    pub kind: ConstraintKind,
    n: usize,
    p: usize,
}

impl fmt::Debug for ConstraintMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ConstraintKind::Sphere => "sphere",
            ConstraintKind::Affine { .. } => "affine",
            ConstraintKind::UserSmooth { .. } => "user",
        };
        f.debug_struct("ConstraintMap")
            .field("kind", &kind)
            .field("n", &self.n)
            .field("p", &self.p)
            .finish()
    }
}

impl ConstraintMap {
    pub fn sphere(n: usize) -> Self {
        Self {
            kind: ConstraintKind::Sphere,
            n,
            p: 1,
        }
    }

    /// `B^T x = b` for an `n x p` matrix `B` of full column rank.
    pub fn affine(jacobian: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        check_len(jacobian.ncols(), rhs.len())?;
        let qr = ThinQr::new(&jacobian)?;
        Ok(Self {
            n: jacobian.nrows(),
            p: jacobian.ncols(),
            kind: ConstraintKind::Affine { jacobian, rhs, qr },
        })
    }

    /// No equality constraints at all (`p = 0`).
    pub fn unconstrained(n: usize) -> Self {
        Self::affine(DMatrix::zeros(n, 0), DVector::zeros(0)).expect("empty constraint map")
    }

    pub fn user_smooth(
        n: usize,
        p: usize,
        value: impl Fn(&DVector<f64>) -> std::result::Result<DVector<f64>, String>
            + Send
            + Sync
            + 'static,
        jacobian: impl Fn(&DVector<f64>) -> std::result::Result<DMatrix<f64>, String>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        Self {
            kind: ConstraintKind::UserSmooth {
                value: Arc::new(value),
                jacobian: Arc::new(jacobian),
            },
            n,
            p,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_constraints(&self) -> usize {
        self.p
    }

    pub fn evaluate_c(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.n, x.len())?;
        match &self.kind {
            ConstraintKind::Sphere => Ok(DVector::from_element(1, x.norm_squared() - 1.0)),
            ConstraintKind::Affine { jacobian, rhs, .. } => Ok(jacobian.tr_mul(x) - rhs),
            ConstraintKind::UserSmooth { value, .. } => {
                let c = value(x).map_err(FbseError::Callback)?;
                check_len(self.p, c.len())?;
                Ok(c)
            }
        }
    }

    /// `n x p` matrix whose columns are the constraint gradients.
    pub fn evaluate_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len(self.n, x.len())?;
        match &self.kind {
            ConstraintKind::Sphere => {
                Ok(DMatrix::from_column_slice(self.n, 1, (x * 2.0).as_slice()))
            }
            ConstraintKind::Affine { jacobian, .. } => Ok(jacobian.clone()),
            ConstraintKind::UserSmooth { jacobian, .. } => {
                let j = jacobian(x).map_err(FbseError::Callback)?;
                if j.nrows() != self.n || j.ncols() != self.p {
                    return Err(FbseError::InvalidInput(format!(
                        "Jacobian callback returned {}x{}, expected {}x{}",
                        j.nrows(),
                        j.ncols(),
                        self.n,
                        self.p
                    )));
                }
                Ok(j)
            }
        }
    }

    /// Factorization of the Jacobian at `x`, failing when it is numerically
    /// rank deficient.
    pub fn jacobian_qr(&self, x: &DVector<f64>) -> Result<ThinQr> {
        match &self.kind {
            ConstraintKind::Affine { qr, .. } => {
                check_len(self.n, x.len())?;
                Ok(qr.clone())
            }
            _ => ThinQr::new(&self.evaluate_jacobian(x)?),
        }
    }

    /// `(I - grad c grad c^+) v`, the orthogonal projection of `v` onto the
    /// tangent space `null(grad c(x)^T)`.
    pub fn tangent_project(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.n, v.len())?;
        Ok(self.jacobian_qr(x)?.project_out(v))
    }

    /// Projection onto `{c = 0}`: exact for the sphere and affine maps,
    /// Gauss-Newton restoration for user constraints.
    pub fn project_to_manifold(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.n, x.len())?;
        match &self.kind {
            ConstraintKind::Sphere => {
                let nrm = x.norm();
                if nrm == 0.0 || !nrm.is_finite() {
                    return Err(FbseError::ZeroPoint);
                }
                Ok(x / nrm)
            }
            ConstraintKind::Affine { jacobian, rhs, qr } => {
                let r = jacobian.tr_mul(x) - rhs;
                Ok(x - qr.min_norm_solution(&r))
            }
            ConstraintKind::UserSmooth { .. } => self.gauss_newton(x),
        }
    }

    fn gauss_newton(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut y = x.clone();
        let mut residual = f64::INFINITY;
        for _ in 0..=RESTORATION_MAX_ITER {
            let c = self.evaluate_c(&y)?;
            residual = c.norm();
            if residual <= RESTORATION_TOL {
                return Ok(y);
            }
            if !residual.is_finite() {
                break;
            }
            let qr = self.jacobian_qr(&y)?;
            y -= qr.min_norm_solution(&c);
        }
        Err(FbseError::RestorationFailure { residual })
    }
}
