//! Projective mappings `Q(x)`: positive semidefinite operator fields whose
//! null space at a point of the set is spanned by the normal cone there.
//!
//! | set               | `Q(x) d`                                       |
//! |-------------------|------------------------------------------------|
//! | `x >= 0`          | `x^2 .* d`                                     |
//! | `||x|| <= u`      | `(1 + ||x/u||^4)/2 d - x <x, d> / u^2`         |
//! | simplex           | `(Diag(x) - x x^T)^2 d`                        |
//! | capped PSD cone   | `Phi(X^2 Theta_M(X)^2 Phi(D))`                 |
//!
//! `Phi` is symmetrization and `Theta_M` is the spectral cutoff built from
//! [`theta_scalar`]. Operators are applied matrix-free; the capped cone caches
//! a single eigendecomposition of the base point.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Result};
use crate::linalg::{reshape, spectral_map, sym_eigen, symmetrize, vectorize};
use crate::sets::{ConvexSet, SetKind};

type LinearMap = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// The linear map `d -> Q(x) d` anchored at a base point.
#[derive(Clone)]
pub struct ProjectiveOperator {
    len: usize,
    kind: OperatorKind,
}

#[derive(Clone)]
enum OperatorKind {
    Diagonal(DVector<f64>),
    Ball {
        x: DVector<f64>,
        scale: f64,
        inv_u2: f64,
    },
    Simplex(DVector<f64>),
    Psd {
        side: usize,
        weight: DMatrix<f64>,
    },
    Custom(LinearMap),
}

impl fmt::Debug for ProjectiveOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            OperatorKind::Diagonal(_) => "diagonal",
            OperatorKind::Ball { .. } => "ball",
            OperatorKind::Simplex(_) => "simplex",
            OperatorKind::Psd { .. } => "psd",
            OperatorKind::Custom(_) => "custom",
        };
        f.debug_struct("ProjectiveOperator")
            .field("len", &self.len)
            .field("kind", &kind)
            .finish()
    }
}

/// Projective mapping of `set` anchored at `x`. `x` may lie outside the set.
pub fn make_projective(set: &ConvexSet, x: &DVector<f64>) -> Result<ProjectiveOperator> {
    let len = set.ambient_len();
    check_len(len, x.len())?;
    let kind = match set.kind {
        SetKind::Box => OperatorKind::Diagonal(x.component_mul(x)),
        SetKind::Ball { radius } => {
            let r = x.norm() / radius;
            OperatorKind::Ball {
                x: x.clone(),
                scale: 0.5 * (1.0 + r.powi(4)),
                inv_u2: 1.0 / (radius * radius),
            }
        }
        SetKind::Simplex => OperatorKind::Simplex(x.clone()),
        SetKind::PsdCap { cap } => {
            let side = set.dim;
            let eig = sym_eigen(&reshape(x, side))?;
            // X^2 Theta(X)^2 shares the eigenvectors of X
            let weight = spectral_map(&eig, |l| {
                let t = theta_scalar(l, cap);
                l * l * t * t
            });
            OperatorKind::Psd { side, weight }
        }
    };
    Ok(ProjectiveOperator { len, kind })
}

impl ProjectiveOperator {
    /// Wrap an arbitrary self-adjoint PSD map.
    pub fn from_fn(
        len: usize,
        f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            len,
            kind: OperatorKind::Custom(Arc::new(f)),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `Q(x) d`.
    pub fn apply(&self, d: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.len, d.len())?;
        Ok(match &self.kind {
            OperatorKind::Diagonal(w) => w.component_mul(d),
            OperatorKind::Ball { x, scale, inv_u2 } => d * *scale - x * (x.dot(d) * inv_u2),
            OperatorKind::Simplex(x) => {
                let once = simplex_factor(x, d);
                simplex_factor(x, &once)
            }
            OperatorKind::Psd { side, weight } => {
                let dm = symmetrize(&reshape(d, *side));
                vectorize(&symmetrize(&(weight * dm)))
            }
            OperatorKind::Custom(f) => f(d),
        })
    }

    /// Apply to every column of `m`.
    pub fn apply_columns(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            let col = self.apply(&m.column(j).into_owned())?;
            out.set_column(j, &col);
        }
        Ok(out)
    }

    /// Dense `len x len` matrix of the operator, for diagnostics on small
    /// problems.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        self.apply_columns(&DMatrix::identity(self.len, self.len))
    }
}

/// `(Diag(x) - x x^T) d`.
fn simplex_factor(x: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
    x.component_mul(d) - x * x.dot(d)
}

/// The C^1 cubic cutoff: 1 up to `cap - 1`, 0 beyond `cap`, and
/// `2 s^3 - 3 s^2 + 1` with `s = t - (cap - 1)` in between.
pub fn theta_scalar(t: f64, cap: f64) -> f64 {
    let s = t - (cap - 1.0);
    if s <= 0.0 {
        1.0
    } else if s > 1.0 {
        0.0
    } else {
        let s = s.clamp(0.0, 1.0);
        2.0 * s * s * s - 3.0 * s * s + 1.0
    }
}

/// Spectral application of [`theta_scalar`] to a symmetric matrix.
pub fn theta_matrix(x: &DMatrix<f64>, cap: f64) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(x)?;
    Ok(spectral_map(&eig, |l| theta_scalar(l, cap)))
}

/// Build `x -> Qhat(x)^2` from a self-adjoint operator field `Qhat`.
///
/// The squared field is positive semidefinite and shares the null space of
/// `Qhat`.
pub fn square_construction<F, G>(qhat: F) -> impl Fn(&DVector<f64>) -> ProjectiveOperator
where
    F: Fn(&DVector<f64>) -> G,
    G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
{
    move |x: &DVector<f64>| {
        let g = qhat(x);
        ProjectiveOperator::from_fn(x.len(), move |d| g(&g(d)))
    }
}
