//! Dense linear-algebra helpers shared by the set, operator and manifold code.
//!
//! Matrix-valued points are stored as flat vectors through column stacking of
//! the full `n x n` matrix, which is exactly nalgebra's storage order, so
//! [`reshape`] and [`vectorize`] are copies with no index shuffling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{FbseError, Result};

/// Column-stacked vector of length `side * side` viewed as a square matrix.
pub fn reshape(v: &DVector<f64>, side: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(side, side, v.as_slice())
}

/// Column-stacking vectorization of a matrix.
pub fn vectorize(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// `(M + M^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric eigendecomposition; the input is symmetrized first.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let s = symmetrize(m);
    let norm = s.norm();
    if !norm.is_finite() {
        return Err(FbseError::EigenFailure { norm });
    }
    SymmetricEigen::try_new(s, f64::EPSILON, 100_000).ok_or(FbseError::EigenFailure { norm })
}

/// `U diag(g(lambda)) U^T` for an eigendecomposition `(U, lambda)`.
pub fn spectral_map(
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    g: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let w = g(lam);
        scaled.column_mut(j).scale_mut(w);
    }
    let out = scaled * u.transpose();
    symmetrize(&out)
}

/// Relative rank tolerance used to declare a Jacobian rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Thin QR factorization of a tall `n x p` matrix with a rank check.
///
/// All pseudo-inverse applications in the crate go through this type: the
/// orthogonal factor gives the range projector and the triangular factor is
/// used for the normal-equation solves without ever forming `(A^T A)^{-1}`.
#[derive(Debug, Clone)]
pub struct ThinQr {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl ThinQr {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let p = a.ncols();
        if p == 0 {
            return Ok(Self {
                q: DMatrix::zeros(a.nrows(), 0),
                r: DMatrix::zeros(0, 0),
            });
        }
        if a.nrows() < p {
            return Err(FbseError::RankDeficient {
                sigma_min: 0.0,
                sigma_max: a.norm(),
            });
        }
        let qr = a.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let sv = r.singular_values();
        let sigma_max = sv.max();
        let sigma_min = sv.min();
        if !(sigma_min.is_finite() && sigma_max.is_finite())
            || sigma_max == 0.0
            || sigma_min < RANK_TOL * sigma_max
        {
            return Err(FbseError::RankDeficient {
                sigma_min,
                sigma_max,
            });
        }
        Ok(Self { q, r })
    }

    pub fn ncols(&self) -> usize {
        self.r.ncols()
    }

    /// `(I - A A^+) v`.
    pub fn project_out(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.ncols() == 0 {
            return v.clone();
        }
        let coef = self.q.tr_mul(v);
        v - &self.q * coef
    }

    /// Least-squares coefficients `argmin_l ||A l - v||`.
    pub fn solve_ls(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.ncols() == 0 {
            return DVector::zeros(0);
        }
        let qtv = self.q.tr_mul(v);
        self.r
            .solve_upper_triangular(&qtv)
            .expect("triangular factor checked nonsingular")
    }

    /// Minimum-norm `d` with `A^T d = rhs`, i.e. `A (A^T A)^{-1} rhs`.
    pub fn min_norm_solution(&self, rhs: &DVector<f64>) -> DVector<f64> {
        if self.ncols() == 0 {
            return DVector::zeros(self.q.nrows());
        }
        let z = self
            .r
            .tr_solve_upper_triangular(rhs)
            .expect("triangular factor checked nonsingular");
        &self.q * z
    }
}

/// Largest absolute eigenvalue of a symmetric linear operator by Lanczos
/// iteration with full reorthogonalization.
///
/// Stops once the extreme Ritz values are stable to `1e-14` relative over a
/// block of steps, or when the Krylov space is exhausted.
pub fn lanczos_spectral_norm(
    dim: usize,
    start: &DVector<f64>,
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let max_steps = dim.min(400);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(max_steps);
    let mut alphas: Vec<f64> = Vec::with_capacity(max_steps);
    let mut betas: Vec<f64> = Vec::with_capacity(max_steps);
    let mut q = start.clone();
    let nrm = q.norm();
    if nrm == 0.0 {
        q = DVector::from_element(dim, 1.0 / (dim as f64).sqrt());
    } else {
        q /= nrm;
    }
    let mut last = f64::NAN;
    let mut stable = 0usize;
    for step in 0..max_steps {
        let mut w = apply(&q);
        let alpha = q.dot(&w);
        w.axpy(-alpha, &q, 1.0);
        if let Some(prev) = basis.last() {
            w.axpy(-betas[step - 1], prev, 1.0);
        }
        basis.push(q.clone());
        alphas.push(alpha);
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let beta = w.norm();
        let k = alphas.len();
        if k.is_multiple_of(5) || beta <= 1e-14 * alpha.abs().max(1.0) || k == max_steps {
            let mut tri = DMatrix::<f64>::zeros(k, k);
            for i in 0..k {
                tri[(i, i)] = alphas[i];
                if i + 1 < k {
                    tri[(i, i + 1)] = betas[i];
                    tri[(i + 1, i)] = betas[i];
                }
            }
            let ev = tri.symmetric_eigenvalues();
            let est = ev.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            if (est - last).abs() <= 1e-14 * est {
                stable += 1;
                if stable >= 2 {
                    return est;
                }
            } else {
                stable = 0;
            }
            last = est;
        }
        if beta <= 1e-14 * alpha.abs().max(1.0) {
            return last;
        }
        betas.push(beta);
        q = w / beta;
    }
    last
}
