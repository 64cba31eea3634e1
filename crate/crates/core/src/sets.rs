//! Closed convex sets with exact Euclidean projections.
//!
//! Four families are supported: the nonnegative orthant, a Euclidean ball
//! centred at the origin, the probability simplex and the positive
//! semidefinite cone intersected with an operator-norm cap. Matrix points of
//! the capped cone are flat column-stacked vectors of length `side^2`; the set
//! lives inside the symmetric subspace, so skew-symmetric directions are part
//! of its normal cone.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, FbseError, Result};
use crate::linalg::{reshape, spectral_map, sym_eigen, vectorize};
use crate::random;

/// Absolute tolerance for declaring a coordinate or eigenvalue active.
pub const ACTIVE_TOL: f64 = 1e-8;

/// Tolerance for the membership precondition of normal-direction sampling.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetKind {
    /// `{x >= 0}`.
    Box,
    /// `{||x|| <= radius}`.
    Ball { radius: f64 },
    /// `{x >= 0, sum x = 1}`.
    Simplex,
    /// `{X symmetric, X >= 0, ||X||_2 <= cap}`.
    PsdCap { cap: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexSet {
    pub kind: SetKind,
    /// Vector length, or the matrix side for [`SetKind::PsdCap`].
    pub dim: usize,
}

impl ConvexSet {
    pub fn nonneg_orthant(n: usize) -> Self {
        Self {
            kind: SetKind::Box,
            dim: n,
        }
    }

    pub fn ball(n: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(FbseError::InvalidInput(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            kind: SetKind::Ball { radius },
            dim: n,
        })
    }

    pub fn simplex(n: usize) -> Self {
        Self {
            kind: SetKind::Simplex,
            dim: n,
        }
    }

    pub fn psd_cap(side: usize, cap: f64) -> Result<Self> {
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(FbseError::InvalidInput(format!(
                "operator-norm cap must be positive, got {cap}"
            )));
        }
        Ok(Self {
            kind: SetKind::PsdCap { cap },
            dim: side,
        })
    }

    /// Length of the flat vectors this set acts on.
    pub fn ambient_len(&self) -> usize {
        match self.kind {
            SetKind::PsdCap { .. } => self.dim * self.dim,
            _ => self.dim,
        }
    }

    /// Euclidean (Frobenius for matrices) projection onto the set.
    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.ambient_len(), v.len())?;
        Ok(match self.kind {
            SetKind::Box => v.map(|t| t.max(0.0)),
            SetKind::Ball { radius } => {
                let nrm = v.norm();
                if nrm <= radius {
                    v.clone()
                } else {
                    v * (radius / nrm)
                }
            }
            SetKind::Simplex => project_simplex(v),
            SetKind::PsdCap { cap } => {
                let eig = sym_eigen(&reshape(v, self.dim))?;
                vectorize(&spectral_map(&eig, |l| l.clamp(0.0, cap)))
            }
        })
    }

    pub fn distance(&self, v: &DVector<f64>) -> Result<f64> {
        let p = self.project(v)?;
        Ok((v - p).norm())
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.distance(v)? <= tol)
    }

    /// Unit vectors spanning the normal cone at `x`, followed by `count`
    /// random nonnegative combinations of them.
    ///
    /// Returns an empty list at interior points. Activity uses the absolute
    /// tolerance [`ACTIVE_TOL`].
    pub fn sample_normal_directions(
        &self,
        x: &DVector<f64>,
        count: usize,
        rng_seed: u64,
    ) -> Result<Vec<DVector<f64>>> {
        let distance = self.distance(x)?;
        if distance > MEMBERSHIP_TOL {
            return Err(FbseError::NotInSet { distance });
        }
        let gens = self.normal_generators(x)?;
        let mut out: Vec<DVector<f64>> = gens.iter().map(|g| g.dir.clone()).collect();
        if gens.is_empty() {
            return Ok(out);
        }
        let mut rng = random::stream(rng_seed, "normal-directions");
        let len = self.ambient_len();
        while out.len() < gens.len() + count {
            let mut d = DVector::zeros(len);
            for g in &gens {
                let w: f64 = rng.sample(rand_distr::StandardNormal);
                let w = if g.two_sided { w } else { w.abs() };
                d.axpy(w, &g.dir, 1.0);
            }
            let nrm = d.norm();
            if nrm > 1e-12 {
                out.push(d / nrm);
            }
        }
        Ok(out)
    }

    fn normal_generators(&self, x: &DVector<f64>) -> Result<Vec<Generator>> {
        let n = self.ambient_len();
        let unit = |i: usize, s: f64| {
            let mut e = DVector::zeros(n);
            e[i] = s;
            e
        };
        let mut gens = Vec::new();
        match self.kind {
            SetKind::Box => {
                for i in (0..n).filter(|&i| x[i] <= ACTIVE_TOL) {
                    gens.push(Generator::ray(unit(i, -1.0)));
                }
            }
            SetKind::Ball { radius } => {
                let nrm = x.norm();
                if (nrm - radius).abs() <= ACTIVE_TOL && nrm > 0.0 {
                    gens.push(Generator::ray(x / nrm));
                }
            }
            SetKind::Simplex => {
                gens.push(Generator {
                    dir: DVector::from_element(n, 1.0 / (n as f64).sqrt()),
                    two_sided: true,
                });
                for i in (0..n).filter(|&i| x[i] <= ACTIVE_TOL) {
                    gens.push(Generator::ray(unit(i, -1.0)));
                }
            }
            SetKind::PsdCap { cap } => {
                let side = self.dim;
                let eig = sym_eigen(&reshape(x, side))?;
                for (j, &lam) in eig.eigenvalues.iter().enumerate() {
                    let u = eig.eigenvectors.column(j);
                    let outer = vectorize(&(u * u.transpose()));
                    if lam.abs() <= ACTIVE_TOL {
                        gens.push(Generator::ray(-outer));
                    } else if (lam - cap).abs() <= ACTIVE_TOL * cap.max(1.0) {
                        gens.push(Generator::ray(outer));
                    }
                }
                let s = std::f64::consts::FRAC_1_SQRT_2;
                for i in 0..side {
                    for j in (i + 1)..side {
                        let mut k = DMatrix::zeros(side, side);
                        k[(i, j)] = s;
                        k[(j, i)] = -s;
                        gens.push(Generator {
                            dir: vectorize(&k),
                            two_sided: true,
                        });
                    }
                }
            }
        }
        Ok(gens)
    }
}

struct Generator {
    dir: DVector<f64>,
    two_sided: bool,
}

impl Generator {
    fn ray(dir: DVector<f64>) -> Self {
        Self {
            dir,
            two_sided: false,
        }
    }
}

/// Projection onto the probability simplex by sorting and thresholding.
fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    if n == 0 {
        return v.clone();
    }
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.map(|t| (t - theta).max(0.0))
}
