//! Forward-backward semi-envelope for constrained optimization.
//!
//! The crate solves
//!
//! ```text
//! min f(x)   s.t.  x in X,  c(x) = 0
//! ```
//!
//! for a closed convex set `X` with a cheap projection and smooth equality
//! constraints `c`. The convex constraint is absorbed into a continuously
//! differentiable envelope `psi` while `c(x) = 0` is kept explicit, which
//! turns the problem into smooth equality-constrained minimization. A
//! projected inexact gradient method with Barzilai-Borwein steps and a
//! nonmonotone line search solves the reformulation without second-order
//! information.
//!
//! Modules, bottom up:
//!
//! * [`sets`]: projections, distances and normal directions for the supported
//!   convex sets.
//! * [`projective`]: the projective mappings `Q(x)` attached to each set.
//! * [`manifold`]: constraint values, Jacobians, tangent projection and the
//!   projection onto `{c = 0}`.
//! * [`envelope`]: `tau`, `J`, the dissolving map, the forward-backward step,
//!   `psi` and its gradient.
//! * [`solver`]: the projected gradient method and its diagnostics.
//! * [`problems`]: seeded instance generators.
//! * [`checks`]: sampled invariant suites used by tests and the CLI.
//!
//! ```
//! use fbse::problems::{benchmark_options, toy_problem, toy_solution};
//! use fbse::solver::{pgd_solve, SolveStatus};
//! use nalgebra::DVector;
//!
//! let a = DVector::from_vec(vec![2.0, 0.0]);
//! let prob = toy_problem(&a).unwrap();
//! let opts = benchmark_options(prob.config.mu, 1e-5);
//! let out = pgd_solve(&prob, &DVector::from_vec(vec![0.6, 0.8]), &opts).unwrap();
//! assert_eq!(out.status, SolveStatus::Converged);
//! assert!((out.y_final - toy_solution(&a)).norm() < 1e-6);
//! ```

pub mod checks;
pub mod envelope;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod problems;
pub mod projective;
pub mod random;
pub mod sets;
pub mod solver;

pub use envelope::{EnvelopeConfig, FbseProblem, Objective};
pub use error::{FbseError, Result};
pub use manifold::ConstraintMap;
pub use projective::ProjectiveOperator;
pub use sets::ConvexSet;
pub use solver::{pgd_solve, SolveResult, SolveStatus, SolverOptions, StopRule};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/sets.md")]
    pub struct Sets;
    #[doc = include_str!("../../../book/src/projective.md")]
    pub struct Projective;
    #[doc = include_str!("../../../book/src/constraints.md")]
    pub struct Constraints;
    #[doc = include_str!("../../../book/src/envelope.md")]
    pub struct Envelope;
    #[doc = include_str!("../../../book/src/solver.md")]
    pub struct Solver;
    #[doc = include_str!("../../../book/src/problems.md")]
    pub struct Problems;
    #[doc = include_str!("../../../book/src/checks.md")]
    pub struct Checks;
}
