//! Numerical workbench for the Kirchhoff-type problem
//!
//! ```text
//! −(a∫|∇u|² + 1)Δu + μV(x)u = λ f(x)u + g(x)|u|^{p−2}u   in ℝ^N
//! ```
//!
//! with a steep potential well `μV` vanishing on a bounded set Ω. The crate
//! discretizes the problem by finite differences, solves the associated
//! weighted eigenproblems, evaluates the explicit constants of the
//! existence theory, and searches for positive solutions by constrained
//! minimization, a discrete mountain-pass method, Newton refinement,
//! deflation and pseudo-arclength continuation.

pub mod constants;
pub mod continuation;
pub mod eigen;
pub mod error;
pub mod functional;
pub mod grid;
mod linalg;
mod optim;
pub mod problem;
pub mod rng;
pub mod solvers;
pub mod verify;

pub use eigen::{EigenOptions, EigenPair};
pub use error::{Error, Result};
pub use functional::EnergyBreakdown;
pub use grid::{build_grid, Field, Grid, GridSpec, Mode};
pub use linalg::Tridiagonal;
pub use problem::{canonical_problem, Canonical, Model, ProblemSpec, Sampler, Shape, Well};
