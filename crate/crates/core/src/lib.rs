//! Numerical workbench for unrestricted K-moment problems.
//!
//! Given a regular closed set `K ⊆ R^d`, the unrestricted K-moment problem asks
//! whether *every* real multi-sequence `(c_α)` is the moment sequence of a
//! Schwartz (or Gelfand-Shilov) function supported in `K`. This crate provides
//! the computable pieces of that theory:
//!
//! * [`weights`]: weight sequences `M_p`, the associated function
//!   `ν_M(t) = inf_p t^p M_p / p!`, its inverse, and the structural conditions
//!   (log-convexity, non-quasianalyticity, (M.2), (M.3)).
//! * [`sets`]: parametric regular closed sets with exact boundary distance.
//! * [`growth`]: polynomials and growth-space membership verdicts.
//! * [`criteria`]: solvability decision procedures for structured sets.
//! * [`bumps`]: ultradifferentiable cutoff functions, partitions of unity and
//!   weighted norms, measured on a grid.
//! * [`solver`]: a finite-truncation moment solver that synthesizes a function
//!   supported in `K` with prescribed moments.
//!
//! All verdicts on "sup = ∞" questions are finite-horizon classifications and
//! carry the statistics they were derived from.

pub mod bumps;
pub mod criteria;
pub mod error;
pub mod expr;
pub mod growth;
pub mod io;
pub mod linalg;
pub mod par;
pub mod quad;
pub mod sets;
pub mod solver;
pub mod trend;
pub mod weights;

pub use error::{Error, Result};
