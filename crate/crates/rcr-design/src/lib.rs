//! Optimal approximate designs for multiple-group random coefficient
//! regression, with certified optimality.
//!
//! A study observes several groups of units. Every unit of group i is measured
//! m_i times at settings chosen from that group's finite grid; its own
//! coefficient vector scatters around a common mean β₀ with dispersion D_i,
//! and measurements carry noise with covariance Σ_i. A *group design* assigns
//! weights to the grid points of one group; the quality of the pooled estimate
//! of β₀ depends on all group designs simultaneously through
//!
//! ```text
//! Cov(β̂₀) = S⁻¹,   S = Σ_i n_i·m_i·(M_i(ξ_i)⁻¹ + m_i·D_i)⁻¹,
//! ```
//!
//! where M_i is the per-observation moment matrix of group i's design. This
//! crate minimizes smooth convex criteria of that covariance — D (log
//! determinant), A, c, weighted-trace L, and integrated prediction variance —
//! jointly over all group designs, and certifies candidate optima by an
//! equivalence theorem: at an optimum, per-point directional derivatives are
//! nonnegative everywhere and zero on the support.
//!
//! Module map:
//!
//! - [`model`]: grids, group specifications, designs, moment matrices, the
//!   compound problem type.
//! - [`criteria`]: criterion values, gradients, per-point sensitivities, the
//!   equivalence gap, and the covariance itself.
//! - [`solver`]: simplex-constrained first-order solvers (vertex-direction
//!   with away steps, multiplicative weights, projected gradient), exact line
//!   search, deterministic restarts, and detection of problems whose optimum
//!   is not attained (infimum at a singular boundary).
//! - [`verify`]: equivalence-theorem certificates with per-point slack
//!   reports, randomized saddle checks, and the identical-groups reduction
//!   that replaces a compound solve by a single-group solve.
//! - [`estimate`]: the pooled best linear unbiased estimator the designs are
//!   optimized for, plus Monte Carlo validation that its empirical covariance
//!   matches the design-criterion covariance.
//! - [`straightline`]: closed-form criteria for two-group straight-line
//!   regression (the worked analytic family) and reproduction of its published
//!   optimal-design tables.
//! - [`io`]: JSON problem/design documents, canonical artifact serialization,
//!   atomic writes.
//! - [`linalg`]: the small dense symmetric kernel (Cholesky, inverses, traces)
//!   everything above rests on.
//!
//! Runnable walkthroughs live in `examples/`; the `rcr-design` binary wraps
//! the same entry points as subcommands (`solve`, `verify`, `eval`, `tables`,
//! `simulate`, `gap`).

pub mod criteria;
pub mod error;
pub mod estimate;
pub mod io;
pub mod linalg;
pub mod model;
pub mod solver;
pub mod straightline;
pub mod verify;

pub use error::{Error, Result};
