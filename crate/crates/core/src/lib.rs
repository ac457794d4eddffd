//! Low-rank time-dependent-basis solvers for stochastic PDEs.
//!
//! The crate solves stochastic PDEs with stochastic Dirichlet, Neumann and
//! Robin boundary conditions three ways and cross-checks them:
//!
//! - a full-order probabilistic-collocation reference (one deterministic
//!   solve per random sample),
//! - the dynamically bi-orthonormal (DBO) low-rank factorization
//!   `V = U S Y'`,
//! - the dynamically orthogonal (DO) factorization `V = U Y'`.
//!
//! Stochastic boundary data enters through a time-differentiated constraint
//! folded into the semi-discrete right-hand side, so the low-rank factor
//! equations need no special boundary handling and the spatial modes keep
//! their weighted orthonormality. Instantaneous Karhunen-Loeve snapshots of
//! the reference solution provide the optimality baseline, and the metrics
//! module implements the global and per-boundary-type error measures.

pub mod bench;
pub mod error;
pub mod fom;
pub mod grid;
pub mod kernels;
pub mod kloracle;
pub mod lowrank;
pub mod metrics;
pub mod rng;
pub mod stochastic;

pub use error::{Error, Result};
