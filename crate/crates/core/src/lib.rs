//! Randomized Kaczmarz iteration with a mismatched adjoint.
//!
//! The update `x <- x - (<a_i, x> - b_i) / <a_i, v_i> * v_i` replaces the
//! transpose `A^T` used by the classical randomized Kaczmarz method with the
//! rows of a second matrix `V`. This crate provides the iteration itself,
//! the spectral quantities that govern its convergence, estimates of the
//! error floor for noisy right-hand sides, the analysis restricted to
//! `range(V^T)` for underdetermined systems, and projected super/subgradient
//! methods that tune the row-selection probabilities.
//!
//! Everything is dense and dependency-light: the eigen- and singular value
//! routines used by the diagnostics live in [`linalg`].

pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod probopt;
pub mod problems;
pub mod sampling;
pub mod solver;

pub use diagnostics::{RateDiagnostics, ScalingPair};
pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use sampling::{DiscreteSampler, ProbabilityVector, RngState};
pub use solver::{SolverConfig, Start, StepRule, SystemPair, Trace};
