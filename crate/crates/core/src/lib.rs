//! Robust counterparts of uncertain linear complementarity problems.
//!
//! The crate converts an uncertain LCP `0 <= x ⊥ M(u)x + q(u) >= 0, u ∈ U`
//! into a deterministic program that minimizes the worst-case gap over `U`,
//! solves convex counterparts with an interior-point backend, and globally
//! solves nonconvex counterparts with a secant-relaxation spatial
//! branch-and-bound.
//!
//! Module map:
//! - [`model`]: problem data, uncertainty sets, gap and residual metrics.
//! - [`program_ir`]: solver-agnostic program representation and SDPA I/O.
//! - [`solver`]: conic backend, independent checker, local multistart, external SDP.
//! - [`reformulate`]: robust-counterpart builders and routing.
//! - [`bnb`]: spatial branch-and-bound for the nonconvex counterparts.
//! - [`harness`]: case-study builders, ERM baselines and experiments.

#[cfg(feature = "sdp")]
extern crate openblas_src;

pub mod bnb;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod program_ir;
pub mod reformulate;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    AffineFamily, ConeBlock, Definiteness, ExtReal, Probe, ResidualReport, Shift, UncertainLcp,
    UncertaintySet,
};
pub use program_ir::{MathProgram, SolutionPoint, SolveStatus, VarId};
pub use reformulate::{RcArtifact, Route};

/// Dense matrix type used throughout the crate.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense vector type used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
