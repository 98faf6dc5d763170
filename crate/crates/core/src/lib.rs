//! Alternating linearization (ALIN) for structured regularization problems
//!
//! Minimizes `½‖y − Xβ‖² + λ‖Rβ‖₁` by alternating between a penalty
//! subproblem (solved through its box-constrained dual) and a loss
//! subproblem (solved by preconditioned conjugate gradients), with a
//! descent test deciding when the incumbent moves.
//!
//! Everything is matrix-free on top of [`SparseMatrix`]: the solvers only
//! ever apply `X`, `Xᵀ`, `R` and `Rᵀ`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alin;
pub mod boxqp;
mod error;
pub mod io;
pub mod operator;
pub mod pcg;
pub mod penalties;
pub mod sparse;
pub mod vecops;

pub use alin::{
    AlinConfig, AlinOutcome, AlinSolver, AlinState, IterationRecord, PenaltySpec, Problem,
    RunStatus, Variant,
};
pub use boxqp::{BoxDomain, BoxQpConfig, BoxQpResult, BoxQpStatus, FacePartition};
pub use error::{Error, Result};
pub use operator::LinearOperator;
pub use pcg::{PcgConfig, PcgOutcome, PcgStatus};
pub use penalties::GridShape;
pub use sparse::{DiagonalScaling, SparseMatrix};
