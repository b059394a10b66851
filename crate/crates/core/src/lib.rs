//! Augmented Lagrangian method for optimal control of a parabolic equation
//! under a pointwise state constraint `y <= psi`, with distributed and
//! Neumann boundary controls.
//!
//! The discretization is a vertex-centered finite-volume stencil in space
//! and implicit Euler in time. Sub-problems are solved by the method of
//! successive approximations (`msa`); the outer loop (`alm`) updates the
//! multiplier only after steps that shrink the residual index.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alm;
pub mod cost;
pub mod dump;
pub mod error;
pub mod field;
pub mod mesh;
pub mod msa;
pub mod operator;
pub mod oracle;
pub mod parabolic;
pub mod presets;
pub mod subproblem;

pub use alm::{
    alm_run, alm_run_from, alm_step, AlmConfig, AlmState, AlmTrace, FailureUpdate, OuterRecord, Termination,
};
pub use cost::{
    augmented_lagrangian, complementarity, cost_j, feasibility, kkt_residuals, multiplier_candidate, residual_index,
    KktResiduals, ProblemSpec,
};
pub use error::{Error, Result};
pub use field::{BoundaryTimeField, ControlBounds, NodalField, SpaceField, TimeField};
pub use mesh::{Mesh, Side};
pub use msa::{msa_solve, MsaConfig, MsaResult, UpdateMode};
pub use operator::{DiffusionCoefficients, DiscreteOperator};
pub use oracle::OracleReport;
pub use parabolic::{solve_adjoint, solve_forward};
pub use presets::Preset;
