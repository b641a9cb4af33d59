//! Side-chain positioning through a facially reduced doubly nonnegative
//! relaxation, solved by projected Peaceman-Rachford splitting, with dual
//! lower bounds and rounded upper bounds that certify global optimality
//! when they meet.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

// Parameter checks use `!(a <= b)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod instance;
pub mod lifting;
pub mod oracle;
pub mod projections;
pub mod report;
pub mod scalar;
pub mod solver;

pub use bounds::{lower_bound, relative_gap, round_to_feasible, upper_bound, BoundRecord, UpperSource};
pub use error::{Error, Result};
pub use instance::{
    is_feasible, objective, parse_instance, random_instance, serialize_instance, Assignment, EnergyMatrix,
    RotamerPartition, ScpInstance,
};
pub use lifting::LiftedGeometry;
pub use oracle::{brute_force, goldstein_reduce, DeeReduction, OracleResult};
pub use scalar::Real;
pub use solver::{default_params, solve, Prsm, SolveReport, SolverParams, SolverState, Termination, UpperStrategy};

pub type Instance64 = ScpInstance<f64>;
pub type Instance32 = ScpInstance<f32>;
pub type Params64 = SolverParams<f64>;
pub type Params32 = SolverParams<f32>;
pub type Report64 = SolveReport<f64>;
pub type Report32 = SolveReport<f32>;
pub type Geometry64 = LiftedGeometry<f64>;
pub type Geometry32 = LiftedGeometry<f32>;
