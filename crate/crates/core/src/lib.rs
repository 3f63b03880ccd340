//! Numerical checks of first- and second-order necessary optimality
//! conditions for optimal control on Riemannian manifolds.
//!
//! [`problem::ProblemFile`] parses a problem, [`pipeline::run`] analyses it
//! and returns a [`report::Report`] with a verdict and its evidence.

pub mod conditions;
pub mod cones;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod expr;
pub mod geometry;
pub mod optproblem;
pub mod pipeline;
pub mod polycone;
pub mod problem;
pub mod report;
pub mod smooth;

pub use error::{Error, Result};
pub use exec::Exec;
