//! Numerical toolkit for mappings with bounded (p,q)-distortion on the
//! abelian groups ℝⁿ and the Heisenberg groups ℍⁿ.
//!
//! The crate provides group arithmetic, grid calculus, a variational
//! p-capacity solver, a zoo of analytic mappings, push-forward operators
//! and numerical checks of the capacity and norm inequalities satisfied
//! by such mappings.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod calculus;
pub mod capacity;
pub mod discrete;
pub mod error;
pub mod grid;
pub mod group;
pub mod mapping;
pub mod pushforward;
pub mod report;
pub mod runner;
pub mod stats;
pub mod verify;
pub mod zoo;

pub use error::{Error, Result};
pub use grid::{Domain, Grid, GridFunction, Region};
pub use group::{Group, GroupKind, Point};
pub use mapping::{MapRef, Mapping};
pub use report::VerificationReport;
