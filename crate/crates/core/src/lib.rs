//! Flows of non-null curves in Minkowski space.

pub mod cli;
pub mod curvekit;
pub mod error;
pub mod exprjet;
pub mod flowsim;
pub mod frenet;
pub mod minkowski;
pub mod verify;

pub use error::{Error, Result};
