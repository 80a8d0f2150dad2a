//! Numerical toolkit for hypothesis testing against convex sets of quantum
//! states.

pub mod cli;
pub mod error;
pub mod linalg;
pub mod random;
pub mod state_sets;
pub mod divergences;
pub mod hypothesis;
pub mod measures;
pub mod povm;
pub mod protocol;
pub mod states;
pub mod symmetry;

pub use error::{Error, Result};
