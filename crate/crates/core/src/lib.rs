//! Numerics for the form equation kappa (exp w)^[n] = (Lambda ^ exp w)^[n] on
//! flat complex tori.

pub mod error;
pub mod cli;
pub mod cone;
pub mod dhym;
pub mod forms;
pub mod hermitian;
pub mod inequalities;
pub mod io;
pub mod lift;
pub mod operator;
pub mod sample;
pub mod solver;
pub mod subsets;
pub mod variational;
pub mod verify;

pub use error::{Error, Result};
