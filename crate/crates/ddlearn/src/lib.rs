//! Discriminative dictionary learning: joint estimation of a sparse
//! representation dictionary, one-vs-all linear classifiers, and the
//! noise/cost parameters that balance them, with greedy sparse coding as
//! the single inner solver.

pub mod classifiers;
pub mod cli;
pub mod data_io;
pub mod dictionary;
pub mod dsc;
pub mod error;
pub mod inference;
mod linalg;
pub mod losses;
pub mod model;
pub mod sparse_coding;
pub mod trainer;

pub use error::{Error, Result};
