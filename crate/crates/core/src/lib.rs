//! Conic feasibility by projection and rescaling.
//!
//! Finds `x` with `P_L·x > 0` for a subspace `L` given by an orthonormal
//! basis, using basic procedures whose iterates keep an affinely independent
//! support of at most `m + 1` points.

pub mod bench;
pub mod caratheodory;
pub mod error;
pub mod format;
pub mod instance;
pub mod linalg;
pub mod procedures;
pub mod solver;

pub use error::{Error, Result};
