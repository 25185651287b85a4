//! Gram-matrix invariants of finitely supported measures on
//! Euclidean cones over finite metric spaces, computed as semidefinite
//! programs over Gram matrices, together with numerical checks of the
//! comparison inequalities and explicit upper-bound constants they satisfy.

pub mod cli;
pub mod error;
pub mod gram;
pub mod invariants;
pub mod io;
pub mod lp;
pub mod measure;
pub mod metric;
pub mod net;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
