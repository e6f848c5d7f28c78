//! Quantum optimal transport on density matrices.

pub mod checks;
pub mod entropy;
pub mod error;
pub mod frame;
pub mod geodesic;
pub mod grid;
pub mod herm;
pub mod lindblad;
pub mod metric;
mod optim;
pub mod random;
pub mod spatial;
pub mod transport;

pub use error::{Error, Result};
