//! Graph pooling by node decimation: spectral MAXCUT partitions, Kron
//! reduction, sparsification and multi-level coarsening pyramids.

pub mod cli;
pub mod cut;
pub mod error;
pub mod generators;
pub mod gnn;
pub mod graph;
pub mod io;
pub mod kron;
pub mod linalg;
pub mod pyramid;
pub mod rng;
#[cfg(test)]
mod testing;

pub use error::{Error, Result};
pub use graph::Graph;
pub use linalg::Matrix;
