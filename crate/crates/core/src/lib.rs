//! Linear consensus dynamics on weighted directed graphs.
//!
//! Opinions follow `ds/dt = -L s` where `L` is the in-degree Laplacian
//! (`a_ij > 0` means node `j` influences node `i`), or the matching jump
//! process where each edge fires at rate `a_ij` and node `i` copies node `j`.

pub mod control;
pub mod deterministic;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod spectral;
pub mod stats;
pub mod stochastic;

pub use error::{Error, GraphError, Result};
pub use graph::{LaplacianMatrix, WeightedDigraph};
