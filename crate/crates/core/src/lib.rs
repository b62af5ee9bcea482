//! Topological and classical pseudometrics on finite directed graphs.
//!
//! The crate computes Betti-number and simplex-count distances from directed
//! flag complexes, triad-based distances (TriadEuclid, TriadEMD) and
//! Portrait Divergence, and provides the statistics used to compare them:
//! distance correlation, complete-linkage clustering with silhouette
//! selection, Fowlkes-Mallows indices, permutation tests with multiple-testing
//! corrections, and leave-one-out k-NN.

pub mod digraph;
pub mod error;
pub mod experiment;
pub mod features;
pub mod flag;
pub mod graphlets;
pub mod homology;
pub mod portrait;
pub mod pseudometrics;
pub mod random;
pub mod stats;

pub use digraph::DirectedGraph;
pub use error::{Error, Result};
