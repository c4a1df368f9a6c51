//! Distributed pose-graph optimization (SE(d) synchronization).
//!
//! The pipeline: parse or generate a pose graph, balance it with a
//! multi-level k-way partitioner, solve the rank-restricted semidefinite
//! relaxation with (accelerated) Riemannian block-coordinate descent,
//! round the low-rank solution back to an SE(d) trajectory, and check the
//! suboptimality gap. A synchronous multi-robot simulator runs the same
//! solver with explicit message passing and reports communication volume.

pub mod distsim;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod manifest;
pub mod partition;
pub mod problem;
pub mod rounding;
pub mod solver;

pub use error::{Error, Result};
