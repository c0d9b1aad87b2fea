//! Graph vision networks for link prediction.
//!
//! Subgraphs around query links (or single nodes) are rendered to images,
//! a convolutional encoder turns each image into a visual structural feature
//! vector, and those vectors are fused with message-passing node
//! representations before or after propagation.

pub mod error;
pub mod features;
pub mod graph;
pub mod model;
pub mod nn;
pub mod par;
pub mod probes;
pub mod render;
pub mod rng;
pub mod train;
pub mod vsf;

#[cfg(test)]
mod props;

pub use error::{Error, Result};
pub use par::Exec;
