//! Decoder laboratory for the rotated surface code under circuit-level noise.
//!
//! The crate builds the code and its syndrome-extraction circuit, derives the
//! spacetime detector graph, decodes with union-find and greedy decoders, and
//! turns the error-clustering threshold analysis into executable checks.

pub mod adversarial;
pub mod circuit;
pub mod clustering;
pub mod decoders;
pub mod detector_graph;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod stopping;
pub mod verify;

pub use error::{LabError, Result};
