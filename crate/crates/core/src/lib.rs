//! Vertex-centric PageRank and label propagation on a small actor runtime.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: CSR graphs, edge-list ingestion and synthetic graphs.
//! - [`serial`]: single-threaded baselines, also used as correctness oracles.
//! - [`partition`]: contiguous vertex chunks and their edge layouts.
//! - [`engine`]: index-addressed actors with quiescence detection.
//! - [`variants`]: the five exchange strategies for both algorithms.
//! - [`bench`](mod@bench): timing, CSV output and the COST calculation.

pub mod bench;
pub mod engine;
pub mod graph;
pub mod partition;
pub mod serial;
pub mod variants;
