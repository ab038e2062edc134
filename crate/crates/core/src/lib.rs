//! Community structure, directional community roles and social-capitalist
//! positioning for large directed follower graphs.
//!
//! The pipeline is: ingest an edge list ([`graph`]), detect communities by
//! directed-modularity Louvain ([`louvain`]), compute eight directional role
//! measures ([`measures`]), standardise and cluster them with k-means under
//! Davies–Bouldin model selection ([`clustering`]), detect social
//! capitalists and cross-tabulate them against the role groups
//! ([`capitalists`]), test group differences ([`stats`]) and render the
//! tables ([`report`]). [`pipeline`] wires the stages together.

// `!(x >= 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capitalists;
pub mod clustering;
pub mod error;
pub mod graph;
pub mod louvain;
pub mod measures;
pub mod partition;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{ArcConvention, DirectedGraph, Direction, IdMap, LoadedGraph};
pub use partition::Partition;
