//! Exact enumeration, sampling and scoring of two-district redistricting
//! plans on a county dual graph.
//!
//! The crate is organised around a [`DualGraph`] built from unit and
//! adjacency tables ([`graph`]). Plans are bipartitions of its nodes
//! ([`Plan`]). On top of that sit exact counting and enumeration
//! ([`enumerate`]), plan scoring ([`metrics`], [`elections`]), spanning-tree
//! mathematics ([`trees`]) and the recombination chain ([`recom`]).

pub mod elections;
pub mod enumerate;
pub mod export;
pub mod graph;
pub mod metrics;
pub mod plan;
pub mod recom;
pub mod stats;
pub mod trees;

mod linalg;

pub use elections::{ElectionDataset, ElectionOutcome, ShareMode};
pub use enumerate::{ConstraintSet, DevBound, PopWindow};
pub use graph::{AdjacencyRecord, DualGraph, UnitRecord, Votes};
pub use metrics::PlanMetrics;
pub use plan::Plan;
pub use recom::{AcceptPolicy, ChainConfig, Ensemble, Provenance};
