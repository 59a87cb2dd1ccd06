//! Program graphs for learned data-flow analysis.
//!
//! The pipeline is: text IR ([`ir`]) → program graph ([`graph`]) → oracle
//! labels ([`analysis`]) → labelled examples ([`dataset`]) → embedding keys
//! ([`vocab`]). [`synth`] produces random well-formed programs for datasets
//! and property tests.

pub mod analysis;
pub mod dataset;
pub mod graph;
pub mod ir;
pub mod rng;
pub mod synth;
pub mod vocab;
