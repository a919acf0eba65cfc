//! Temporal-network link prediction with causal anonymous walks.
//!
//! The pipeline: events go into a [`temporal_graph::TemporalStore`], which
//! precomputes per-link acceptance probabilities; [`walk_sampler`] extracts
//! time-decayed backward walks from both endpoints of a candidate link;
//! [`anonymization`] replaces node ids by set-based position counts; the
//! [`encoder`] turns the anonymized walks into a link probability; and
//! [`evaluation`] drives training and AUC/AP reporting.

pub mod anonymization;
pub mod data_io;
pub mod encoder;
pub mod evaluation;
pub mod exec;
pub mod nn;
pub mod profiling;
pub mod rng;
pub mod temporal_graph;
pub mod walk_sampler;

pub use exec::Execution;
pub use temporal_graph::{Event, NodeId, TemporalStore};
pub use walk_sampler::{SamplerConfig, WalkSampler};
