//! Creativity scoring for Scratch 3 studios.
//!
//! A studio (a set of projects sharing a theme) is scored per project on
//! three dimensions: originality (how rare the project's elements are within
//! the studio), elaboration (how much the project contains), and flexibility
//! (how many distinct visual and textual clusters its outputs fall into).
//! The three combine into a single creativity score that can be ranked and
//! compared against other metrics with Kendall's τ-b.

pub mod analysis;
pub mod cli;
pub mod flexibility;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod pipeline;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
