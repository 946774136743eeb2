//! Partially labeled topic models over multi-label document corpora, and the
//! downstream analytics that turn per-token label attributions into
//! cross-field language-flow measurements.
//!
//! The pipeline is split across modules in the order data moves through it:
//!
//! * [`corpus`]: tokenizing, stemming and pruning raw records into a fixed
//!   vocabulary.
//! * [`taxonomy`]: subject codes, clustered areas and broad areas.
//! * [`plda`]: collapsed Gibbs training with observed label sets, and
//!   fold-in inference over the full label set.
//! * [`flow`]: incorporation matrices, pairwise series and chord edges.
//! * [`stats`]: bootstrap intervals, pair verdicts, net source scores and
//!   cross-model consistency.

pub mod corpus;
pub mod error;
pub mod flow;
pub mod plda;
pub mod provenance;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod taxonomy;
pub mod tsv;

pub use error::{Error, ErrorClass, Result};
