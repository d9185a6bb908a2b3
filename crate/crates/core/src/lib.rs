//! Unsupervised detection of ideological echo chambers in temporal retweet
//! networks.
//!
//! The pipeline runs from weekly edge lists through leading-user extraction,
//! chamber overlaps, spectral partitioning, configuration-model nulls,
//! polarization, ideology scores and augmented echo chambers, to week-to-week
//! user flux. [`synth`] generates planted networks with known ground truth.

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chambers;
pub mod density;
pub mod echo;
pub mod error;
pub mod graph;
pub mod leaders;
pub mod nullmodel;
pub mod pipeline;
pub mod polarization;
pub mod sets;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
