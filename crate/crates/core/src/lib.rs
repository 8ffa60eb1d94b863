//! Contextual topic and dialog-act classification for open-domain
//! conversations.
//!
//! The crate provides deep averaging networks (with and without a
//! topic-word attention table) and bidirectional LSTM classifiers, each able
//! to take the previous turns of the conversation and a predicted dialog-act
//! distribution as extra input. Keywords are extracted from the attention
//! table, and topical-depth metrics are correlated with per-response
//! coherence and engagement ratings.

pub mod cli;
pub mod corpus;
mod error;
pub mod keywords;
pub mod metrics;
pub mod models;
pub mod numerics;
pub mod text;
pub mod training;

pub use error::{Error, Result};
