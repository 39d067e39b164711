//! Hate speech classification with user timeline profiles.
//!
//! A two-phase pipeline: an LSTM classifier fine-tunes word embeddings
//! ([`recurrent`]); tweets and author timelines are then represented by
//! averaged embeddings ([`profile`]) and classified with gradient-boosted
//! trees ([`gbdt`]). [`eval`] runs split-by-tweet and split-by-user
//! cross-validation and reports per-class, micro/macro and timeline-length
//! binned metrics.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod gbdt;
pub mod output;
pub mod profile;
pub mod recurrent;
pub mod rng;
pub mod text;

pub use error::{Error, Result};
