//! Song classification from EEG recordings: synthetic session generation,
//! preprocessing, feature extraction, models and evaluation.
//!
//! The usual flow is [`synthgen::generate_session`] (or
//! [`synthgen::io::read_session`]) → [`preprocess::run_pipeline`] →
//! [`features::build_feature_matrix`] → [`eval::split_dataset`] →
//! [`models::fit`] → [`eval::evaluate`]. [`experiment`] strings these
//! together one subject at a time.

pub mod cli;
pub mod config;
pub mod epochfile;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod models;
pub mod preprocess;
pub mod session;
pub mod synthgen;

pub use error::{Error, Result};
