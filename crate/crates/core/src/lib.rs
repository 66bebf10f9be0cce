//! Predicting plausible novel noun-noun compounds from a time-stamped
//! ngram corpus.

pub mod config;
pub mod corpus;
pub mod decade;
pub mod dfm;
pub mod gbdt;
pub mod harness;
pub mod neural;
pub mod sampling;
pub mod synth;
pub mod vectors;
