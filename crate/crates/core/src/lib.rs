//! Repetition generation toolkit.
//!
//! A repetition is a listener response that reuses words from the previous
//! speaker's utterance. This crate provides the pieces needed to train and
//! decode repetition generators at desk scale:
//!
//! * [`corpus`]: dialogue records, JSONL I/O, statistics and a synthetic
//!   corpus generator with planted repeat propensities.
//! * [`repeat_scorer`]: per-content-word repeat scores in `[0, 1]`.
//! * [`wls`]: one-hot, label-smoothed and weighted-label-smoothed targets,
//!   the cross-entropy loss and its analytic gradient.
//! * [`seq2seq`]: the generative-model interface, an oracle table model, a
//!   small trainable encoder-decoder and a subprocess plugin seam.
//! * [`decoder`]: beam search ranked by length-normalized log-probability,
//!   unclipped coverage and a repeat-score term, plus an exhaustive oracle.
//! * [`evaluation`]: multi-reference ROUGE, repeated-word correctness, the
//!   rule-based baseline and the Wilcoxon rank-sum test.
//! * [`cli`]: the `repgen` command-line driver.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod decoder;
mod error;
pub mod evaluation;
pub mod nn;
pub mod repeat_scorer;
pub mod seq2seq;
pub mod util;
pub mod vocab;
pub mod wls;

pub use error::{Error, Result};
