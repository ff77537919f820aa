//! Text-graph convolutional attention encoders, bi-modal fusion and
//! voting ensembles for multi-label meme classification.
//!
//! The crate is organised along the pipeline:
//!
//! * [`preprocess`] cleans and merges text streams, tokenizes, builds the
//!   vocabulary and standardizes images.
//! * [`graph`] builds the corpus graph (PMI word edges, TF-IDF document
//!   edges, symmetric normalization) and extracts per-document adjacency.
//! * [`nn`] holds the trainable stack with hand-written backward passes.
//! * [`fusion`] combines member models by stream weighting and
//!   representation fusion.
//! * [`training`] has the losses, AdamW, warm-up schedule, early stopping
//!   and checkpoint averaging.
//! * [`ensemble`] covers metrics, k-fold splits, soft/hard voting and the
//!   Mann-Whitney U test.
//! * [`cli`] wires everything into the `gcan-fusion` command line tool.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod fusion;
pub mod graph;
pub mod nn;
pub mod preprocess;
pub mod training;

pub use error::{Error, Result};
