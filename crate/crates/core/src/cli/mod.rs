//! The `gcan-fusion` command line tool and the pipeline it drives.

mod commands;
pub mod config;
pub mod dataset;
pub mod models;
pub mod pipeline;
pub mod runs;
pub mod synth;

pub use commands::{run, Cli, Command, VoteMode};
