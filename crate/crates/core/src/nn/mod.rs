//! Trainable neural stack with exact hand-written gradients.
//!
//! Everything runs in 64-bit floats on one sample at a time; batch
//! gradients are accumulated by the training loop.

mod attention;
pub mod checkpoint;
mod classifier;
mod encoders;
mod gcan;
pub mod gradcheck;
pub mod init;
mod layer_norm;
mod linear;
mod params;

pub use attention::{softmax_rows, AttentionCache, AttentionConfig, MultiHeadAttention};
pub use checkpoint::{average_checkpoints, Checkpoint};
pub use classifier::{sigmoid, ClassifierHead, HeadCache};
pub use encoders::{
    patchify, sinusoidal_positions, ImageCache, ImageEncoder, ModelOutput, Pooling, TextCache,
    TextEncoder, TextModel,
};
pub use gcan::{GcanLayer, GcanLayerCache, GcanStack, GcanStackCache};
pub use layer_norm::{LayerNorm, LayerNormCache};
pub use linear::Linear;
pub use params::{join, Manifest, Parameters, ParametersExt};
