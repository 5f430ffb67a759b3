//! Multi-scale feature fusion model for blind quality assessment of
//! generated images.
//!
//! The crate works on pre-extracted encoder features: a text embedding and
//! image embeddings at 0.5x, 1.0x and 1.5x scale. It provides the adaptive
//! fusion block, the regression heads and consistency score, the pairwise
//! fidelity and MSE objectives, an AdamW trainer with early stopping, and
//! the SRCC / PLCC / KRCC evaluation protocol. A deterministic toy encoder
//! turns PGM/PPM images and prompts into features for small end-to-end runs.

pub mod aff;
pub mod dataio;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod losses;
pub mod metrics;
pub mod scoring;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
