//! Soft-attention LSTM image captioning, built from scratch at desk scale.
//!
//! The pipeline mirrors an object-detection-conditioned captioner: per-image
//! annotation matrices assembled from object features and localization
//! features, an attention LSTM decoder with hand-derived gradients, SGD
//! training with a halving learning-rate schedule, greedy and beam-search
//! decoding, and corpus-level caption metrics (BLEU, ROUGE-L, CIDEr-D).
//!
//! Everything runs in double precision on plain [`ndarray`] types; there is
//! no autograd and no GPU. The backward pass is exact and is validated
//! against central finite differences (see [`training::grad_check`]).
//!
//! A narrative guide with runnable examples lives in the `book/` directory
//! of the repository.

pub mod annotation;
pub mod checkpoint;
pub mod decoder;
pub mod decoding;
mod error;
pub mod metrics;
pub mod training;
pub mod vocab;

pub use error::{Error, Result};
