//! Alignment-free sequence embeddings, kernel matrices, kernel-driven t-SNE
//! and embedding quality metrics.

pub mod bench;
pub mod embed;
pub mod error;
pub mod formats;
pub mod kernel;
pub mod matrix;
pub mod pipeline;
pub mod plot;
pub mod quality;
pub mod seqio;
pub mod tsne;

pub use error::{Error, Result};
pub use matrix::Matrix;
