//! Measures functional localization in small trained policy networks.
//!
//! The toolkit trains several independent actor networks on a synthetic
//! steering task, knocks out contiguous neuron groups of a chosen dense
//! layer one group at a time, collects the per-image output shifts, and
//! clusters those shifts across trials to find groups that play the same
//! role in independently trained networks.
//!
//! - [`nn`]: tensors, layers, forward passes, and the network file format
//! - [`wire`]: synthetic wire-image generation and the shared probe set
//! - [`train`]: seeded behavior-cloning trainer and multi-trial runner
//! - [`ablation`]: group partitioning, weight knockout, and output deltas
//! - [`analysis`]: delta feature matrix, k-means, silhouette, PCA, summaries

pub mod ablation;
pub mod analysis;
mod error;
pub mod nn;
pub mod rng;
pub mod textfmt;
pub mod train;
pub mod wire;

pub use error::{Error, Result};
