//! Adaptive dataset quantization.
//!
//! A labeled dataset, given as precomputed feature vectors (and optionally
//! the raw 8-bit images), is compressed into a coreset in four steps:
//!
//! 1. [`bins::generate_bins`] splits the data into `m` disjoint bins by
//!    repeated greedy GraphCut maximization.
//! 2. Each bin gets a representativeness score (mean Sobel texture level of
//!    its image patches, [`texture`]) and a diversity score (contrastive
//!    energy under a small per-bin discriminator, [`diversity`]).
//! 3. The min-max normalized scores are summed into an importance score and
//!    blended with the bin mass into per-bin quotas under a keep ratio
//!    ([`sampling`]).
//! 4. Each bin contributes a uniform random sample of its quota.
//!
//! [`pipeline::run_pipeline`] runs everything from a dataset manifest. The
//! `examples/` directory has one runnable program per stage.

pub mod bins;
pub mod dataset;
pub mod diversity;
pub mod error;
pub mod numeric;
pub mod pipeline;
pub mod rng;
pub mod sampling;
pub mod texture;

pub use error::{AdqError, Result};
