//! Extended depth-of-field fusion for microscopy z-stacks.
//!
//! - [`image`]: rasters, z-stacks, PGM and manifest I/O
//! - [`wavelet`]: multi-scale wavelet fusion baseline
//! - [`acquisition`]: degradation scenarios and synthetic stacks with known ground truth
//! - [`metrics`]: SSIM, Otsu segmentation with blob-area filtering, Dice
//! - [`neural`]: max-fusion and volumetric encoder/residual/decoder fusion networks
//! - [`pipeline`]: batch fusion, evaluation, benchmarking and training drivers

pub mod acquisition;
pub mod error;
pub mod image;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod wavelet;

pub use error::{Error, Result};
