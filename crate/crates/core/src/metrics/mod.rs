//! Fusion quality metrics: SSIM against a reference, and a dark-blob
//! segmentation (Otsu threshold + physical-area filter) compared with Dice.

mod segment;
mod ssim;

pub use segment::{
    area_bounds_px, connected_components, dice, otsu_threshold, segment_parasite_regions,
    BinaryMask, Components, MAX_REGION_AREA_UM2, MIN_REGION_AREA_UM2,
};
pub use ssim::{ssim, SsimConfig};

use crate::error::{Error, Result};
use crate::image::Image;

/// Mean squared pixel difference.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let s: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(s / a.pixels().len() as f64)
}
