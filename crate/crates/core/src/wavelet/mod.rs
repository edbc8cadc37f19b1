//! Multi-scale wavelet fusion of z-stacks.
//!
//! Each focal plane is decomposed with a periodized orthonormal 2D DWT.
//! Detail coefficients are selected plane-by-plane on maximum magnitude, the
//! per-position winners are made consistent across sub-bands and 3×3
//! neighbourhoods, and the fused pyramid is inverted.

mod filters;
mod fusion;
mod transform;

pub use filters::{FilterBank, Wavelet};
pub use fusion::{
    consistency_filter, fuse_wavelet, gather_details, select_max, IndexMap, SelectionMap,
};
pub use transform::{dwt2, idwt2, max_levels, DetailBands, WaveletPyramid};
