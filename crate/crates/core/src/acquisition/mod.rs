//! Acquisition-degradation scenarios and synthetic z-stacks.
//!
//! Three faster-acquisition scenarios are simulated from a high-resolution
//! stack: a coarser z-step ([`subsample_zstep`]), camera binning
//! ([`bin_stack`]) and a lower-magnification objective ([`simulate_low_mag`]:
//! 3D Gaussian PSF blur followed by area resampling).
//! [`gen_synthetic_stack`] produces stacks with a known all-in-focus ground
//! truth for oracle tests.

mod convolve;
mod psf;
mod resample;
mod synth;

pub use psf::{gaussian_psf3d, simulate_low_mag, Psf3d, PsfParams};
pub use resample::{bin_stack, resample_area, subsample_zstep};
pub use synth::{gen_synthetic_stack, SynthConfig};

pub(crate) use convolve::{convolve_cols, convolve_rows, gaussian_kernel};
