//! Raster and z-stack data model.
//!
//! [`Grid`] is an unconstrained row-major array of reals used for
//! intermediate results (wavelet reconstructions, convolutions). [`Image`]
//! wraps a grid whose values are guaranteed to lie in `[0, 1]` and carries
//! the physical pixel pitch. [`ZStack`] is an ordered set of same-shaped
//! images acquired at successive focal depths.

mod manifest;
mod pgm;

pub use manifest::{load_stack, StackManifest};
pub use pgm::{decode_pgm, encode_pgm, load_pgm, quantize, save_pgm, to_unit, BitDepth, RawImage};

use crate::error::{Error, Result};

/// Row-major 2D array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {height}x{width} grid",
                data.len()
            )));
        }
        Ok(Grid {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Grid {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Grid {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Copy of the rectangle starting at `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Grid {
        assert!(row + height <= self.height && col + width <= self.width);
        Grid::from_fn(height, width, |r, c| self.get(row + r, col + c))
    }

    /// Extends the grid to `height`×`width` by half-sample symmetric
    /// reflection at the bottom and right edges.
    pub fn pad_symmetric(&self, height: usize, width: usize) -> Grid {
        assert!(height >= self.height && width >= self.width);
        Grid::from_fn(height, width, |r, c| {
            self.get(
                mirror_index(r as isize, self.height),
                mirror_index(c as isize, self.width),
            )
        })
    }
}

/// Maps any integer index onto `[0, n)` by half-sample symmetric reflection
/// (`x[-1] = x[0]`, `x[n] = x[n-1]`).
#[inline]
pub(crate) fn mirror_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    if m < n {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Single-channel raster with values in `[0, 1]` and a physical pixel pitch
/// in micrometers.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    grid: Grid,
    pixel_pitch: f64,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>, pixel_pitch: f64) -> Result<Self> {
        Self::from_grid(Grid::new(height, width, pixels)?, pixel_pitch)
    }

    /// Wraps a grid, rejecting values outside `[0, 1]`.
    pub fn from_grid(grid: Grid, pixel_pitch: f64) -> Result<Self> {
        check_pitch(pixel_pitch)?;
        if let Some(v) = grid.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "pixel value {v} outside [0, 1]"
            )));
        }
        Ok(Image { grid, pixel_pitch })
    }

    /// Wraps a grid after clamping every value into `[0, 1]`. NaN maps to 0.
    pub fn from_grid_clamped(mut grid: Grid, pixel_pitch: f64) -> Result<Self> {
        check_pitch(pixel_pitch)?;
        for v in &mut grid.data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Ok(Image { grid, pixel_pitch })
    }

    pub fn constant(height: usize, width: usize, value: f64, pixel_pitch: f64) -> Result<Self> {
        Self::from_grid(Grid::filled(height, width, value), pixel_pitch)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.grid.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.grid.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims()
    }

    #[inline]
    pub fn pixels(&self) -> &[f64] {
        &self.grid.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.grid.get(row, col)
    }

    #[inline]
    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }

    pub fn with_pitch(mut self, pixel_pitch: f64) -> Result<Self> {
        check_pitch(pixel_pitch)?;
        self.pixel_pitch = pixel_pitch;
        Ok(self)
    }
}

fn check_pitch(pitch: f64) -> Result<()> {
    if pitch.is_finite() && pitch > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "pixel pitch must be positive, got {pitch}"
        )))
    }
}

/// Ordered focal planes (ascending z) sharing shape and pixel pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct ZStack {
    planes: Vec<Image>,
    z_step: f64,
}

impl ZStack {
    pub fn new(planes: Vec<Image>, z_step: f64) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::InvalidArgument("a z-stack needs at least one plane".into()))?;
        if !(z_step.is_finite() && z_step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "z-step must be positive, got {z_step}"
            )));
        }
        for (i, p) in planes.iter().enumerate().skip(1) {
            if p.dims() != first.dims() {
                return Err(Error::DimensionMismatch(format!(
                    "plane {i} is {}x{}, plane 0 is {}x{}",
                    p.height(),
                    p.width(),
                    first.height(),
                    first.width()
                )));
            }
            if p.pixel_pitch() != first.pixel_pitch() {
                return Err(Error::DimensionMismatch(format!(
                    "plane {i} has pixel pitch {}, plane 0 has {}",
                    p.pixel_pitch(),
                    first.pixel_pitch()
                )));
            }
        }
        Ok(ZStack { planes, z_step })
    }

    pub fn planes(&self) -> &[Image] {
        &self.planes
    }

    pub fn into_planes(self) -> Vec<Image> {
        self.planes
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn z_step(&self) -> f64 {
        self.z_step
    }

    pub fn dims(&self) -> (usize, usize) {
        self.planes[0].dims()
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.planes[0].pixel_pitch()
    }
}
