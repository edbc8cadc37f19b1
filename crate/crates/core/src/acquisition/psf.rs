//! Gaussian paraxial PSF and the low-magnification scenario.

use super::{convolve_cols, convolve_rows, gaussian_kernel, resample_area};
use crate::error::{Error, Result};
use crate::image::{Grid, Image, ZStack};

/// Optical parameters of the simulated objective. Lengths in micrometers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsfParams {
    pub numerical_aperture: f64,
    pub wavelength: f64,
    pub refractive_index: f64,
    /// Sampling `(dz, dy, dx)`.
    pub voxel: (f64, f64, f64),
}

impl PsfParams {
    /// Dry 40×/0.6 NA objective at 550 nm, sampled on `stack`'s grid.
    pub fn low_mag_for(stack: &ZStack) -> Self {
        PsfParams {
            numerical_aperture: 0.6,
            wavelength: 0.55,
            refractive_index: 1.0,
            voxel: (stack.z_step(), stack.pixel_pitch(), stack.pixel_pitch()),
        }
    }

    pub fn sigma_lateral(&self) -> f64 {
        0.21 * self.wavelength / self.numerical_aperture
    }

    pub fn sigma_axial(&self) -> f64 {
        0.66 * self.wavelength * self.refractive_index
            / (self.numerical_aperture * self.numerical_aperture)
    }

    fn validate(&self) -> Result<()> {
        let (dz, dy, dx) = self.voxel;
        if [dz, dy, dx].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "degenerate voxel size ({dz}, {dy}, {dx})"
            )));
        }
        let na = self.numerical_aperture;
        if na <= 0.0
            || !(0.0..=1.5).contains(&na)
            || self.wavelength.is_nan()
            || self.wavelength <= 0.0
            || !(1.0..).contains(&self.refractive_index)
        {
            return Err(Error::InvalidArgument(format!("invalid optics {self:?}")));
        }
        if na >= self.refractive_index {
            return Err(Error::InvalidArgument(format!(
                "NA {na} must be below the refractive index {}",
                self.refractive_index
            )));
        }
        Ok(())
    }
}

/// Sampled, unit-sum 3D kernel. Stored both as the separable factors and
/// as the dense `Z×Y×X` product.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf3d {
    pub kernel: Vec<f64>,
    pub extents: (usize, usize, usize),
    pub voxel: (f64, f64, f64),
    pub axial: Vec<f64>,
    pub lateral_y: Vec<f64>,
    pub lateral_x: Vec<f64>,
}

impl Psf3d {
    #[inline]
    pub fn at(&self, z: usize, y: usize, x: usize) -> f64 {
        let (_, ey, ex) = self.extents;
        self.kernel[(z * ey + y) * ex + x]
    }
}

/// Gaussian approximation of the widefield PSF with
/// `σ_lateral = 0.21·λ/NA` and `σ_axial = 0.66·λ·n/NA²`, truncated at
/// `truncation` standard deviations per axis.
pub fn gaussian_psf3d(params: &PsfParams, truncation: f64) -> Result<Psf3d> {
    params.validate()?;
    if !(1.0..).contains(&truncation) {
        return Err(Error::InvalidArgument(format!(
            "truncation must be >= 1 sigma, got {truncation}"
        )));
    }
    let (dz, dy, dx) = params.voxel;
    let (sl, sa) = (params.sigma_lateral(), params.sigma_axial());
    let radius = |sigma: f64, step: f64| (truncation * sigma / step).ceil() as usize;
    let axial = gaussian_kernel(sa, dz, radius(sa, dz));
    let lateral_y = gaussian_kernel(sl, dy, radius(sl, dy));
    let lateral_x = gaussian_kernel(sl, dx, radius(sl, dx));
    let extents = (axial.len(), lateral_y.len(), lateral_x.len());
    let mut kernel = Vec::with_capacity(extents.0 * extents.1 * extents.2);
    for kz in &axial {
        for ky in &lateral_y {
            for kx in &lateral_x {
                kernel.push(kz * ky * kx);
            }
        }
    }
    Ok(Psf3d {
        kernel,
        extents,
        voxel: params.voxel,
        axial,
        lateral_y,
        lateral_x,
    })
}

/// Separable 3D convolution: replicate boundary along z, symmetric in-plane.
pub(crate) fn convolve_stack(planes: &[Grid], psf: &Psf3d) -> Vec<Grid> {
    let d = planes.len();
    let (h, w) = planes[0].dims();
    let rz = (psf.axial.len() / 2) as isize;
    (0..d)
        .map(|z| {
            let mut acc = Grid::zeros(h, w);
            for (j, k) in psf.axial.iter().enumerate() {
                let src = (z as isize + j as isize - rz).clamp(0, d as isize - 1) as usize;
                for (a, x) in acc.data_mut().iter_mut().zip(planes[src].data()) {
                    *a += k * x;
                }
            }
            convolve_cols(&convolve_rows(&acc, &psf.lateral_x), &psf.lateral_y)
        })
        .collect()
}

/// Low-magnification acquisition: 3D PSF blur, then area resampling by
/// `scale` (`scale == 1` skips resampling). Output values are clamped to
/// `[0, 1]`.
///
/// `params.voxel` must match the stack's `(z_step, pitch, pitch)`.
pub fn simulate_low_mag(stack: &ZStack, params: &PsfParams, scale: f64) -> Result<ZStack> {
    let expected = (stack.z_step(), stack.pixel_pitch(), stack.pixel_pitch());
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs();
    let (dz, dy, dx) = params.voxel;
    if !(close(dz, expected.0) && close(dy, expected.1) && close(dx, expected.2)) {
        return Err(Error::DimensionMismatch(format!(
            "PSF voxel {:?} does not match stack sampling {expected:?}",
            params.voxel
        )));
    }
    if !(1.0..).contains(&scale) {
        return Err(Error::InvalidArgument(format!(
            "downscale factor must be >= 1, got {scale}"
        )));
    }
    let psf = gaussian_psf3d(params, 3.0)?;
    let grids: Vec<Grid> = stack.planes().iter().map(|p| p.grid().clone()).collect();
    let planes = convolve_stack(&grids, &psf)
        .into_iter()
        .map(|g| {
            let img = Image::from_grid_clamped(g, stack.pixel_pitch())?;
            if scale > 1.0 {
                resample_area(&img, scale)
            } else {
                Ok(img)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ZStack::new(planes, stack.z_step())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(voxel: (f64, f64, f64)) -> PsfParams {
        PsfParams {
            numerical_aperture: 0.6,
            wavelength: 0.55,
            refractive_index: 1.0,
            voxel,
        }
    }

    #[test]
    fn sigmas_follow_the_paraxial_formulas() {
        let p = params((0.5, 0.065, 0.065));
        assert!((p.sigma_lateral() - 0.1925).abs() < 1e-12);
        assert!((p.sigma_axial() - 0.66 * 0.55 / 0.36).abs() < 1e-12);
        assert!((p.sigma_axial() - 1.0083).abs() < 1e-4);
    }

    #[test]
    fn kernel_invariants() {
        let psf = gaussian_psf3d(&params((0.5, 0.065, 0.065)), 3.0).unwrap();
        // ceil(3 * 1.00833 / 0.5) = 7, ceil(3 * 0.1925 / 0.065) = 9
        assert_eq!(psf.extents, (15, 19, 19));
        assert!((psf.kernel.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(psf.kernel.iter().all(|v| *v >= 0.0));
        let (ez, ey, ex) = psf.extents;
        let center = psf.at(ez / 2, ey / 2, ex / 2);
        for z in 0..ez {
            for y in 0..ey {
                for x in 0..ex {
                    let v = psf.at(z, y, x);
                    assert!(v <= center);
                    assert_eq!(v, psf.at(ez - 1 - z, y, x));
                    assert_eq!(v, psf.at(z, ey - 1 - y, x));
                    assert_eq!(v, psf.at(z, y, ex - 1 - x));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gaussian_psf3d(&params((0.0, 0.1, 0.1)), 3.0).is_err());
        assert!(gaussian_psf3d(&params((0.5, 0.1, 0.1)), 0.5).is_err());
        let mut p = params((0.5, 0.1, 0.1));
        p.numerical_aperture = 1.2;
        assert!(gaussian_psf3d(&p, 3.0).is_err());
    }

    fn stack_from(grids: &[Grid], pitch: f64, z_step: f64) -> ZStack {
        let planes = grids
            .iter()
            .map(|g| Image::from_grid(g.clone(), pitch).unwrap())
            .collect();
        ZStack::new(planes, z_step).unwrap()
    }

    #[test]
    fn impulse_response_is_the_kernel() {
        // coarse sampling keeps the kernel small: extents (9, 13, 13)
        let p = params((1.0, 0.1, 0.1));
        let psf = gaussian_psf3d(&p, 3.0).unwrap();
        let (ez, ey, ex) = psf.extents;
        assert_eq!(psf.extents, (9, 13, 13));
        let (d, n) = (ez + 4, 32);
        let mut grids = vec![Grid::zeros(n, n); d];
        grids[d / 2].set(n / 2, n / 2, 1.0);
        let out = simulate_low_mag(&stack_from(&grids, 0.1, 1.0), &p, 1.0).unwrap();
        for z in 0..ez {
            for y in 0..ey {
                for x in 0..ex {
                    let v = out.planes()[d / 2 + z - ez / 2]
                        .get(n / 2 + y - ey / 2, n / 2 + x - ex / 2);
                    assert!((v - psf.at(z, y, x)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn constant_stack_stays_constant() {
        let grids = vec![Grid::filled(20, 20, 0.4); 3];
        let p = params((0.5, 0.065, 0.065));
        let out = simulate_low_mag(&stack_from(&grids, 0.065, 0.5), &p, 2.5).unwrap();
        assert_eq!(out.dims(), (8, 8));
        for plane in out.planes() {
            assert!(plane.pixels().iter().all(|v| (v - 0.4).abs() < 1e-12));
        }
        assert!((out.pixel_pitch() - 0.065 * 2.5).abs() < 1e-15);
    }

    #[test]
    fn separable_path_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grids: Vec<Grid> = (0..5)
            .map(|_| Grid::from_fn(16, 16, |_, _| rng.random::<f64>()))
            .collect();
        let p = params((0.5, 0.065, 0.065));
        let psf = gaussian_psf3d(&p, 3.0).unwrap();
        let fast = convolve_stack(&grids, &psf);
        let (ez, ey, ex) = psf.extents;
        let mirror = |i: isize, n: isize| {
            let m = i.rem_euclid(2 * n);
            (if m < n { m } else { 2 * n - 1 - m }) as usize
        };
        for z in 0..5isize {
            for y in 0..16isize {
                for x in 0..16isize {
                    let mut acc = 0.0;
                    for kz in 0..ez as isize {
                        for ky in 0..ey as isize {
                            for kx in 0..ex as isize {
                                let sz = (z + kz - ez as isize / 2).clamp(0, 4) as usize;
                                let sy = mirror(y + ky - ey as isize / 2, 16);
                                let sx = mirror(x + kx - ex as isize / 2, 16);
                                acc += psf.at(kz as usize, ky as usize, kx as usize)
                                    * grids[sz].get(sy, sx);
                            }
                        }
                    }
                    let got = fast[z as usize].get(y as usize, x as usize);
                    assert!((got - acc).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn voxel_must_match_stack() {
        let grids = vec![Grid::filled(8, 8, 0.4); 2];
        let p = params((0.5, 0.1, 0.1));
        assert!(matches!(
            simulate_low_mag(&stack_from(&grids, 0.065, 0.5), &p, 2.5),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
