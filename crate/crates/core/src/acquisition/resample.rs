use crate::error::{Error, Result};
use crate::image::{Grid, Image, ZStack};

/// Keeps planes `0, stride, 2·stride, …` and scales the z-step accordingly.
pub fn subsample_zstep(stack: &ZStack, stride: usize) -> Result<ZStack> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    let planes = stack.planes().iter().step_by(stride).cloned().collect();
    ZStack::new(planes, stack.z_step() * stride as f64)
}

/// Camera binning: every `factor`×`factor` block becomes its mean.
pub fn bin_stack(stack: &ZStack, factor: usize) -> Result<ZStack> {
    let (h, w) = stack.dims();
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{h}x{w} planes cannot be binned by {factor}"
        )));
    }
    let (oh, ow) = (h / factor, w / factor);
    let norm = (factor * factor) as f64;
    let planes = stack
        .planes()
        .iter()
        .map(|p| {
            let mut out = Grid::zeros(oh, ow);
            for r in 0..h {
                let row = p.grid().row(r);
                let dst = &mut out.data_mut()[(r / factor) * ow..(r / factor + 1) * ow];
                for (c, v) in row.iter().enumerate() {
                    dst[c / factor] += v;
                }
            }
            out.data_mut().iter_mut().for_each(|v| *v /= norm);
            Image::from_grid_clamped(out, p.pixel_pitch() * factor as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    ZStack::new(planes, stack.z_step())
}

/// Box-integration weights mapping `n_in` samples onto `n_out` equal
/// footprints that tile the input exactly. Returns `(first_source, weights)`
/// per output sample.
fn area_weights(n_in: usize, n_out: usize) -> Vec<(usize, Vec<f64>)> {
    let ratio = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|i| {
            let (lo, hi) = (i as f64 * ratio, (i + 1) as f64 * ratio);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n_in);
            let weights = (first..last)
                .map(|k| {
                    let overlap = hi.min(k as f64 + 1.0) - lo.max(k as f64);
                    overlap.max(0.0) / ratio
                })
                .collect();
            (first, weights)
        })
        .collect()
}

/// Area-averaging downsampling by a non-integer `scale > 1`.
///
/// Output dimensions are `round(dim / scale)`. Each output pixel averages
/// the source area under its footprint; footprints tile the source exactly.
/// The pixel pitch is multiplied by `scale`.
pub fn resample_area(image: &Image, scale: f64) -> Result<Image> {
    if !(scale > 1.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "resampling scale must be > 1, got {scale}"
        )));
    }
    let (h, w) = image.dims();
    let (oh, ow) = (
        (h as f64 / scale).round() as usize,
        (w as f64 / scale).round() as usize,
    );
    if oh == 0 || ow == 0 {
        return Err(Error::TooSmall {
            size: h.min(w),
            required: (scale / 2.0).ceil() as usize,
        });
    }
    let wx = area_weights(w, ow);
    let wy = area_weights(h, oh);
    let mut tmp = Grid::zeros(h, ow);
    for r in 0..h {
        let src = image.grid().row(r);
        for (c, (first, weights)) in wx.iter().enumerate() {
            let v = weights.iter().zip(&src[*first..]).map(|(k, x)| k * x).sum();
            tmp.set(r, c, v);
        }
    }
    let mut out = Grid::zeros(oh, ow);
    for (r, (first, weights)) in wy.iter().enumerate() {
        let dst = &mut out.data_mut()[r * ow..(r + 1) * ow];
        for (j, k) in weights.iter().enumerate() {
            for (d, x) in dst.iter_mut().zip(tmp.row(first + j)) {
                *d += k * x;
            }
        }
    }
    Image::from_grid_clamped(out, image.pixel_pitch() * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn numbered_stack(d: usize) -> ZStack {
        let planes = (0..d)
            .map(|i| Image::constant(4, 4, i as f64 / d as f64, 0.065).unwrap())
            .collect();
        ZStack::new(planes, 0.5).unwrap()
    }

    fn plane_ids(s: &ZStack, d: usize) -> Vec<usize> {
        s.planes()
            .iter()
            .map(|p| (p.get(0, 0) * d as f64).round() as usize)
            .collect()
    }

    #[test]
    fn zstep_strides_of_three_and_five() {
        let s = numbered_stack(14);
        let a = subsample_zstep(&s, 3).unwrap();
        assert_eq!(plane_ids(&a, 14), vec![0, 3, 6, 9, 12]);
        assert!((a.z_step() - 1.5).abs() < 1e-12);
        let b = subsample_zstep(&s, 5).unwrap();
        assert_eq!(plane_ids(&b, 14), vec![0, 5, 10]);
        assert!((b.z_step() - 2.5).abs() < 1e-12);
        assert_eq!(subsample_zstep(&s, 1).unwrap(), s);
        assert_eq!(plane_ids(&subsample_zstep(&s, 20).unwrap(), 14), vec![0]);
        assert!(subsample_zstep(&s, 0).is_err());
    }

    #[test]
    fn strides_compose() {
        let s = numbered_stack(14);
        for a in 1..5 {
            for b in 1..5 {
                let two = subsample_zstep(&subsample_zstep(&s, a).unwrap(), b).unwrap();
                let one = subsample_zstep(&s, a * b).unwrap();
                assert_eq!(plane_ids(&two, 14), plane_ids(&one, 14));
                assert!((two.z_step() - one.z_step()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn binning_cases() {
        let s = ZStack::new(vec![Image::constant(8, 8, 0.5, 0.065).unwrap()], 0.5).unwrap();
        let b = bin_stack(&s, 4).unwrap();
        assert_eq!(b.dims(), (2, 2));
        assert!(b.planes()[0].pixels().iter().all(|v| *v == 0.5));
        assert!((b.pixel_pitch() - 0.26).abs() < 1e-15);

        let checker = Image::new(2, 2, vec![0.0, 1.0, 1.0, 0.0], 0.1).unwrap();
        let s = ZStack::new(vec![checker], 0.5).unwrap();
        assert_eq!(bin_stack(&s, 2).unwrap().planes()[0].pixels(), &[0.5]);

        let s = ZStack::new(vec![Image::constant(6, 8, 0.5, 0.1).unwrap()], 0.5).unwrap();
        assert!(matches!(bin_stack(&s, 4), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn binning_preserves_mean_at_full_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Grid::from_fn(512, 512, |_, _| rng.random::<f64>());
        let img = Image::from_grid(g, 0.065).unwrap();
        let mean = img.grid().mean();
        let b = bin_stack(&ZStack::new(vec![img], 0.5).unwrap(), 4).unwrap();
        assert_eq!(b.dims(), (128, 128));
        assert!((b.planes()[0].grid().mean() - mean).abs() < 1e-12);
    }

    #[test]
    fn area_resampling_sizes_and_constants() {
        let img = Image::constant(512, 512, 0.7, 0.065).unwrap();
        let out = resample_area(&img, 2.5).unwrap();
        assert_eq!(out.dims(), (205, 205));
        assert!(out.pixels().iter().all(|v| (v - 0.7).abs() < 1e-12));
        assert!(resample_area(&img, 1.0).is_err());
        let tiny = Image::constant(1, 1, 0.7, 0.065).unwrap();
        assert!(resample_area(&tiny, 3.0).is_err());
    }

    #[test]
    fn scale_two_equals_binning_by_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = Grid::from_fn(12, 18, |_, _| rng.random::<f64>());
        let img = Image::from_grid(g, 0.065).unwrap();
        let a = resample_area(&img, 2.0).unwrap();
        let b = bin_stack(&ZStack::new(vec![img], 0.5).unwrap(), 2).unwrap();
        assert_eq!(a.dims(), b.dims());
        for (x, y) in a.pixels().iter().zip(b.planes()[0].pixels()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.pixel_pitch() - b.pixel_pitch()).abs() < 1e-15);
    }

    #[test]
    fn weights_tile_the_source() {
        for (n, m) in [(512, 205), (10, 3), (7, 7), (9, 2)] {
            let total: f64 = area_weights(n, m)
                .iter()
                .map(|(_, w)| w.iter().sum::<f64>())
                .sum();
            assert!((total - m as f64).abs() < 1e-9);
        }
    }
}
