//! Periodized separable 2D DWT.
//!
//! Sub-band names give the filter applied along x (rows) first, then along
//! y (columns): `hl` is highpass in x and lowpass in y.

use super::FilterBank;
use crate::error::{Error, Result};
use crate::image::Grid;

/// Detail sub-bands of one decomposition level.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailBands {
    pub hl: Grid,
    pub lh: Grid,
    pub hh: Grid,
}

impl DetailBands {
    pub fn bands(&self) -> [&Grid; 3] {
        [&self.hl, &self.lh, &self.hh]
    }

    pub fn bands_mut(&mut self) -> [&mut Grid; 3] {
        [&mut self.hl, &mut self.lh, &mut self.hh]
    }

    pub fn dims(&self) -> (usize, usize) {
        self.hl.dims()
    }
}

/// Multi-level coefficients. `details[0]` is the finest level (ℓ = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    pub height: usize,
    pub width: usize,
    pub details: Vec<DetailBands>,
    pub approx: Grid,
}

impl WaveletPyramid {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn coefficient_count(&self) -> usize {
        let d: usize = self.details.iter().map(|l| 3 * l.hl.data().len()).sum();
        d + self.approx.data().len()
    }

    pub fn energy(&self) -> f64 {
        let sq = |g: &Grid| g.data().iter().map(|v| v * v).sum::<f64>();
        self.details
            .iter()
            .flat_map(|l| l.bands())
            .map(sq)
            .sum::<f64>()
            + sq(&self.approx)
    }

    /// Same-shaped pyramid with every coefficient zero.
    pub fn zeros_like(&self) -> Self {
        WaveletPyramid {
            height: self.height,
            width: self.width,
            details: self
                .details
                .iter()
                .map(|l| {
                    let (h, w) = l.dims();
                    DetailBands {
                        hl: Grid::zeros(h, w),
                        lh: Grid::zeros(h, w),
                        hh: Grid::zeros(h, w),
                    }
                })
                .collect(),
            approx: Grid::zeros(self.approx.height(), self.approx.width()),
        }
    }

    pub(crate) fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height
            && self.width == other.width
            && self.approx.dims() == other.approx.dims()
            && self.details.len() == other.details.len()
            && self
                .details
                .iter()
                .zip(&other.details)
                .all(|(a, b)| a.dims() == b.dims())
    }
}

/// Deepest decomposition for a `height`×`width` image and a `taps`-long
/// filter: `floor(log2(min(H, W) / (taps - 1)))`, at least 1.
pub fn max_levels(height: usize, width: usize, taps: usize) -> Result<usize> {
    if height == 0 || width == 0 || taps < 2 {
        return Err(Error::InvalidArgument(format!(
            "max_levels({height}, {width}, {taps})"
        )));
    }
    let side = height.min(width);
    let support = taps - 1;
    if side < support {
        return Err(Error::TooSmall {
            size: side,
            required: support,
        });
    }
    let mut levels = 0;
    while support << (levels + 1) <= side {
        levels += 1;
    }
    Ok(levels.max(1))
}

fn analyze_1d(bank: &FilterBank, input: &[f64], low: &mut [f64], high: &mut [f64]) {
    let n = input.len();
    let (h, g) = (bank.lowpass(), bank.highpass());
    for i in 0..n / 2 {
        let (mut a, mut d) = (0.0, 0.0);
        let base = 2 * i;
        for k in 0..h.len() {
            let x = input[(base + k) % n];
            a += h[k] * x;
            d += g[k] * x;
        }
        low[i] = a;
        high[i] = d;
    }
}

fn synthesize_1d(bank: &FilterBank, low: &[f64], high: &[f64], out: &mut [f64]) {
    let n = out.len();
    out.fill(0.0);
    let (h, g) = (bank.lowpass(), bank.highpass());
    for i in 0..n / 2 {
        let (a, d) = (low[i], high[i]);
        let base = 2 * i;
        for k in 0..h.len() {
            out[(base + k) % n] += h[k] * a + g[k] * d;
        }
    }
}

/// One analysis level: returns `(ll, hl, lh, hh)`.
fn analyze_level(bank: &FilterBank, x: &Grid) -> (Grid, DetailBands) {
    let (h, w) = x.dims();
    let (h2, w2) = (h / 2, w / 2);
    // along x
    let mut lo_x = Grid::zeros(h, w2);
    let mut hi_x = Grid::zeros(h, w2);
    for r in 0..h {
        analyze_1d(
            bank,
            x.row(r),
            &mut lo_x.data_mut()[r * w2..(r + 1) * w2],
            &mut hi_x.data_mut()[r * w2..(r + 1) * w2],
        );
    }
    // along y
    let mut col = vec![0.0; h];
    let mut lo = vec![0.0; h2];
    let mut hi = vec![0.0; h2];
    let mut split_columns = |src: &Grid| {
        let mut low_y = Grid::zeros(h2, w2);
        let mut high_y = Grid::zeros(h2, w2);
        for c in 0..w2 {
            for (r, v) in col.iter_mut().enumerate() {
                *v = src.get(r, c);
            }
            analyze_1d(bank, &col, &mut lo, &mut hi);
            for r in 0..h2 {
                low_y.set(r, c, lo[r]);
                high_y.set(r, c, hi[r]);
            }
        }
        (low_y, high_y)
    };
    let (ll, lh) = split_columns(&lo_x);
    let (hl, hh) = split_columns(&hi_x);
    (ll, DetailBands { hl, lh, hh })
}

fn synthesize_level(bank: &FilterBank, ll: &Grid, bands: &DetailBands) -> Grid {
    let (h2, w2) = ll.dims();
    let (h, w) = (2 * h2, 2 * w2);
    let mut lo = vec![0.0; h2];
    let mut hi = vec![0.0; h2];
    let mut col = vec![0.0; h];
    let mut merge_columns = |low_y: &Grid, high_y: &Grid| {
        let mut out = Grid::zeros(h, w2);
        for c in 0..w2 {
            for r in 0..h2 {
                lo[r] = low_y.get(r, c);
                hi[r] = high_y.get(r, c);
            }
            synthesize_1d(bank, &lo, &hi, &mut col);
            for (r, v) in col.iter().enumerate() {
                out.set(r, c, *v);
            }
        }
        out
    };
    let lo_x = merge_columns(ll, &bands.lh);
    let hi_x = merge_columns(&bands.hl, &bands.hh);
    let mut out = Grid::zeros(h, w);
    for r in 0..h {
        synthesize_1d(
            bank,
            lo_x.row(r),
            hi_x.row(r),
            &mut out.data_mut()[r * w..(r + 1) * w],
        );
    }
    out
}

/// Forward transform. `levels` must not exceed [`max_levels`] and both
/// dimensions must be divisible by `2^levels`.
pub fn dwt2(image: &Grid, bank: &FilterBank, levels: usize) -> Result<WaveletPyramid> {
    let (h, w) = image.dims();
    let max = max_levels(h, w, bank.taps())?;
    if levels == 0 || levels > max {
        return Err(Error::LevelOverflow {
            requested: levels,
            max,
        });
    }
    let block = 1usize << levels;
    if h % block != 0 || w % block != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{h}x{w} is not divisible by 2^{levels}"
        )));
    }
    let mut details = Vec::with_capacity(levels);
    let mut approx = image.clone();
    for _ in 0..levels {
        let (ll, bands) = analyze_level(bank, &approx);
        details.push(bands);
        approx = ll;
    }
    Ok(WaveletPyramid {
        height: h,
        width: w,
        details,
        approx,
    })
}

/// Inverse transform. The result is not clamped.
pub fn idwt2(pyramid: &WaveletPyramid, bank: &FilterBank) -> Result<Grid> {
    let levels = pyramid.levels();
    let (h, w) = (pyramid.height, pyramid.width);
    let block = 1usize << levels;
    if levels == 0 || h % block != 0 || w % block != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{levels}-level pyramid cannot describe a {h}x{w} image"
        )));
    }
    for (l, bands) in pyramid.details.iter().enumerate() {
        let want = (h >> (l + 1), w >> (l + 1));
        if bands.bands().iter().any(|b| b.dims() != want) {
            return Err(Error::DimensionMismatch(format!(
                "level {} sub-bands are not {}x{}",
                l + 1,
                want.0,
                want.1
            )));
        }
    }
    if pyramid.approx.dims() != (h >> levels, w >> levels) {
        return Err(Error::DimensionMismatch(
            "approximation band has the wrong size".into(),
        ));
    }
    let mut current = pyramid.approx.clone();
    for bands in pyramid.details.iter().rev() {
        current = synthesize_level(bank, &current, bands);
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Grid {
        Grid::from_fn(h, w, |_, _| rng.random::<f64>())
    }

    fn rms(a: &Grid, b: &Grid) -> f64 {
        let s: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).powi(2))
            .sum();
        (s / a.data().len() as f64).sqrt()
    }

    #[test]
    fn max_levels_cases() {
        assert_eq!(max_levels(512, 512, 16).unwrap(), 5);
        assert_eq!(max_levels(512, 512, 2).unwrap(), 9);
        assert_eq!(max_levels(512, 256, 2).unwrap(), 8);
        assert_eq!(max_levels(20, 20, 16).unwrap(), 1);
        assert!(matches!(
            max_levels(8, 8, 16),
            Err(Error::TooSmall {
                size: 8,
                required: 15
            })
        ));
    }

    #[test]
    fn haar_two_by_two_by_hand() {
        let bank = FilterBank::haar();
        let x = Grid::filled(2, 2, 1.0);
        let p = dwt2(&x, &bank, 1).unwrap();
        assert!((p.approx.get(0, 0) - 2.0).abs() < 1e-15);
        for b in p.details[0].bands() {
            assert!(b.get(0, 0).abs() < 1e-15);
        }
        let back = idwt2(&p, &bank).unwrap();
        assert!(rms(&back, &x) < 1e-15);
    }

    #[test]
    fn constant_image_has_no_detail() {
        for bank in [FilterBank::haar(), FilterBank::sym8()] {
            let x = Grid::filled(64, 64, 0.3);
            let p = dwt2(&x, &bank, 2).unwrap();
            for l in &p.details {
                for b in l.bands() {
                    assert!(b.data().iter().all(|v| v.abs() < 1e-10));
                }
            }
            for v in p.approx.data() {
                assert!((v - 0.3 * 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_pyramid_inverts_to_zero() {
        let bank = FilterBank::sym8();
        let p = dwt2(&Grid::filled(32, 32, 1.0), &bank, 1)
            .unwrap()
            .zeros_like();
        assert!(idwt2(&p, &bank).unwrap().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn perfect_reconstruction_and_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bank = FilterBank::sym8();
        let x = random_grid(&mut rng, 64, 64);
        let p = dwt2(&x, &bank, 2).unwrap();
        assert_eq!(p.coefficient_count(), 64 * 64);
        let e: f64 = x.data().iter().map(|v| v * v).sum();
        assert!((e - p.energy()).abs() / e < 1e-9);
        assert!(rms(&idwt2(&p, &bank).unwrap(), &x) < 1e-6);
    }

    #[test]
    fn level_and_shape_errors() {
        let bank = FilterBank::sym8();
        assert!(matches!(
            dwt2(&Grid::zeros(64, 64), &bank, 3),
            Err(Error::LevelOverflow {
                requested: 3,
                max: 2
            })
        ));
        assert!(matches!(
            dwt2(&Grid::zeros(62, 64), &bank, 2),
            Err(Error::DimensionMismatch(_))
        ));
        let mut p = dwt2(&Grid::zeros(64, 64), &bank, 2).unwrap();
        p.details[1].hh = Grid::zeros(3, 3);
        assert!(matches!(idwt2(&p, &bank), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn non_square_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bank = FilterBank::haar();
        let x = random_grid(&mut rng, 16, 48);
        let p = dwt2(&x, &bank, 4).unwrap();
        assert_eq!(p.approx.dims(), (1, 3));
        assert!(rms(&idwt2(&p, &bank).unwrap(), &x) < 1e-12);
    }
}
