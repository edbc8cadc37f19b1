//! Structural similarity with a Gaussian window, evaluated at every window
//! position that fits entirely inside the image.

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    /// Window side (odd).
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimConfig {
    /// Normalized 1D window; the 2D window is its outer product.
    pub fn window_1d(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let mut w: Vec<f64> = (0..self.window)
            .map(|i| {
                let x = i as f64 - r;
                (-x * x / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        w
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

/// Valid-mode separable filtering of `data` (h×w) with `k`.
fn filter_valid(data: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        let src = &data[r * w..(r + 1) * w];
        for c in 0..ow {
            rows[r * ow + c] = k.iter().zip(&src[c..c + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        let dst = &mut out[r * ow..(r + 1) * ow];
        for (j, kv) in k.iter().enumerate() {
            for (d, s) in dst.iter_mut().zip(&rows[(r + j) * ow..(r + j + 1) * ow]) {
                *d += kv * s;
            }
        }
    }
    out
}

pub fn ssim(a: &Image, b: &Image, cfg: &SsimConfig) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let (h, w) = a.dims();
    if cfg.window == 0 || cfg.window.is_multiple_of(2) {
        return Err(Error::InvalidArgument("SSIM window must be odd".into()));
    }
    if h.min(w) < cfg.window {
        return Err(Error::TooSmall {
            size: h.min(w),
            required: cfg.window,
        });
    }
    let k = cfg.window_1d();
    let (x, y) = (a.pixels(), b.pixels());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
    let mu_x = filter_valid(x, h, w, &k);
    let mu_y = filter_valid(y, h, w, &k);
    let e_xx = filter_valid(&xx, h, w, &k);
    let e_yy = filter_valid(&yy, h, w, &k);
    let e_xy = filter_valid(&xy, h, w, &k);
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, h: usize, w: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_grid(Grid::from_fn(h, w, |_, _| rng.random::<f64>()), 0.065).unwrap()
    }

    #[test]
    fn window_sums_to_one() {
        let k = SsimConfig::default().window_1d();
        let total: f64 = k.iter().flat_map(|a| k.iter().map(move |b| a * b)).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn self_similarity_is_one() {
        let x = random_image(1, 24, 30);
        assert!((ssim(&x, &x, &SsimConfig::default()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_images_closed_form() {
        let a = Image::constant(16, 16, 0.5, 1.0).unwrap();
        let b = Image::constant(16, 16, 0.25, 1.0).unwrap();
        let want = (2.0 * 0.5 * 0.25 + 1e-4) / (0.25 + 0.0625 + 1e-4);
        let got = ssim(&a, &b, &SsimConfig::default()).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 0.80006).abs() < 1e-5);
    }

    #[test]
    fn symmetric() {
        let (a, b) = (random_image(2, 20, 20), random_image(3, 20, 20));
        let cfg = SsimConfig::default();
        assert!((ssim(&a, &b, &cfg).unwrap() - ssim(&b, &a, &cfg).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let cfg = SsimConfig::default();
        let a = random_image(4, 20, 20);
        assert!(matches!(
            ssim(&a, &random_image(5, 20, 21), &cfg),
            Err(Error::DimensionMismatch(_))
        ));
        let small = random_image(6, 10, 40);
        assert!(matches!(
            ssim(&small, &small, &cfg),
            Err(Error::TooSmall { .. })
        ));
    }
}
