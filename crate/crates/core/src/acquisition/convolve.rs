use crate::image::{mirror_index, Grid};

/// Sampled Gaussian `exp(-(i·step)² / 2σ²)` for `i ∈ [-radius, radius]`,
/// normalized to unit sum. `sigma == 0` yields the unit impulse.
pub(crate) fn gaussian_kernel(sigma: f64, step: f64, radius: usize) -> Vec<f64> {
    if sigma == 0.0 {
        let mut k = vec![0.0; 2 * radius + 1];
        k[radius] = 1.0;
        return k;
    }
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = (i as f64 - radius as f64) * step;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Centered 1D convolution along each row, symmetric boundary.
pub(crate) fn convolve_rows(src: &Grid, kernel: &[f64]) -> Grid {
    let (h, w) = src.dims();
    let r = (kernel.len() / 2) as isize;
    let mut out = Grid::zeros(h, w);
    let mut padded = vec![0.0; w + 2 * r as usize];
    for row in 0..h {
        let line = src.row(row);
        for (i, p) in padded.iter_mut().enumerate() {
            *p = line[mirror_index(i as isize - r, w)];
        }
        let dst = &mut out.data_mut()[row * w..(row + 1) * w];
        for (c, d) in dst.iter_mut().enumerate() {
            *d = kernel
                .iter()
                .zip(&padded[c..c + kernel.len()])
                .map(|(k, x)| k * x)
                .sum();
        }
    }
    out
}

/// Centered 1D convolution along each column, symmetric boundary.
pub(crate) fn convolve_cols(src: &Grid, kernel: &[f64]) -> Grid {
    let (h, w) = src.dims();
    let r = (kernel.len() / 2) as isize;
    let mut out = Grid::zeros(h, w);
    for row in 0..h {
        let dst = &mut out.data_mut()[row * w..(row + 1) * w];
        for (j, k) in kernel.iter().enumerate() {
            let line = src.row(mirror_index(row as isize + j as isize - r, h));
            for (d, x) in dst.iter_mut().zip(line) {
                *d += k * x;
            }
        }
    }
    out
}
