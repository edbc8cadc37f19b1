//! Dark-region segmentation: Otsu threshold, 8-connected components and a
//! physical-area filter.

use crate::error::{Error, Result};
use crate::image::Image;

/// Smallest retained region, in square micrometers (inclusive).
pub const MIN_REGION_AREA_UM2: f64 = 0.5;
/// Largest retained region, in square micrometers (inclusive).
pub const MAX_REGION_AREA_UM2: f64 = 3.0;

const BINS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub height: usize,
    pub width: usize,
    pub bits: Vec<bool>,
    pub pixel_pitch: f64,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>, pixel_pitch: f64) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "{} bits for a {height}x{width} mask",
                bits.len()
            )));
        }
        Ok(BinaryMask {
            height,
            width,
            bits,
            pixel_pitch,
        })
    }

    pub fn empty(height: usize, width: usize, pixel_pitch: f64) -> Self {
        BinaryMask {
            height,
            width,
            bits: vec![false; height * width],
            pixel_pitch,
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

#[inline]
fn bin_of(v: f64) -> usize {
    ((v * BINS as f64) as usize).min(BINS - 1)
}

/// Otsu's threshold over a 256-bin histogram of `[0, 1]`.
///
/// Returns the upper edge `(t + 1) / 256` of the split bin `t` that
/// maximizes the between-class variance; ties resolve to the lowest `t`.
/// Foreground (dark) pixels are those strictly below the threshold.
pub fn otsu_threshold(image: &Image) -> Result<f64> {
    let mut hist = [0u64; BINS];
    for &v in image.pixels() {
        hist[bin_of(v)] += 1;
    }
    let n: u64 = hist.iter().sum();
    if n == 0 {
        return Err(Error::InvalidArgument("empty image".into()));
    }
    let total: u64 = hist.iter().enumerate().map(|(i, c)| i as u64 * c).sum();
    let (mut n0, mut s0) = (0u64, 0u64);
    let mut best: Option<(usize, f64)> = None;
    for (t, &count) in hist.iter().enumerate().take(BINS - 1) {
        n0 += count;
        s0 += t as u64 * count;
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        // N²·σ_B² = (n1·s0 − n0·s1)² / (n0·n1); the integer numerator makes
        // equal splits compare exactly equal.
        let s1 = total - s0;
        let diff = (n1 as i128 * s0 as i128 - n0 as i128 * s1 as i128) as f64;
        let var = diff * diff / (n0 as f64 * n1 as f64);
        if best.is_none_or(|(_, b)| var > b) {
            best = Some((t, var));
        }
    }
    match best {
        Some((t, var)) if var > 0.0 => Ok((t + 1) as f64 / BINS as f64),
        _ => Err(Error::DegenerateHistogram),
    }
}

/// 8-connected labeling. Labels run `1..=count` in row-major first-encounter
/// order; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub count: usize,
    pub labels: Vec<u32>,
    /// `areas[l - 1]` is the pixel count of label `l`.
    pub areas: Vec<usize>,
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Two-pass union-find labeling.
pub fn connected_components(mask: &BinaryMask) -> Components {
    let (h, w) = (mask.height, mask.width);
    let mut provisional = vec![0u32; h * w];
    let mut parent: Vec<u32> = vec![0];
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            let mut neighbours = [0u32; 4];
            let mut k = 0;
            if c > 0 {
                neighbours[k] = provisional[r * w + c - 1];
                k += 1;
            }
            if r > 0 {
                for cc in c.saturating_sub(1)..(c + 2).min(w) {
                    neighbours[k] = provisional[(r - 1) * w + cc];
                    k += 1;
                }
            }
            let mut label = 0;
            for &nb in neighbours[..k].iter().filter(|&&l| l != 0) {
                if label == 0 {
                    label = nb;
                } else {
                    union(&mut parent, label, nb);
                }
            }
            if label == 0 {
                label = parent.len() as u32;
                parent.push(label);
            }
            provisional[r * w + c] = label;
        }
    }
    // relabel roots in first-encounter order
    let mut final_of_root = vec![0u32; parent.len()];
    let mut labels = vec![0u32; h * w];
    let mut areas = Vec::new();
    for (i, &p) in provisional.iter().enumerate() {
        if p == 0 {
            continue;
        }
        let root = find(&mut parent, p) as usize;
        if final_of_root[root] == 0 {
            areas.push(0);
            final_of_root[root] = areas.len() as u32;
        }
        let l = final_of_root[root];
        labels[i] = l;
        areas[l as usize - 1] += 1;
    }
    Components {
        count: areas.len(),
        labels,
        areas,
    }
}

/// Inclusive pixel-count bounds equivalent to
/// `MIN_REGION_AREA_UM2 <= n·pitch² <= MAX_REGION_AREA_UM2`.
pub fn area_bounds_px(pitch: f64) -> (usize, usize) {
    let area = |n: usize| n as f64 * pitch * pitch;
    let mut lo = (MIN_REGION_AREA_UM2 / (pitch * pitch)).ceil() as usize;
    while lo > 0 && area(lo - 1) >= MIN_REGION_AREA_UM2 {
        lo -= 1;
    }
    while area(lo) < MIN_REGION_AREA_UM2 {
        lo += 1;
    }
    let mut hi = (MAX_REGION_AREA_UM2 / (pitch * pitch)).floor() as usize;
    while area(hi + 1) <= MAX_REGION_AREA_UM2 {
        hi += 1;
    }
    while hi > 0 && area(hi) > MAX_REGION_AREA_UM2 {
        hi -= 1;
    }
    (lo, hi)
}

/// Otsu binarization (dark foreground), then removal of 8-connected regions
/// whose physical area falls outside `[0.5, 3.0]` μm².
pub fn segment_parasite_regions(image: &Image) -> Result<BinaryMask> {
    let threshold = otsu_threshold(image)?;
    let (h, w) = image.dims();
    let fg = BinaryMask::new(
        h,
        w,
        image.pixels().iter().map(|&v| v < threshold).collect(),
        image.pixel_pitch(),
    )?;
    let cc = connected_components(&fg);
    let pitch = image.pixel_pitch();
    let keep: Vec<bool> = cc
        .areas
        .iter()
        .map(|&n| (MIN_REGION_AREA_UM2..=MAX_REGION_AREA_UM2).contains(&(n as f64 * pitch * pitch)))
        .collect();
    let bits = cc
        .labels
        .iter()
        .map(|&l| l != 0 && keep[l as usize - 1])
        .collect();
    BinaryMask::new(h, w, bits, image.pixel_pitch())
}

/// Dice overlap `2|A∩B| / (|A|+|B|)`; two empty masks score 1.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if (a.height, a.width) != (b.height, b.width) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    let both = a
        .bits
        .iter()
        .zip(&b.bits)
        .filter(|(x, y)| **x && **y)
        .count();
    let sizes = a.count() + b.count();
    if sizes == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / sizes as f64)
}
