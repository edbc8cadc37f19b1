use super::{dwt2, idwt2, max_levels, FilterBank, WaveletPyramid};
use crate::error::{Error, Result};
use crate::image::{Image, ZStack};

/// Row-major grid of plane indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<usize>,
}

impl IndexMap {
    pub fn filled(height: usize, width: usize, value: usize) -> Self {
        IndexMap {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.data[row * self.width + col]
    }
}

/// Winning plane per level and position. `levels[0]` is the finest level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMap {
    pub planes: usize,
    pub levels: Vec<IndexMap>,
}

/// Index of the first maximum of |c| over planes.
#[inline]
fn argmax_abs(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_mag = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v.abs() > best_mag {
            best = i;
            best_mag = v.abs();
        }
    }
    best
}

#[inline]
fn majority3(a: usize, b: usize, c: usize) -> usize {
    if a == b || a == c {
        a
    } else if b == c {
        b
    } else {
        a.min(b).min(c)
    }
}

/// Per-coefficient maximum-magnitude selection across planes.
///
/// Each detail coefficient is taken from the plane with the largest
/// magnitude (lowest plane index on ties). The approximation band is the
/// element-wise mean. The returned map holds, per level and position, the
/// plane that wins the majority of the three detail sub-bands.
pub fn select_max(pyramids: &[WaveletPyramid]) -> Result<(WaveletPyramid, SelectionMap)> {
    let first = pyramids
        .first()
        .ok_or_else(|| Error::InvalidArgument("no pyramids to select from".into()))?;
    if let Some(i) = pyramids.iter().position(|p| !p.same_shape(first)) {
        return Err(Error::DimensionMismatch(format!(
            "pyramid {i} differs in shape from pyramid 0"
        )));
    }
    let mut fused = first.zeros_like();
    let mut levels = Vec::with_capacity(first.levels());
    for (l, out_bands) in fused.details.iter_mut().enumerate() {
        let (h, w) = out_bands.dims();
        let mut map = IndexMap::filled(h, w, 0);
        let mut winners = [vec![0usize; h * w], vec![0; h * w], vec![0; h * w]];
        for (b, out) in out_bands.bands_mut().into_iter().enumerate() {
            let src: Vec<&[f64]> = pyramids
                .iter()
                .map(|p| p.details[l].bands()[b].data())
                .collect();
            for (i, dst) in out.data_mut().iter_mut().enumerate() {
                let k = argmax_abs(src.iter().map(|s| s[i]));
                winners[b][i] = k;
                *dst = src[k][i];
            }
        }
        for (i, m) in map.data.iter_mut().enumerate() {
            *m = majority3(winners[0][i], winners[1][i], winners[2][i]);
        }
        levels.push(map);
    }
    let n = pyramids.len() as f64;
    for (i, dst) in fused.approx.data_mut().iter_mut().enumerate() {
        *dst = pyramids.iter().map(|p| p.approx.data()[i]).sum::<f64>() / n;
    }
    Ok((
        fused,
        SelectionMap {
            planes: pyramids.len(),
            levels,
        },
    ))
}

/// One pass of a 3×3 modal filter over every level of the map.
///
/// Windows are truncated at the borders; ties go to the lowest index.
pub fn consistency_filter(map: &SelectionMap) -> SelectionMap {
    let mut counts = vec![0usize; map.planes.max(1)];
    let levels = map
        .levels
        .iter()
        .map(|level| {
            let (h, w) = (level.height, level.width);
            let mut out = IndexMap::filled(h, w, 0);
            for r in 0..h {
                for c in 0..w {
                    counts.fill(0);
                    for rr in r.saturating_sub(1)..(r + 2).min(h) {
                        for cc in c.saturating_sub(1)..(c + 2).min(w) {
                            counts[level.get(rr, cc)] += 1;
                        }
                    }
                    // first maximum = lowest index among ties
                    let mut mode = 0;
                    for (k, &n) in counts.iter().enumerate() {
                        if n > counts[mode] {
                            mode = k;
                        }
                    }
                    out.data[r * w + c] = mode;
                }
            }
            out
        })
        .collect();
    SelectionMap {
        planes: map.planes,
        levels,
    }
}

/// Copies all three detail sub-bands at each position from the plane named
/// by `map` into `fused`.
pub fn gather_details(
    pyramids: &[WaveletPyramid],
    map: &SelectionMap,
    fused: &mut WaveletPyramid,
) -> Result<()> {
    if map.levels.len() != fused.levels() || pyramids.iter().any(|p| !p.same_shape(fused)) {
        return Err(Error::DimensionMismatch(
            "selection map does not match the pyramids".into(),
        ));
    }
    for (l, (bands, level)) in fused.details.iter_mut().zip(&map.levels).enumerate() {
        if (level.height, level.width) != bands.dims() {
            return Err(Error::DimensionMismatch(format!(
                "selection map level {} has the wrong size",
                l + 1
            )));
        }
        for (b, out) in bands.bands_mut().into_iter().enumerate() {
            for (i, dst) in out.data_mut().iter_mut().enumerate() {
                let k = level.data[i];
                *dst = pyramids[k].details[l].bands()[b].data()[i];
            }
        }
    }
    Ok(())
}

/// Wavelet extended-depth-of-field fusion of a whole stack.
///
/// `levels` is capped at [`max_levels`] for the plane size, so the
/// conventional request of 12 levels degrades gracefully. Planes are
/// symmetric-padded up to a multiple of `2^levels` and the result is cropped
/// back and clamped to `[0, 1]`.
pub fn fuse_wavelet(stack: &ZStack, bank: &FilterBank, levels: usize) -> Result<Image> {
    if levels == 0 {
        return Err(Error::InvalidArgument("levels must be >= 1".into()));
    }
    let (h, w) = stack.dims();
    let levels = levels.min(max_levels(h, w, bank.taps())?);
    let block = 1usize << levels;
    let (ph, pw) = (h.div_ceil(block) * block, w.div_ceil(block) * block);

    let pyramids = stack
        .planes()
        .iter()
        .map(|p| {
            let grid = if (ph, pw) == (h, w) {
                p.grid().clone()
            } else {
                p.grid().pad_symmetric(ph, pw)
            };
            dwt2(&grid, bank, levels)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut fused, map) = select_max(&pyramids)?;
    let map = consistency_filter(&map);
    gather_details(&pyramids, &map, &mut fused)?;
    let mut out = idwt2(&fused, bank)?;
    if (ph, pw) != (h, w) {
        out = out.crop(0, 0, h, w);
    }
    Image::from_grid_clamped(out, stack.pixel_pitch())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pyramid(rng: &mut ChaCha8Rng, n: usize, levels: usize) -> WaveletPyramid {
        let g = Grid::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        dwt2(&g, &FilterBank::haar(), levels).unwrap()
    }

    fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Image {
        Image::from_grid(Grid::from_fn(h, w, |_, _| rng.random::<f64>()), 0.065).unwrap()
    }

    #[test]
    fn single_plane_selects_zero_and_keeps_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_pyramid(&mut rng, 16, 2);
        let (fused, map) = select_max(std::slice::from_ref(&p)).unwrap();
        assert_eq!(fused, p);
        assert!(map.levels.iter().all(|l| l.data.iter().all(|&k| k == 0)));
    }

    #[test]
    fn dominant_plane_wins_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p0 = random_pyramid(&mut rng, 16, 2);
        let mut p1 = p0.clone();
        for l in &mut p1.details {
            for b in l.bands_mut() {
                b.data_mut().iter_mut().for_each(|v| *v *= 2.0);
            }
        }
        let (fused, map) = select_max(&[p0, p1.clone()]).unwrap();
        assert!(map.levels.iter().all(|l| l.data.iter().all(|&k| k == 1)));
        assert_eq!(fused.details, p1.details);
    }

    #[test]
    fn selection_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pyrs: Vec<_> = (0..3).map(|_| random_pyramid(&mut rng, 32, 3)).collect();
        let (fused, map) = select_max(&pyrs).unwrap();
        for l in 0..3 {
            let (h, w) = pyrs[0].details[l].dims();
            for r in 0..h {
                for c in 0..w {
                    let mut wins = [0usize; 3];
                    for (b, win) in wins.iter_mut().enumerate() {
                        let mut best = (0, -1.0);
                        for (k, p) in pyrs.iter().enumerate() {
                            let v = p.details[l].bands()[b].get(r, c).abs();
                            if v > best.1 {
                                best = (k, v);
                            }
                        }
                        *win = best.0;
                        assert_eq!(
                            fused.details[l].bands()[b].get(r, c),
                            pyrs[best.0].details[l].bands()[b].get(r, c)
                        );
                    }
                    let mut tally = [0; 3];
                    wins.iter().for_each(|&k| tally[k] += 1);
                    let top = *tally.iter().max().unwrap();
                    let expect = tally.iter().position(|&t| t == top).unwrap();
                    assert_eq!(map.levels[l].get(r, c), expect);
                }
            }
        }
        let mean =
            (pyrs[0].approx.get(0, 0) + pyrs[1].approx.get(0, 0) + pyrs[2].approx.get(0, 0)) / 3.0;
        assert!((fused.approx.get(0, 0) - mean).abs() < 1e-15);
    }

    #[test]
    fn select_rejects_mismatched_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_pyramid(&mut rng, 16, 2);
        let b = random_pyramid(&mut rng, 16, 1);
        assert!(matches!(
            select_max(&[a, b]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(select_max(&[]).is_err());
    }

    #[test]
    fn majority_ties_go_low() {
        assert_eq!(majority3(2, 1, 0), 0);
        assert_eq!(majority3(2, 1, 1), 1);
        assert_eq!(majority3(3, 2, 3), 3);
    }

    fn map_of(h: usize, w: usize, planes: usize, data: Vec<usize>) -> SelectionMap {
        SelectionMap {
            planes,
            levels: vec![IndexMap {
                height: h,
                width: w,
                data,
            }],
        }
    }

    #[test]
    fn uniform_map_is_fixed_point() {
        let m = map_of(5, 4, 3, vec![2; 20]);
        assert_eq!(consistency_filter(&m), m);
    }

    #[test]
    fn lone_dissenter_is_overruled() {
        let mut data = vec![1; 25];
        data[12] = 0;
        let out = consistency_filter(&map_of(5, 5, 2, data));
        assert!(out.levels[0].data.iter().all(|&k| k == 1));
    }

    #[test]
    fn modal_filter_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<usize> = (0..256).map(|_| rng.random_range(0..3)).collect();
        let m = map_of(16, 16, 3, data.clone());
        let out = consistency_filter(&m);
        for r in 0..16i64 {
            for c in 0..16i64 {
                let mut votes = Vec::new();
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (rr, cc) = (r + dr, c + dc);
                        if (0..16).contains(&rr) && (0..16).contains(&cc) {
                            votes.push(data[(rr * 16 + cc) as usize]);
                        }
                    }
                }
                let best = (0..3)
                    .max_by_key(|k| {
                        (
                            votes.iter().filter(|v| *v == k).count(),
                            std::cmp::Reverse(*k),
                        )
                    })
                    .unwrap();
                assert_eq!(out.levels[0].get(r as usize, c as usize), best);
            }
        }
    }

    #[test]
    fn identical_planes_fuse_to_the_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let img = random_image(&mut rng, 64, 64);
        for d in [1, 3] {
            let stack = ZStack::new(vec![img.clone(); d], 0.5).unwrap();
            let out = fuse_wavelet(&stack, &FilterBank::sym8(), 12).unwrap();
            let err: f64 = out
                .pixels()
                .iter()
                .zip(img.pixels())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / (64.0 * 64.0);
            assert!(err.sqrt() < 1e-6);
        }
    }

    #[test]
    fn odd_sized_planes_are_padded_and_cropped() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let img = random_image(&mut rng, 45, 37);
        let stack = ZStack::new(vec![img.clone()], 0.5).unwrap();
        let out = fuse_wavelet(&stack, &FilterBank::sym8(), 12).unwrap();
        assert_eq!(out.dims(), (45, 37));
        let max_err = out
            .pixels()
            .iter()
            .zip(img.pixels())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-9);
    }
}
