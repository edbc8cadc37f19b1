//! Dense 3D activation volumes and the three strided-correlation primitives
//! that convolution and transposed convolution (and their gradients) are
//! built from.
//!
//! Every layer relates a "low" volume to a "high" volume through
//! `high_pos = low_pos · stride + tap − pad` along each axis. A convolution
//! gathers from its input (high) into its output (low); a transposed
//! convolution scatters its input (low) into its output (high). Weights are
//! laid out `[low_channel, high_channel, kd, kh, kw]` in both cases.

use std::ops::Range;

/// `[channels, depth, height, width]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub c: usize,
    pub d: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Volume {
    pub fn zeros(c: usize, d: usize, h: usize, w: usize) -> Self {
        Volume {
            c,
            d,
            h,
            w,
            data: vec![0.0; c * d * h * w],
        }
    }

    #[inline]
    pub fn index(&self, c: usize, z: usize, y: usize, x: usize) -> usize {
        ((c * self.d + z) * self.h + y) * self.w + x
    }

    #[inline]
    fn row(&self, c: usize, z: usize, y: usize) -> &[f64] {
        let i = self.index(c, z, y, 0);
        &self.data[i..i + self.w]
    }

    #[inline]
    fn row_mut(&mut self, c: usize, z: usize, y: usize) -> &mut [f64] {
        let i = self.index(c, z, y, 0);
        &mut self.data[i..i + self.w]
    }

    pub fn channel_len(&self) -> usize {
        self.d * self.h * self.w
    }

    pub fn same_shape(&self, other: &Volume) -> bool {
        (self.c, self.d, self.h, self.w) == (other.c, other.d, other.h, other.w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geom {
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub pad: [usize; 3],
}

impl Geom {
    pub const fn planar(k: usize, stride: usize, pad: usize) -> Self {
        Geom {
            kernel: [1, k, k],
            stride: [1, stride, stride],
            pad: [0, pad, pad],
        }
    }

    pub fn taps(&self) -> usize {
        self.kernel.iter().product()
    }

    /// Output extent of a convolution over an input extent along `axis`.
    pub fn conv_out(&self, axis: usize, n: usize) -> usize {
        (n + 2 * self.pad[axis] - self.kernel[axis]) / self.stride[axis] + 1
    }

    /// Output extent of a transposed convolution.
    pub fn tconv_out(&self, axis: usize, n: usize, output_pad: usize) -> usize {
        (n - 1) * self.stride[axis] + self.kernel[axis] + output_pad - 2 * self.pad[axis]
    }
}

/// Low indices whose mapped high index `l·s + k − p` lies in `[0, n_high)`.
#[inline]
fn tap_range(n_low: usize, n_high: usize, s: usize, k: usize, p: usize) -> Range<usize> {
    let start = if p > k { (p - k).div_ceil(s) } else { 0 };
    let lim = n_high + p;
    if lim <= k {
        return 0..0;
    }
    let end = ((lim - k - 1) / s + 1).min(n_low);
    start..end.max(start)
}

struct Tap {
    weight_index: usize,
    zr: Range<usize>,
    yr: Range<usize>,
    xr: Range<usize>,
    off: [isize; 3],
}

fn taps(low: (usize, usize, usize), high: (usize, usize, usize), g: &Geom) -> Vec<Tap> {
    let [kd, kh, kw] = g.kernel;
    let [sd, sh, sw] = g.stride;
    let [pd, ph, pw] = g.pad;
    let mut out = Vec::with_capacity(g.taps());
    for kz in 0..kd {
        for ky in 0..kh {
            for kx in 0..kw {
                out.push(Tap {
                    weight_index: (kz * kh + ky) * kw + kx,
                    zr: tap_range(low.0, high.0, sd, kz, pd),
                    yr: tap_range(low.1, high.1, sh, ky, ph),
                    xr: tap_range(low.2, high.2, sw, kx, pw),
                    off: [
                        kz as isize - pd as isize,
                        ky as isize - ph as isize,
                        kx as isize - pw as isize,
                    ],
                });
            }
        }
    }
    out
}

#[inline]
fn high_of(l: usize, s: usize, off: isize) -> usize {
    (l as isize * s as isize + off) as usize
}

/// `low[lc] += Σ_{hc,tap} w[lc, hc, tap] · high[hc, mapped]`.
pub fn gather(high: &Volume, weights: &[f64], g: &Geom, low: &mut Volume) {
    let kvol = g.taps();
    debug_assert_eq!(weights.len(), low.c * high.c * kvol);
    let taps = taps((low.d, low.h, low.w), (high.d, high.h, high.w), g);
    let [sd, sh, sw] = g.stride;
    for lc in 0..low.c {
        for hc in 0..high.c {
            let wbase = (lc * high.c + hc) * kvol;
            for t in &taps {
                let wv = weights[wbase + t.weight_index];
                if t.xr.is_empty() {
                    continue;
                }
                for lz in t.zr.clone() {
                    let hz = high_of(lz, sd, t.off[0]);
                    for ly in t.yr.clone() {
                        let hy = high_of(ly, sh, t.off[1]);
                        let hx0 = high_of(t.xr.start, sw, t.off[2]);
                        let hrow = high.row(hc, hz, hy);
                        let lrow = &mut low.row_mut(lc, lz, ly)[t.xr.clone()];
                        if sw == 1 {
                            for (o, i) in lrow.iter_mut().zip(&hrow[hx0..]) {
                                *o += wv * i;
                            }
                        } else {
                            for (j, o) in lrow.iter_mut().enumerate() {
                                *o += wv * hrow[hx0 + j * sw];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`gather`]: `high[hc, mapped] += Σ w[lc, hc, tap] · low[lc]`.
pub fn scatter(low: &Volume, weights: &[f64], g: &Geom, high: &mut Volume) {
    let kvol = g.taps();
    debug_assert_eq!(weights.len(), low.c * high.c * kvol);
    let taps = taps((low.d, low.h, low.w), (high.d, high.h, high.w), g);
    let [sd, sh, sw] = g.stride;
    for lc in 0..low.c {
        for hc in 0..high.c {
            let wbase = (lc * high.c + hc) * kvol;
            for t in &taps {
                let wv = weights[wbase + t.weight_index];
                if t.xr.is_empty() {
                    continue;
                }
                for lz in t.zr.clone() {
                    let hz = high_of(lz, sd, t.off[0]);
                    for ly in t.yr.clone() {
                        let hy = high_of(ly, sh, t.off[1]);
                        let hx0 = high_of(t.xr.start, sw, t.off[2]);
                        let lstart = low.index(lc, lz, ly, t.xr.start);
                        let lrow = &low.data[lstart..lstart + t.xr.len()];
                        let hrow = high.row_mut(hc, hz, hy);
                        if sw == 1 {
                            for (o, i) in hrow[hx0..].iter_mut().zip(lrow) {
                                *o += wv * i;
                            }
                        } else {
                            for (j, i) in lrow.iter().enumerate() {
                                hrow[hx0 + j * sw] += wv * i;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Weight gradient: `gw[lc, hc, tap] += Σ low[lc] · high[hc, mapped]`.
pub fn weight_grad(low: &Volume, high: &Volume, g: &Geom, gw: &mut [f64]) {
    let kvol = g.taps();
    debug_assert_eq!(gw.len(), low.c * high.c * kvol);
    let taps = taps((low.d, low.h, low.w), (high.d, high.h, high.w), g);
    let [sd, sh, sw] = g.stride;
    for lc in 0..low.c {
        for hc in 0..high.c {
            let wbase = (lc * high.c + hc) * kvol;
            for t in &taps {
                let mut acc = 0.0;
                if t.xr.is_empty() {
                    continue;
                }
                for lz in t.zr.clone() {
                    let hz = high_of(lz, sd, t.off[0]);
                    for ly in t.yr.clone() {
                        let hy = high_of(ly, sh, t.off[1]);
                        let hx0 = high_of(t.xr.start, sw, t.off[2]);
                        let hrow = high.row(hc, hz, hy);
                        let lrow = &low.row(lc, lz, ly)[t.xr.clone()];
                        if sw == 1 {
                            acc += lrow
                                .iter()
                                .zip(&hrow[hx0..])
                                .map(|(a, b)| a * b)
                                .sum::<f64>();
                        } else {
                            acc += lrow
                                .iter()
                                .enumerate()
                                .map(|(j, a)| a * hrow[hx0 + j * sw])
                                .sum::<f64>();
                        }
                    }
                }
                gw[wbase + t.weight_index] += acc;
            }
        }
    }
}

pub fn add_bias(v: &mut Volume, bias: &[f64]) {
    let n = v.channel_len();
    for (chunk, b) in v.data.chunks_exact_mut(n).zip(bias) {
        chunk.iter_mut().for_each(|x| *x += b);
    }
}

pub fn bias_grad(grad: &Volume, gb: &mut [f64]) {
    let n = grad.channel_len();
    for (chunk, g) in grad.data.chunks_exact(n).zip(gb.iter_mut()) {
        *g += chunk.iter().sum::<f64>();
    }
}

pub fn relu_in_place(v: &mut Volume) {
    v.data.iter_mut().for_each(|x| *x = x.max(0.0));
}

/// Zeroes `grad` wherever the post-activation `act` is not positive.
pub fn relu_backward(grad: &mut Volume, act: &Volume) {
    for (g, a) in grad.data.iter_mut().zip(&act.data) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Convolution of `input` (high) into a freshly allocated output (low).
pub fn conv_forward(input: &Volume, weights: &[f64], bias: &[f64], g: &Geom) -> Volume {
    let mut out = Volume::zeros(
        bias.len(),
        g.conv_out(0, input.d),
        g.conv_out(1, input.h),
        g.conv_out(2, input.w),
    );
    add_bias(&mut out, bias);
    gather(input, weights, g, &mut out);
    out
}

/// Transposed convolution of `input` (low) into a freshly allocated output (high).
pub fn tconv_forward(
    input: &Volume,
    weights: &[f64],
    bias: &[f64],
    g: &Geom,
    output_pad: usize,
) -> Volume {
    let mut out = Volume::zeros(
        bias.len(),
        g.tconv_out(0, input.d, 0),
        g.tconv_out(1, input.h, output_pad),
        g.tconv_out(2, input.w, output_pad),
    );
    add_bias(&mut out, bias);
    scatter(input, weights, g, &mut out);
    out
}
