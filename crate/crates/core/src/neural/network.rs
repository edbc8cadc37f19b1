use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{
    bias_grad, conv_forward, gather, relu_backward, relu_in_place, scatter, tconv_forward,
    weight_grad, Geom, Volume,
};
use crate::error::{Error, Result};
use crate::image::{Grid, Image, ZStack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Shared 2D encoder per plane, element-wise max fusion.
    Max,
    /// 3D encoder over the stack, mean over z.
    Volumetric,
}

impl Variant {
    pub fn code(self) -> u8 {
        match self {
            Variant::Max => 0,
            Variant::Volumetric => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Variant::Max),
            1 => Some(Variant::Volumetric),
            _ => None,
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" | "cnn-max" => Ok(Variant::Max),
            "volumetric" | "3d" | "cnn-3d" => Ok(Variant::Volumetric),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Max => "max",
            Variant::Volumetric => "volumetric",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchConfig {
    pub variant: Variant,
    /// Channels after the first encoder layer (F); the trunk runs at 4F.
    pub base_width: usize,
    pub residual_blocks: usize,
    /// Input plane count for the volumetric variant; ignored (0) for max.
    pub planes: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig::max(32, 9)
    }
}

impl ArchConfig {
    pub fn max(base_width: usize, residual_blocks: usize) -> Self {
        ArchConfig {
            variant: Variant::Max,
            base_width,
            residual_blocks,
            planes: 0,
        }
    }

    pub fn volumetric(base_width: usize, residual_blocks: usize, planes: usize) -> Self {
        ArchConfig {
            variant: Variant::Volumetric,
            base_width,
            residual_blocks,
            planes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_width == 0 {
            return Err(Error::InvalidArgument("base width must be >= 1".into()));
        }
        if self.variant == Variant::Volumetric && self.planes == 0 {
            return Err(Error::InvalidArgument(
                "the volumetric variant needs a fixed plane count".into(),
            ));
        }
        Ok(())
    }

    fn encoder_geoms(&self) -> [Geom; 3] {
        match self.variant {
            Variant::Max => [
                Geom::planar(9, 1, 4),
                Geom::planar(3, 2, 1),
                Geom::planar(3, 2, 1),
            ],
            Variant::Volumetric => [
                Geom {
                    kernel: [3, 9, 9],
                    stride: [1, 1, 1],
                    pad: [1, 4, 4],
                },
                Geom {
                    kernel: [3, 3, 3],
                    stride: [1, 2, 2],
                    pad: [1, 1, 1],
                },
                Geom {
                    kernel: [3, 3, 3],
                    stride: [1, 2, 2],
                    pad: [1, 1, 1],
                },
            ],
        }
    }
}

const RES_GEOM: Geom = Geom::planar(3, 1, 1);
const UP_GEOM: Geom = Geom::planar(3, 2, 1);
const OUT_GEOM: Geom = Geom::planar(9, 1, 4);

/// Tensor order: encoder (w, b)×3, residual blocks (w1, b1, w2, b2)×R,
/// decoder (w, b)×3.
pub fn expected_shapes(cfg: &ArchConfig) -> Vec<Vec<usize>> {
    let f = cfg.base_width;
    let mut shapes = Vec::with_capacity(12 + 4 * cfg.residual_blocks);
    let widths = [(1, f), (f, 2 * f), (2 * f, 4 * f)];
    for (geom, (cin, cout)) in cfg.encoder_geoms().iter().zip(widths) {
        let mut w = vec![cout, cin];
        match cfg.variant {
            Variant::Max => w.extend(&geom.kernel[1..]),
            Variant::Volumetric => w.extend(&geom.kernel),
        }
        shapes.push(w);
        shapes.push(vec![cout]);
    }
    for _ in 0..cfg.residual_blocks {
        for _ in 0..2 {
            shapes.push(vec![4 * f, 4 * f, 3, 3]);
            shapes.push(vec![4 * f]);
        }
    }
    // transposed weights are [in, out, k, k]
    shapes.push(vec![4 * f, 2 * f, 3, 3]);
    shapes.push(vec![2 * f]);
    shapes.push(vec![2 * f, f, 3, 3]);
    shapes.push(vec![f]);
    shapes.push(vec![1, f, 9, 9]);
    shapes.push(vec![1]);
    shapes
}

#[inline]
fn res_index(block: usize, conv: usize) -> usize {
    6 + 4 * block + 2 * conv
}

#[inline]
fn dec_index(cfg: &ArchConfig, layer: usize) -> usize {
    6 + 4 * cfg.residual_blocks + 2 * layer
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Single,
    Double,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub precision: Precision,
    pub tensors: Vec<Tensor>,
}

impl NetworkParams {
    pub fn zeros(cfg: &ArchConfig) -> Self {
        NetworkParams {
            precision: Precision::Double,
            tensors: expected_shapes(cfg)
                .into_iter()
                .map(Tensor::zeros)
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        NetworkParams {
            precision: self.precision,
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.shape.clone()))
                .collect(),
        }
    }

    /// Rounds every value to the nearest `f32`.
    pub fn to_single(&self) -> Self {
        let mut out = self.clone();
        out.precision = Precision::Single;
        out.round_to_precision();
        out
    }

    pub(crate) fn round_to_precision(&mut self) {
        if self.precision == Precision::Single {
            for t in &mut self.tensors {
                t.data.iter_mut().for_each(|v| *v = *v as f32 as f64);
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn check_against(&self, cfg: &ArchConfig) -> Result<()> {
        cfg.validate()?;
        let want = expected_shapes(cfg);
        if want.len() != self.tensors.len()
            || want.iter().zip(&self.tensors).any(|(s, t)| *s != t.shape)
        {
            return Err(Error::DimensionMismatch(
                "parameter shapes do not match the architecture".into(),
            ));
        }
        Ok(())
    }

    fn w(&self, i: usize) -> &[f64] {
        &self.tensors[i].data
    }
}

/// Uniform Glorot initialization, biases zero. Deterministic in `seed`.
pub fn init_params(cfg: &ArchConfig, seed: u64) -> Result<NetworkParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = expected_shapes(cfg)
        .into_iter()
        .map(|shape| {
            let mut t = Tensor::zeros(shape);
            if t.shape.len() > 1 {
                let receptive: usize = t.shape[2..].iter().product();
                let fan_in = t.shape[1] * receptive;
                let fan_out = t.shape[0] * receptive;
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                t.data
                    .iter_mut()
                    .for_each(|v| *v = rng.random_range(-limit..=limit));
            }
            t
        })
        .collect();
    Ok(NetworkParams {
        precision: Precision::Double,
        tensors,
    })
}

/// Bilinear resize with corner-aligned sampling. Enlarging only.
pub fn pre_upsample(stack: &ZStack, target_h: usize, target_w: usize) -> Result<ZStack> {
    let (h, w) = stack.dims();
    if target_h < h || target_w < w {
        return Err(Error::InvalidArgument(format!(
            "cannot upsample {h}x{w} to the smaller {target_h}x{target_w}"
        )));
    }
    if (target_h, target_w) == (h, w) {
        return Ok(stack.clone());
    }
    let axis = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|i| {
                let s = if n_out > 1 {
                    (i * (n_in - 1)) as f64 / (n_out - 1) as f64
                } else {
                    0.0
                };
                let i0 = (s.floor() as usize).min(n_in - 1);
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let (ay, ax) = (axis(h, target_h), axis(w, target_w));
    let pitch = stack.pixel_pitch() * w as f64 / target_w as f64;
    let planes = stack
        .planes()
        .iter()
        .map(|p| {
            let g = Grid::from_fn(target_h, target_w, |r, c| {
                let (y0, y1, fy) = ay[r];
                let (x0, x1, fx) = ax[c];
                let top = p.get(y0, x0) * (1.0 - fx) + p.get(y0, x1) * fx;
                let bottom = p.get(y1, x0) * (1.0 - fx) + p.get(y1, x1) * fx;
                top * (1.0 - fy) + bottom * fy
            });
            Image::from_grid_clamped(g, pitch)
        })
        .collect::<Result<Vec<_>>>()?;
    ZStack::new(planes, stack.z_step())
}

pub fn mse_loss(pred: &Image, target: &Image) -> Result<f64> {
    crate::metrics::mse(pred, target)
}

/// Post-activation outputs of the three encoder layers for one input.
struct EncoderTape {
    input: Volume,
    acts: [Volume; 3],
}

struct Tape {
    encoders: Vec<EncoderTape>,
    /// Winning plane per fused element (max variant).
    argmax: Vec<u32>,
    /// `(block input, post-ReLU inner activation)` per residual block.
    blocks: Vec<(Volume, Volume)>,
    trunk: Volume,
    up1: Volume,
    up2: Volume,
    /// `tanh` of the final convolution.
    tanh: Vec<f64>,
}

fn encode(params: &NetworkParams, cfg: &ArchConfig, input: Volume) -> EncoderTape {
    let geoms = cfg.encoder_geoms();
    let mut x = conv_forward(&input, params.w(0), params.w(1), &geoms[0]);
    relu_in_place(&mut x);
    let mut y = conv_forward(&x, params.w(2), params.w(3), &geoms[1]);
    relu_in_place(&mut y);
    let mut z = conv_forward(&y, params.w(4), params.w(5), &geoms[2]);
    relu_in_place(&mut z);
    EncoderTape {
        input,
        acts: [x, y, z],
    }
}

fn check_inputs(params: &NetworkParams, cfg: &ArchConfig, stack: &ZStack) -> Result<()> {
    params.check_against(cfg)?;
    let (h, w) = stack.dims();
    if h % 4 != 0 || w % 4 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "network input {h}x{w} must be divisible by 4"
        )));
    }
    if cfg.variant == Variant::Volumetric && stack.len() != cfg.planes {
        return Err(Error::DimensionMismatch(format!(
            "volumetric model expects {} planes, stack has {}",
            cfg.planes,
            stack.len()
        )));
    }
    Ok(())
}

fn plane_volume(img: &Image) -> Volume {
    Volume {
        c: 1,
        d: 1,
        h: img.height(),
        w: img.width(),
        data: img.pixels().to_vec(),
    }
}

fn run(params: &NetworkParams, cfg: &ArchConfig, stack: &ZStack) -> Tape {
    let (h, w) = stack.dims();
    let (encoders, fused, argmax) = match cfg.variant {
        Variant::Max => {
            let encoders: Vec<EncoderTape> = stack
                .planes()
                .iter()
                .map(|p| encode(params, cfg, plane_volume(p)))
                .collect();
            let mut fused = encoders[0].acts[2].clone();
            let mut argmax = vec![0u32; fused.data.len()];
            for (p, enc) in encoders.iter().enumerate().skip(1) {
                for ((f, a), v) in fused
                    .data
                    .iter_mut()
                    .zip(&mut argmax)
                    .zip(&enc.acts[2].data)
                {
                    if *v > *f {
                        *f = *v;
                        *a = p as u32;
                    }
                }
            }
            (encoders, fused, argmax)
        }
        Variant::Volumetric => {
            let d = stack.len();
            let mut input = Volume::zeros(1, d, h, w);
            for (z, p) in stack.planes().iter().enumerate() {
                let i = input.index(0, z, 0, 0);
                input.data[i..i + h * w].copy_from_slice(p.pixels());
            }
            let enc = encode(params, cfg, input);
            let e = &enc.acts[2];
            let mut fused = Volume::zeros(e.c, 1, e.h, e.w);
            let plane = e.h * e.w;
            for c in 0..e.c {
                let dst = &mut fused.data[c * plane..(c + 1) * plane];
                for z in 0..e.d {
                    let i = e.index(c, z, 0, 0);
                    for (o, v) in dst.iter_mut().zip(&e.data[i..i + plane]) {
                        *o += v;
                    }
                }
                dst.iter_mut().for_each(|v| *v /= e.d as f64);
            }
            (vec![enc], fused, Vec::new())
        }
    };

    let mut x = fused;
    let mut blocks = Vec::with_capacity(cfg.residual_blocks);
    for b in 0..cfg.residual_blocks {
        let (i1, i2) = (res_index(b, 0), res_index(b, 1));
        let mut t = conv_forward(&x, params.w(i1), params.w(i1 + 1), &RES_GEOM);
        relu_in_place(&mut t);
        let u = conv_forward(&t, params.w(i2), params.w(i2 + 1), &RES_GEOM);
        let mut next = x.clone();
        next.data.iter_mut().zip(&u.data).for_each(|(a, b)| *a += b);
        blocks.push((x, t));
        x = next;
    }
    let trunk = x;
    let d0 = dec_index(cfg, 0);
    let mut up1 = tconv_forward(&trunk, params.w(d0), params.w(d0 + 1), &UP_GEOM, 1);
    relu_in_place(&mut up1);
    let mut up2 = tconv_forward(&up1, params.w(d0 + 2), params.w(d0 + 3), &UP_GEOM, 1);
    relu_in_place(&mut up2);
    let y = conv_forward(&up2, params.w(d0 + 4), params.w(d0 + 5), &OUT_GEOM);
    let tanh = y.data.iter().map(|v| v.tanh()).collect();
    Tape {
        encoders,
        argmax,
        blocks,
        trunk,
        up1,
        up2,
        tanh,
    }
}

fn output_image(tape: &Tape, stack: &ZStack) -> Result<Image> {
    let (h, w) = stack.dims();
    let pixels = tape.tanh.iter().map(|t| (t + 1.0) / 2.0).collect();
    Image::from_grid_clamped(Grid::new(h, w, pixels)?, stack.pixel_pitch())
}

/// Fuses a stack whose planes are already at the output resolution.
pub fn forward(params: &NetworkParams, cfg: &ArchConfig, stack: &ZStack) -> Result<Image> {
    check_inputs(params, cfg, stack)?;
    output_image(&run(params, cfg, stack), stack)
}

fn encoder_backward(
    params: &NetworkParams,
    cfg: &ArchConfig,
    tape: &EncoderTape,
    mut g3: Volume,
    grads: &mut NetworkParams,
) {
    let geoms = cfg.encoder_geoms();
    let [a1, a2, a3] = &tape.acts;
    relu_backward(&mut g3, a3);
    weight_grad(&g3, a2, &geoms[2], &mut grads.tensors[4].data);
    bias_grad(&g3, &mut grads.tensors[5].data);
    let mut g2 = Volume::zeros(a2.c, a2.d, a2.h, a2.w);
    scatter(&g3, params.w(4), &geoms[2], &mut g2);
    relu_backward(&mut g2, a2);
    weight_grad(&g2, a1, &geoms[1], &mut grads.tensors[2].data);
    bias_grad(&g2, &mut grads.tensors[3].data);
    let mut g1 = Volume::zeros(a1.c, a1.d, a1.h, a1.w);
    scatter(&g2, params.w(2), &geoms[1], &mut g1);
    relu_backward(&mut g1, a1);
    weight_grad(&g1, &tape.input, &geoms[0], &mut grads.tensors[0].data);
    bias_grad(&g1, &mut grads.tensors[1].data);
}

/// Exact gradients of `mse_loss(forward(stack), target)` with respect to
/// every parameter. Returns the gradients and the loss.
pub fn backward(
    params: &NetworkParams,
    cfg: &ArchConfig,
    stack: &ZStack,
    target: &Image,
) -> Result<(NetworkParams, f64)> {
    check_inputs(params, cfg, stack)?;
    if target.dims() != stack.dims() {
        return Err(Error::DimensionMismatch(format!(
            "target {:?} vs stack {:?}",
            target.dims(),
            stack.dims()
        )));
    }
    let tape = run(params, cfg, stack);
    let n = target.pixels().len() as f64;
    let mut loss = 0.0;
    let (h, w) = stack.dims();
    let mut gy = Volume::zeros(1, 1, h, w);
    for ((g, t), y) in gy.data.iter_mut().zip(&tape.tanh).zip(target.pixels()) {
        let out = (t + 1.0) / 2.0;
        let diff = out - y;
        loss += diff * diff;
        *g = 2.0 * diff / n * (1.0 - t * t) / 2.0;
    }
    loss /= n;

    let mut grads = params.zeros_like();
    let d0 = dec_index(cfg, 0);

    weight_grad(&gy, &tape.up2, &OUT_GEOM, &mut grads.tensors[d0 + 4].data);
    bias_grad(&gy, &mut grads.tensors[d0 + 5].data);
    let mut g_up2 = Volume::zeros(tape.up2.c, 1, tape.up2.h, tape.up2.w);
    scatter(&gy, params.w(d0 + 4), &OUT_GEOM, &mut g_up2);
    relu_backward(&mut g_up2, &tape.up2);

    weight_grad(&tape.up1, &g_up2, &UP_GEOM, &mut grads.tensors[d0 + 2].data);
    bias_grad(&g_up2, &mut grads.tensors[d0 + 3].data);
    let mut g_up1 = Volume::zeros(tape.up1.c, 1, tape.up1.h, tape.up1.w);
    gather(&g_up2, params.w(d0 + 2), &UP_GEOM, &mut g_up1);
    relu_backward(&mut g_up1, &tape.up1);

    weight_grad(&tape.trunk, &g_up1, &UP_GEOM, &mut grads.tensors[d0].data);
    bias_grad(&g_up1, &mut grads.tensors[d0 + 1].data);
    let mut g = Volume::zeros(tape.trunk.c, 1, tape.trunk.h, tape.trunk.w);
    gather(&g_up1, params.w(d0), &UP_GEOM, &mut g);

    for (b, (x_in, t)) in tape.blocks.iter().enumerate().rev() {
        let (i1, i2) = (res_index(b, 0), res_index(b, 1));
        weight_grad(&g, t, &RES_GEOM, &mut grads.tensors[i2].data);
        bias_grad(&g, &mut grads.tensors[i2 + 1].data);
        let mut g_t = Volume::zeros(t.c, 1, t.h, t.w);
        scatter(&g, params.w(i2), &RES_GEOM, &mut g_t);
        relu_backward(&mut g_t, t);
        weight_grad(&g_t, x_in, &RES_GEOM, &mut grads.tensors[i1].data);
        bias_grad(&g_t, &mut grads.tensors[i1 + 1].data);
        // skip connection carries g through unchanged
        scatter(&g_t, params.w(i1), &RES_GEOM, &mut g);
    }

    match cfg.variant {
        Variant::Max => {
            for (p, enc) in tape.encoders.iter().enumerate() {
                let a3 = &enc.acts[2];
                let mut g3 = Volume::zeros(a3.c, a3.d, a3.h, a3.w);
                let mut any = false;
                for ((dst, src), arg) in g3.data.iter_mut().zip(&g.data).zip(&tape.argmax) {
                    if *arg as usize == p {
                        *dst = *src;
                        any = true;
                    }
                }
                if any {
                    encoder_backward(params, cfg, enc, g3, &mut grads);
                }
            }
        }
        Variant::Volumetric => {
            let enc = &tape.encoders[0];
            let a3 = &enc.acts[2];
            let mut g3 = Volume::zeros(a3.c, a3.d, a3.h, a3.w);
            let plane = a3.h * a3.w;
            let scale = 1.0 / a3.d as f64;
            for c in 0..a3.c {
                let src = &g.data[c * plane..(c + 1) * plane];
                for z in 0..a3.d {
                    let i = g3.index(c, z, 0, 0);
                    for (dst, s) in g3.data[i..i + plane].iter_mut().zip(src) {
                        *dst = s * scale;
                    }
                }
            }
            encoder_backward(params, cfg, enc, g3, &mut grads);
        }
    }
    Ok((grads, loss))
}
