use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{backward, ArchConfig, NetworkParams};
use crate::error::{Error, Result};
use crate::image::{Image, ZStack};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    /// Square crop side; `None` trains on whole images.
    pub patch_size: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 4,
            patch_size: Some(64),
            seed: 0,
        }
    }
}

fn crop_image(img: &Image, r: usize, c: usize, h: usize, w: usize) -> Result<Image> {
    Image::from_grid(img.grid().crop(r, c, h, w), img.pixel_pitch())
}

fn sample(
    rng: &mut ChaCha8Rng,
    data: &[(ZStack, Image)],
    patch: Option<usize>,
) -> Result<(ZStack, Image)> {
    let (stack, target) = &data[rng.random_range(0..data.len())];
    let (h, w) = stack.dims();
    let Some(p) = patch else {
        return Ok((stack.clone(), target.clone()));
    };
    let (ph, pw) = (p.min(h), p.min(w));
    let (r, c) = (rng.random_range(0..=h - ph), rng.random_range(0..=w - pw));
    let planes = stack
        .planes()
        .iter()
        .map(|img| crop_image(img, r, c, ph, pw))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        ZStack::new(planes, stack.z_step())?,
        crop_image(target, r, c, ph, pw)?,
    ))
}

/// Adam on the mean batch loss. Inputs must already share the target's
/// dimensions. Returns the trained parameters and the loss of every step.
pub fn train(
    arch: &ArchConfig,
    init: NetworkParams,
    data: &[(ZStack, Image)],
    cfg: &TrainConfig,
) -> Result<(NetworkParams, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    init.check_against(arch)?;
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    if let Some(p) = cfg.patch_size {
        if p == 0 || p % 4 != 0 {
            return Err(Error::InvalidArgument(format!(
                "patch size {p} must be a positive multiple of 4"
            )));
        }
    }
    for (stack, target) in data {
        if stack.dims() != target.dims() {
            return Err(Error::DimensionMismatch(format!(
                "training input {:?} vs target {:?}",
                stack.dims(),
                target.dims()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init;
    let mut m = params.zeros_like();
    let mut v = params.zeros_like();
    let mut history = Vec::with_capacity(cfg.steps);
    for step in 1..=cfg.steps {
        let mut grad = params.zeros_like();
        let mut loss = 0.0;
        for _ in 0..cfg.batch_size {
            let (stack, target) = sample(&mut rng, data, cfg.patch_size)?;
            let (g, l) = backward(&params, arch, &stack, &target)?;
            loss += l;
            for (acc, t) in grad.tensors.iter_mut().zip(&g.tensors) {
                acc.data.iter_mut().zip(&t.data).for_each(|(a, b)| *a += b);
            }
        }
        let scale = 1.0 / cfg.batch_size as f64;
        history.push(loss * scale);

        let bc1 = 1.0 - cfg.beta1.powi(step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(step as i32);
        for (((p, g), m), v) in params
            .tensors
            .iter_mut()
            .zip(&grad.tensors)
            .zip(&mut m.tensors)
            .zip(&mut v.tensors)
        {
            for i in 0..p.data.len() {
                let gi = g.data[i] * scale;
                m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
                v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
                let mh = m.data[i] / bc1;
                let vh = v.data[i] / bc2;
                p.data[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
            }
        }
        params.round_to_precision();
    }
    Ok((params, history))
}
