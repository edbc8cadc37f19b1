use std::path::{Path, PathBuf};

use super::{create_dir, csv_error, csv_writer, discover_manifests, Scenario, DEFAULT_LEVELS};
use crate::error::{Error, Result};
use crate::image::{load_stack, Image, StackManifest, ZStack};
use crate::neural::{
    init_params, pre_upsample, save_weights, train, ArchConfig, TrainConfig, Variant,
};
use crate::wavelet::{fuse_wavelet, Wavelet};

pub const LOSS_HEADER: [&str; 2] = ["step", "loss"];
pub const WEIGHTS_FILE: &str = "weights.bin";
pub const LOSS_FILE: &str = "train_loss.csv";

#[derive(Debug, Clone)]
pub struct TrainJob {
    pub data_dir: PathBuf,
    pub scenario: Scenario,
    /// For the volumetric variant, `planes == 0` takes the count from the data.
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    /// Wavelet used to build the fusion targets.
    pub wavelet: Wavelet,
    pub levels: usize,
}

impl TrainJob {
    pub fn new(
        data_dir: impl Into<PathBuf>,
        arch: ArchConfig,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        TrainJob {
            data_dir: data_dir.into(),
            scenario: Scenario::None,
            arch,
            train: TrainConfig::default(),
            out_dir: out_dir.into(),
            wavelet: Wavelet::Sym8,
            levels: DEFAULT_LEVELS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub arch: ArchConfig,
    pub losses: Vec<f64>,
    pub weights_path: PathBuf,
    pub loss_path: PathBuf,
}

fn crop_to(img: &Image, h: usize, w: usize) -> Result<Image> {
    Image::from_grid(img.grid().crop(0, 0, h, w), img.pixel_pitch())
}

/// Degraded input (upsampled to the target size) and the wavelet fusion of
/// the full stack, both cropped to a multiple of 4.
fn build_pair(job: &TrainJob, manifest: &Path) -> Result<(ZStack, Image)> {
    let stack = load_stack(&StackManifest::from_file(manifest)?)?;
    let target = fuse_wavelet(&stack, &job.wavelet.bank(), job.levels)?;
    let (h, w) = stack.dims();
    let input = pre_upsample(&job.scenario.apply(&stack)?, h, w)?;
    let (ch, cw) = (h / 4 * 4, w / 4 * 4);
    if ch == 0 || cw == 0 {
        return Err(Error::TooSmall {
            size: h.min(w),
            required: 4,
        });
    }
    let planes = input
        .planes()
        .iter()
        .map(|p| crop_to(p, ch, cw))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        ZStack::new(planes, input.z_step())?,
        crop_to(&target, ch, cw)?,
    ))
}

/// Trains on every manifest in the data directory and writes `weights.bin`
/// and `train_loss.csv` (1-based step, mean batch loss) to the output
/// directory.
pub fn run_train(job: &TrainJob) -> Result<TrainReport> {
    let manifests = discover_manifests(std::slice::from_ref(&job.data_dir))?;
    if manifests.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let data = manifests
        .iter()
        .map(|m| build_pair(job, m))
        .collect::<Result<Vec<_>>>()?;
    let mut arch = job.arch;
    if arch.variant == Variant::Volumetric && arch.planes == 0 {
        arch.planes = data[0].0.len();
    }
    let init = init_params(&arch, job.train.seed)?;
    let (params, losses) = train(&arch, init, &data, &job.train)?;

    create_dir(&job.out_dir)?;
    let weights_path = job.out_dir.join(WEIGHTS_FILE);
    save_weights(&weights_path, &arch, &params)?;
    let loss_path = job.out_dir.join(LOSS_FILE);
    let mut w = csv_writer(&loss_path)?;
    w.write_record(LOSS_HEADER)
        .map_err(|e| csv_error(&loss_path, e))?;
    for (i, l) in losses.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format!("{l:.10e}")])
            .map_err(|e| csv_error(&loss_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&loss_path, e))?;
    Ok(TrainReport {
        arch,
        losses,
        weights_path,
        loss_path,
    })
}
