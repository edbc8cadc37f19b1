//! Batch orchestration over stack manifests: degradation scenarios, fusion
//! with a fixed-size worker pool, timing, evaluation and training drivers.
//!
//! Reports are CSV files with fixed headers, rows sorted by stack id. A
//! stack id is the manifest's file stem.

mod bench;
mod eval;
mod train;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

pub use bench::{bench_stacks, run_bench, TimingReport, BENCH_HEADER, BENCH_REPORT};
pub use eval::{format_mean_std, run_eval, EvalJob, EvalReport, EvalRow, EVAL_HEADER, EVAL_REPORT};
pub use train::{run_train, TrainJob, TrainReport, LOSS_FILE, LOSS_HEADER, WEIGHTS_FILE};

use crate::acquisition::{bin_stack, gen_synthetic_stack, simulate_low_mag, subsample_zstep};
use crate::acquisition::{PsfParams, SynthConfig};
use crate::error::{Error, Result};
use crate::image::{load_stack, save_pgm, BitDepth, Image, StackManifest, ZStack};
use crate::neural::{forward, load_weights, pre_upsample, ArchConfig, NetworkParams, Variant};
use crate::wavelet::{fuse_wavelet, FilterBank, Wavelet};

pub const FUSE_HEADER: [&str; 5] = ["stack_id", "method", "scenario", "status", "seconds"];
pub const FUSE_REPORT: &str = "fuse_report.csv";
pub const DEFAULT_LEVELS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Wavelet,
    CnnMax,
    Cnn3d,
}

impl Method {
    fn variant(self) -> Option<Variant> {
        match self {
            Method::Wavelet => None,
            Method::CnnMax => Some(Variant::Max),
            Method::Cnn3d => Some(Variant::Volumetric),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wavelet" => Ok(Method::Wavelet),
            "cnn-max" => Ok(Method::CnnMax),
            "cnn-3d" => Ok(Method::Cnn3d),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Wavelet => "wavelet",
            Method::CnnMax => "cnn-max",
            Method::Cnn3d => "cnn-3d",
        })
    }
}

/// Acquisition degradation applied to a stack before fusion.
///
/// Text form: `none`, `zstep:K`, `bin:F`, `lowmag:NA:SCALE` or
/// `lowmag:NA:SCALE:WAVELENGTH`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    None,
    ZStep(usize),
    Bin(usize),
    LowMag {
        numerical_aperture: f64,
        wavelength: f64,
        scale: f64,
    },
}

impl Scenario {
    pub fn apply(&self, stack: &ZStack) -> Result<ZStack> {
        match *self {
            Scenario::None => Ok(stack.clone()),
            Scenario::ZStep(k) => subsample_zstep(stack, k),
            Scenario::Bin(f) => bin_stack(stack, f),
            Scenario::LowMag {
                numerical_aperture,
                wavelength,
                scale,
            } => {
                let params = PsfParams {
                    numerical_aperture,
                    wavelength,
                    ..PsfParams::low_mag_for(stack)
                };
                simulate_low_mag(stack, &params, scale)
            }
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad scenario {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| parts[i].parse::<f64>().map_err(|_| bad());
        let count = |i: usize| parts[i].parse::<usize>().map_err(|_| bad());
        match (parts[0], parts.len()) {
            ("none", 1) => Ok(Scenario::None),
            ("zstep", 2) => Ok(Scenario::ZStep(count(1)?)),
            ("bin", 2) => Ok(Scenario::Bin(count(1)?)),
            ("lowmag", 3 | 4) => Ok(Scenario::LowMag {
                numerical_aperture: num(1)?,
                scale: num(2)?,
                wavelength: if parts.len() == 4 { num(3)? } else { 0.55 },
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::None => write!(f, "none"),
            Scenario::ZStep(k) => write!(f, "zstep:{k}"),
            Scenario::Bin(b) => write!(f, "bin:{b}"),
            Scenario::LowMag {
                numerical_aperture,
                wavelength,
                scale,
            } => write!(f, "lowmag:{numerical_aperture}:{scale}:{wavelength}"),
        }
    }
}

/// A fusion method with everything it needs, shared read-only by workers.
#[derive(Debug, Clone)]
pub struct Fuser {
    method: Method,
    bank: FilterBank,
    levels: usize,
    model: Option<(ArchConfig, NetworkParams)>,
}

impl Fuser {
    pub fn wavelet(wavelet: Wavelet, levels: usize) -> Self {
        Fuser {
            method: Method::Wavelet,
            bank: wavelet.bank(),
            levels,
            model: None,
        }
    }

    pub fn network(arch: ArchConfig, params: NetworkParams) -> Result<Self> {
        params.check_against(&arch)?;
        let method = match arch.variant {
            Variant::Max => Method::CnnMax,
            Variant::Volumetric => Method::Cnn3d,
        };
        Ok(Fuser {
            method,
            bank: FilterBank::sym8(),
            levels: DEFAULT_LEVELS,
            model: Some((arch, params)),
        })
    }

    pub fn from_job(job: &BatchJob) -> Result<Self> {
        let Some(variant) = job.method.variant() else {
            return Ok(Fuser::wavelet(job.wavelet, job.levels));
        };
        let path = job.weights.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("method {} needs a weights file", job.method))
        })?;
        let (arch, params) = load_weights(path)?;
        if arch.variant != variant {
            return Err(Error::InvalidArgument(format!(
                "weights hold a {} model, method {} was requested",
                arch.variant, job.method
            )));
        }
        Fuser::network(arch, params)
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Fuses `stack`. Network methods first upsample the planes to
    /// `output_dims`; the wavelet method works at the stack's own size.
    pub fn fuse(&self, stack: &ZStack, output_dims: (usize, usize)) -> Result<Image> {
        match &self.model {
            None => fuse_wavelet(stack, &self.bank, self.levels),
            Some((arch, params)) => {
                let (h, w) = output_dims;
                let up = pre_upsample(stack, h, w)?;
                // the encoder downsamples twice; pad to a multiple of 4
                let (ph, pw) = (h.div_ceil(4) * 4, w.div_ceil(4) * 4);
                if (ph, pw) == (h, w) {
                    return forward(params, arch, &up);
                }
                let padded = up
                    .planes()
                    .iter()
                    .map(|p| Image::from_grid(p.grid().pad_symmetric(ph, pw), p.pixel_pitch()))
                    .collect::<Result<Vec<_>>>()?;
                let out = forward(params, arch, &ZStack::new(padded, up.z_step())?)?;
                Image::from_grid(out.grid().crop(0, 0, h, w), out.pixel_pitch())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchJob {
    pub manifests: Vec<PathBuf>,
    pub method: Method,
    pub scenario: Scenario,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub levels: usize,
    pub wavelet: Wavelet,
    pub weights: Option<PathBuf>,
}

impl BatchJob {
    /// Wavelet fusion, no degradation, one worker.
    pub fn new(manifests: Vec<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        BatchJob {
            manifests,
            method: Method::Wavelet,
            scenario: Scenario::None,
            workers: 1,
            out_dir: out_dir.into(),
            levels: DEFAULT_LEVELS,
            wavelet: Wavelet::Sym8,
            weights: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.manifests.is_empty() {
            return Err(Error::InvalidArgument("no stack manifests given".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be >= 1".into()));
        }
        let mut ids: Vec<String> = self.manifests.iter().map(|p| stack_id(p)).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "duplicate stack id {:?}",
                w[0]
            )));
        }
        Ok(())
    }
}

pub fn stack_id(manifest: &Path) -> String {
    manifest
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Expands directories into their `*.manifest` files (sorted); files pass
/// through unchanged.
pub fn discover_manifests(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|e| Error::io(input, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "manifest"))
                .collect();
            found.sort();
            out.extend(found);
        } else if input.is_file() {
            out.push(input.clone());
        } else {
            return Err(Error::io(
                input,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
            ));
        }
    }
    Ok(out)
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidArgument(format!("{}: {other:?}", path.display())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackOutcome {
    pub stack_id: String,
    /// Fusion seconds, or the error code and message of the failed step.
    pub result: std::result::Result<f64, (&'static str, String)>,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub method: Method,
    pub scenario: Scenario,
    /// Sorted by stack id.
    pub outcomes: Vec<StackOutcome>,
    pub csv_path: PathBuf,
}

impl BatchReport {
    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result.is_err()).count()
    }
}

pub fn fused_path(out_dir: &Path, id: &str) -> PathBuf {
    out_dir.join(format!("{id}_fused.pgm"))
}

fn fuse_one(fuser: &Fuser, job: &BatchJob, manifest: &Path) -> Result<f64> {
    let stack = load_stack(&StackManifest::from_file(manifest)?)?;
    let dims = stack.dims();
    let degraded = job.scenario.apply(&stack)?;
    let start = Instant::now();
    let fused = fuser.fuse(&degraded, dims)?;
    let seconds = start.elapsed().as_secs_f64();
    save_pgm(
        &fused,
        BitDepth::Sixteen,
        fused_path(&job.out_dir, &stack_id(manifest)),
    )?;
    Ok(seconds)
}

/// Fuses every stack of the job, writing `<stack_id>_fused.pgm` and
/// `fuse_report.csv` into the output directory. A failing stack is recorded
/// and the batch carries on.
pub fn run_fuse_batch(job: &BatchJob) -> Result<BatchReport> {
    job.validate()?;
    let fuser = Fuser::from_job(job)?;
    create_dir(&job.out_dir)?;
    let pool = thread_pool(job.workers)?;
    let mut outcomes: Vec<StackOutcome> = pool.install(|| {
        job.manifests
            .par_iter()
            .map(|m| StackOutcome {
                stack_id: stack_id(m),
                result: fuse_one(&fuser, job, m).map_err(|e| (e.code(), e.to_string())),
            })
            .collect()
    });
    outcomes.sort_by(|a, b| a.stack_id.cmp(&b.stack_id));

    let csv_path = job.out_dir.join(FUSE_REPORT);
    let mut w = csv_writer(&csv_path)?;
    let wrap = |e| csv_error(&csv_path, e);
    w.write_record(FUSE_HEADER).map_err(wrap)?;
    let (method, scenario) = (job.method.to_string(), job.scenario.to_string());
    for o in &outcomes {
        let (status, seconds) = match &o.result {
            Ok(s) => ("ok".to_string(), format!("{s:.6}")),
            Err((code, _)) => (code.to_string(), String::new()),
        };
        w.write_record([&o.stack_id, &method, &scenario, &status, &seconds])
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok(BatchReport {
        method: job.method,
        scenario: job.scenario,
        outcomes,
        csv_path,
    })
}

/// Writes `<id>.manifest` plus one 16-bit PGM per plane into `dir`.
pub fn write_stack(stack: &ZStack, id: &str, dir: &Path) -> Result<PathBuf> {
    create_dir(dir)?;
    let mut paths = Vec::with_capacity(stack.len());
    for (z, plane) in stack.planes().iter().enumerate() {
        let p = dir.join(format!("{id}_z{z:02}.pgm"));
        save_pgm(plane, BitDepth::Sixteen, &p)?;
        paths.push(p);
    }
    let manifest_path = dir.join(format!("{id}.manifest"));
    StackManifest::new(stack.z_step(), stack.pixel_pitch(), paths)?.write(&manifest_path)?;
    Ok(manifest_path)
}

pub fn ground_truth_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}_gt.pgm"))
}

/// Generates `count` synthetic stacks with seeds `base.seed + i`, named
/// `synth_0000`, `synth_0001`, ...; each gets its manifest, planes and
/// `<id>_gt.pgm`. Returns the manifest paths.
pub fn write_synthetic_set(base: &SynthConfig, count: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    (0..count)
        .map(|i| {
            let cfg = SynthConfig {
                seed: base.seed.wrapping_add(i as u64),
                ..base.clone()
            };
            let (stack, gt) = gen_synthetic_stack(&cfg)?;
            let id = format!("synth_{i:04}");
            let manifest = write_stack(&stack, &id, dir)?;
            save_pgm(&gt, BitDepth::Sixteen, ground_truth_path(dir, &id))?;
            Ok(manifest)
        })
        .collect()
}

/// Degrades the stack behind `manifest` and writes it as `<id>.manifest`
/// (same id) into `dir`.
pub fn write_degraded(manifest: &Path, scenario: &Scenario, dir: &Path) -> Result<PathBuf> {
    let stack = load_stack(&StackManifest::from_file(manifest)?)?;
    write_stack(&scenario.apply(&stack)?, &stack_id(manifest), dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_text_round_trip() {
        for s in ["none", "zstep:3", "bin:4", "lowmag:0.6:2.5:0.55"] {
            assert_eq!(s.parse::<Scenario>().unwrap().to_string(), s);
        }
        assert_eq!(
            "lowmag:0.6:2.5".parse::<Scenario>().unwrap(),
            Scenario::LowMag {
                numerical_aperture: 0.6,
                wavelength: 0.55,
                scale: 2.5
            }
        );
        for bad in ["", "zstep", "zstep:x", "bin:4:4", "blur:1"] {
            assert!(bad.parse::<Scenario>().is_err(), "{bad}");
        }
    }

    #[test]
    fn method_names() {
        for m in [Method::Wavelet, Method::CnnMax, Method::Cnn3d] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("cnn".parse::<Method>().is_err());
    }

    #[test]
    fn job_validation() {
        let dir = PathBuf::from("out");
        assert!(matches!(
            BatchJob::new(vec![], &dir).validate(),
            Err(Error::InvalidArgument(_))
        ));
        let mut job = BatchJob::new(vec!["a/s1.manifest".into()], &dir);
        job.workers = 0;
        assert!(job.validate().is_err());
        let dup = BatchJob::new(vec!["a/s1.manifest".into(), "b/s1.manifest".into()], &dir);
        assert!(dup.validate().is_err());
        let mut cnn = BatchJob::new(vec!["a/s1.manifest".into()], &dir);
        cnn.method = Method::CnnMax;
        assert!(matches!(
            Fuser::from_job(&cnn),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn stack_id_is_stem() {
        assert_eq!(
            stack_id(Path::new("/x/y/slide3_fov12.manifest")),
            "slide3_fov12"
        );
    }

    #[test]
    fn network_fuser_handles_sizes_not_divisible_by_four() {
        use crate::neural::{init_params, ArchConfig};
        let arch = ArchConfig::max(2, 1);
        let fuser = Fuser::network(arch, init_params(&arch, 1).unwrap()).unwrap();
        let stack = ZStack::new(vec![Image::constant(6, 10, 0.5, 0.1).unwrap(); 2], 0.5).unwrap();
        let out = fuser.fuse(&stack, (13, 22)).unwrap();
        assert_eq!(out.dims(), (13, 22));
        assert!(fuser.fuse(&stack, (5, 22)).is_err());
    }
}
