use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use edof::acquisition::SynthConfig;
use edof::neural::{ArchConfig, TrainConfig};
use edof::pipeline::{
    discover_manifests, run_bench, run_eval, run_fuse_batch, run_train, write_degraded,
    write_synthetic_set, BatchJob, EvalJob, Method, Scenario, TrainJob, DEFAULT_LEVELS,
    EVAL_REPORT,
};
use edof::wavelet::Wavelet;
use edof::Error;

#[derive(Parser)]
#[command(
    name = "edof",
    version,
    about = "Extended depth-of-field fusion for microscopy z-stacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse stacks into single all-in-focus images
    Fuse(FuseArgs),
    /// Write degraded copies of stacks
    Simulate(SimulateArgs),
    /// Generate synthetic stacks with ground truth
    Synth(SynthArgs),
    /// Score fused images against references (SSIM, Dice)
    Eval(EvalArgs),
    /// Time fusion with one worker and with N workers
    Bench(FuseArgs),
    /// Train a fusion network against wavelet fusion targets
    Train(TrainArgs),
}

#[derive(Args)]
struct FusionFlags {
    #[arg(long, default_value = "wavelet", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    levels: usize,
    #[arg(long, default_value = "sym8", value_parser = parse_wavelet)]
    wavelet: Wavelet,
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args)]
struct FuseArgs {
    /// Manifest files or directories containing `*.manifest`
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    fusion: FusionFlags,
    /// none, zstep:K, bin:F or lowmag:NA:SCALE[:WAVELENGTH]
    #[arg(long, default_value = "none", value_parser = parse_scenario)]
    scenario: Scenario,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Zstep,
    Bin,
    Lowmag,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long, default_value_t = 4)]
    factor: usize,
    #[arg(long, default_value_t = 0.6)]
    na: f64,
    #[arg(long, default_value_t = 0.55)]
    wavelength: f64,
    #[arg(long, default_value_t = 2.5)]
    downscale: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    planes: usize,
    #[arg(long, num_args = 2, value_names = ["H", "W"], default_values_t = [128, 128])]
    size: Vec<usize>,
    /// Number of stacks
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 12)]
    objects: usize,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 0.065)]
    pitch: f64,
    #[arg(long, default_value_t = 0.5)]
    z_step: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 0.065)]
    pitch: f64,
    /// Label for the method column
    #[arg(long, default_value = "wavelet")]
    method: String,
    /// Label for the scenario column
    #[arg(long, default_value = "none")]
    scenario: String,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    data: PathBuf,
    #[arg(long, default_value = "cnn-max", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value = "none", value_parser = parse_scenario)]
    scenario: Scenario,
    #[arg(long, default_value_t = 4)]
    base_width: usize,
    #[arg(long, default_value_t = 2)]
    residual_blocks: usize,
    #[arg(long, default_value_t = 300)]
    steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 4)]
    batch_size: usize,
    /// Square training crop; 0 trains on whole images
    #[arg(long, default_value_t = 64)]
    patch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    levels: usize,
    #[arg(long, default_value = "sym8", value_parser = parse_wavelet)]
    wavelet: Wavelet,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_wavelet(s: &str) -> Result<Wavelet, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn batch_job(args: FuseArgs) -> Result<BatchJob, Error> {
    let mut job = BatchJob::new(discover_manifests(&args.inputs)?, args.out);
    job.method = args.fusion.method;
    job.levels = args.fusion.levels;
    job.wavelet = args.fusion.wavelet;
    job.weights = args.fusion.weights;
    job.scenario = args.scenario;
    job.workers = args.workers;
    Ok(job)
}

/// Number of failed stacks.
fn run(command: Command) -> Result<usize, Error> {
    match command {
        Command::Fuse(args) => {
            let report = run_fuse_batch(&batch_job(args)?)?;
            for o in &report.outcomes {
                if let Err((code, msg)) = &o.result {
                    eprintln!("{}: {code}: {msg}", o.stack_id);
                }
            }
            println!(
                "fused {} of {} stacks; report {}",
                report.outcomes.len() - report.failures(),
                report.outcomes.len(),
                report.csv_path.display()
            );
            Ok(report.failures())
        }
        Command::Bench(args) => {
            println!("{}", run_bench(&batch_job(args)?)?);
            Ok(0)
        }
        Command::Simulate(args) => {
            let scenario =
                match args.mode {
                    Mode::Zstep => Scenario::ZStep(args.stride.ok_or_else(|| {
                        Error::InvalidArgument("--mode zstep needs --stride".into())
                    })?),
                    Mode::Bin => Scenario::Bin(args.factor),
                    Mode::Lowmag => Scenario::LowMag {
                        numerical_aperture: args.na,
                        wavelength: args.wavelength,
                        scale: args.downscale,
                    },
                };
            let manifests = discover_manifests(&args.inputs)?;
            if manifests.is_empty() {
                return Err(Error::InvalidArgument("no stack manifests given".into()));
            }
            let mut failed = 0;
            for m in &manifests {
                match write_degraded(m, &scenario, &args.out) {
                    Ok(p) => println!("{}", p.display()),
                    Err(e) => {
                        eprintln!("{}: {}: {e}", m.display(), e.code());
                        failed += 1;
                    }
                }
            }
            Ok(failed)
        }
        Command::Synth(args) => {
            let cfg = SynthConfig {
                seed: args.seed,
                height: args.size[0],
                width: args.size[1],
                planes: args.planes,
                objects: args.objects,
                noise_sigma: args.noise,
                pixel_pitch: args.pitch,
                z_step: args.z_step,
                ..SynthConfig::default()
            };
            for p in write_synthetic_set(&cfg, args.count, &args.out)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
        Command::Eval(args) => {
            let report = run_eval(&EvalJob {
                reference_dir: args.reference,
                test_dir: args.test,
                pixel_pitch: args.pitch,
                method: args.method,
                scenario: args.scenario,
            })?;
            std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
                path: args.out.clone(),
                source: e,
            })?;
            report.write_csv(&args.out.join(EVAL_REPORT))?;
            println!(
                "ssim {} | dice {}",
                report.ssim_summary().unwrap_or_default(),
                report.dice_summary().unwrap_or_else(|| "n/a".into())
            );
            Ok(0)
        }
        Command::Train(args) => {
            let arch = match args.method {
                Method::CnnMax => ArchConfig::max(args.base_width, args.residual_blocks),
                Method::Cnn3d => ArchConfig::volumetric(args.base_width, args.residual_blocks, 0),
                Method::Wavelet => {
                    return Err(Error::InvalidArgument(
                        "train needs --method cnn-max or cnn-3d".into(),
                    ))
                }
            };
            let mut job = TrainJob::new(args.data, arch, args.out);
            job.scenario = args.scenario;
            job.wavelet = args.wavelet;
            job.levels = args.levels;
            job.train = TrainConfig {
                steps: args.steps,
                learning_rate: args.learning_rate,
                batch_size: args.batch_size,
                patch_size: (args.patch_size > 0).then_some(args.patch_size),
                seed: args.seed,
                ..TrainConfig::default()
            };
            let report = run_train(&job)?;
            if let (Some(first), Some(last)) = (report.losses.first(), report.losses.last()) {
                println!("loss {first:.6} -> {last:.6}");
            }
            println!("{}", report.weights_path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
