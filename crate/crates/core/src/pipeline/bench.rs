use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::{create_dir, csv_error, csv_writer, thread_pool, BatchJob, Fuser, Method};
use crate::error::{Error, Result};
use crate::image::{load_stack, Image, StackManifest, ZStack};

pub const BENCH_HEADER: [&str; 8] = [
    "method",
    "planes",
    "stacks",
    "workers",
    "sequential_seconds",
    "parallel_seconds",
    "speedup",
    "identical_outputs",
];
pub const BENCH_REPORT: &str = "bench_report.csv";
const MIN_STACKS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub method: Method,
    pub planes: usize,
    pub stacks: usize,
    pub workers: usize,
    pub sequential_seconds: f64,
    pub parallel_seconds: f64,
    /// `sequential_seconds / parallel_seconds`.
    pub speedup: f64,
    /// Whether both runs produced bit-identical images.
    pub identical_outputs: bool,
}

impl TimingReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        let row = [
            self.method.to_string(),
            self.planes.to_string(),
            self.stacks.to_string(),
            self.workers.to_string(),
            format!("{:.6}", self.sequential_seconds),
            format!("{:.6}", self.parallel_seconds),
            format!("{:.3}", self.speedup),
            self.identical_outputs.to_string(),
        ];
        w.write_record(BENCH_HEADER)
            .map_err(|e| csv_error(path, e))?;
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for TimingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} | {} planes | {} stacks | 1 worker {:.3} s | {} workers {:.3} s | speedup {:.2}x",
            self.method,
            self.planes,
            self.stacks,
            self.sequential_seconds,
            self.workers,
            self.parallel_seconds,
            self.speedup
        )
    }
}

/// Times fusion of in-memory stacks, first on the calling thread and then
/// on a pool of `workers`. `output_dims` is passed through to the fuser.
/// Returns the report and the fused images of the parallel run.
pub fn bench_stacks(
    fuser: &Fuser,
    stacks: &[(ZStack, (usize, usize))],
    workers: usize,
) -> Result<(TimingReport, Vec<Image>)> {
    if stacks.is_empty() {
        return Err(Error::InvalidArgument("nothing to benchmark".into()));
    }
    let start = Instant::now();
    let sequential = stacks
        .iter()
        .map(|(s, dims)| fuser.fuse(s, *dims))
        .collect::<Result<Vec<_>>>()?;
    let sequential_seconds = start.elapsed().as_secs_f64().max(1e-9);

    let pool = thread_pool(workers)?;
    let start = Instant::now();
    let parallel = pool.install(|| {
        stacks
            .par_iter()
            .map(|(s, dims)| fuser.fuse(s, *dims))
            .collect::<Result<Vec<_>>>()
    })?;
    let parallel_seconds = start.elapsed().as_secs_f64().max(1e-9);

    let report = TimingReport {
        method: fuser.method(),
        planes: stacks[0].0.len(),
        stacks: stacks.len(),
        workers,
        sequential_seconds,
        parallel_seconds,
        speedup: sequential_seconds / parallel_seconds,
        identical_outputs: sequential == parallel,
    };
    Ok((report, parallel))
}

/// Loads and degrades every stack up front, then times fusion only.
/// Writes `bench_report.csv` into the job's output directory.
pub fn run_bench(job: &BatchJob) -> Result<TimingReport> {
    job.validate()?;
    if job.manifests.len() < MIN_STACKS {
        return Err(Error::InvalidArgument(format!(
            "benchmark needs at least {MIN_STACKS} stacks, got {}",
            job.manifests.len()
        )));
    }
    let fuser = Fuser::from_job(job)?;
    let stacks = job
        .manifests
        .iter()
        .map(|m| {
            let stack = load_stack(&StackManifest::from_file(m)?)?;
            let dims = stack.dims();
            Ok((job.scenario.apply(&stack)?, dims))
        })
        .collect::<Result<Vec<_>>>()?;
    let (report, _) = bench_stacks(&fuser, &stacks, job.workers)?;
    create_dir(&job.out_dir)?;
    report.write_csv(&job.out_dir.join(BENCH_REPORT))?;
    Ok(report)
}
