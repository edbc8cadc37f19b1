use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{csv_error, csv_writer};
use crate::error::{Error, Result};
use crate::image::{load_pgm, to_unit, Image, ZStack};
use crate::metrics::{dice, segment_parasite_regions, ssim, SsimConfig};
use crate::neural::pre_upsample;

pub const EVAL_HEADER: [&str; 5] = ["stack_id", "method", "scenario", "ssim", "dice"];
pub const EVAL_REPORT: &str = "eval_report.csv";
const SUFFIXES: [&str; 2] = ["_fused", "_gt"];

#[derive(Debug, Clone)]
pub struct EvalJob {
    pub reference_dir: PathBuf,
    pub test_dir: PathBuf,
    pub pixel_pitch: f64,
    /// Labels copied into the report.
    pub method: String,
    pub scenario: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub stack_id: String,
    pub ssim: f64,
    /// `None` when Otsu finds no threshold on either image.
    pub dice: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub scenario: String,
    /// Sorted by stack id.
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn ssim_summary(&self) -> Option<String> {
        format_mean_std(&self.rows.iter().map(|r| r.ssim).collect::<Vec<_>>())
    }

    /// Over the rows that have a Dice value.
    pub fn dice_summary(&self) -> Option<String> {
        format_mean_std(&self.rows.iter().filter_map(|r| r.dice).collect::<Vec<_>>())
    }

    /// One row per stack, then a `mean ± std` row with stack id `summary`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let wrap = |e| csv_error(path, e);
        let mut w = csv_writer(path)?;
        w.write_record(EVAL_HEADER).map_err(wrap)?;
        for r in &self.rows {
            let dice = r.dice.map(|d| format!("{d:.6}")).unwrap_or_default();
            w.write_record([
                r.stack_id.as_str(),
                &self.method,
                &self.scenario,
                &format!("{:.6}", r.ssim),
                &dice,
            ])
            .map_err(wrap)?;
        }
        w.write_record([
            "summary",
            &self.method,
            &self.scenario,
            &self.ssim_summary().unwrap_or_default(),
            &self.dice_summary().unwrap_or_default(),
        ])
        .map_err(wrap)?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// `"0.77 ± 0.03"`: mean and population standard deviation, two decimals.
pub fn format_mean_std(values: &[f64]) -> Option<String> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(format!("{mean:.2} ± {:.2}", var.sqrt()))
}

/// `<id>_fused.pgm` and `<id>_gt.pgm` files of a directory, keyed by id.
fn collect_images(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_none_or(|x| x != "pgm") {
            continue;
        }
        let stem = path.file_stem().unwrap_or_default().to_string_lossy();
        let Some(id) = SUFFIXES.iter().find_map(|s| stem.strip_suffix(s)) else {
            continue;
        };
        if let Some(prev) = out.insert(id.to_string(), path.clone()) {
            return Err(Error::InvalidArgument(format!(
                "stack id {id:?} appears twice: {} and {}",
                prev.display(),
                path.display()
            )));
        }
    }
    Ok(out)
}

fn load(path: &Path, pitch: f64) -> Result<Image> {
    to_unit(&load_pgm(path)?, pitch)
}

fn score(reference: &Image, test: &Image) -> Result<EvalRow> {
    let test = if test.dims() == reference.dims() {
        test.clone()
    } else {
        // low-resolution outputs are compared at the reference size
        let (h, w) = reference.dims();
        let one = ZStack::new(vec![test.clone()], 1.0)?;
        pre_upsample(&one, h, w)?
            .into_planes()
            .remove(0)
            .with_pitch(reference.pixel_pitch())?
    };
    let s = ssim(&test, reference, &SsimConfig::default())?;
    let d = match (
        segment_parasite_regions(&test),
        segment_parasite_regions(reference),
    ) {
        (Ok(a), Ok(b)) => Some(dice(&a, &b)?),
        (Err(Error::DegenerateHistogram), _) | (_, Err(Error::DegenerateHistogram)) => None,
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    Ok(EvalRow {
        stack_id: String::new(),
        ssim: s,
        dice: d,
    })
}

/// Scores every test image against the reference image of the same stack id.
/// Images are `<id>_fused.pgm` or `<id>_gt.pgm`; both directories must hold
/// the same set of ids.
pub fn run_eval(job: &EvalJob) -> Result<EvalReport> {
    if !(job.pixel_pitch.is_finite() && job.pixel_pitch > 0.0) {
        return Err(Error::InvalidArgument(
            "pixel pitch must be positive".into(),
        ));
    }
    let refs = collect_images(&job.reference_dir)?;
    let tests = collect_images(&job.test_dir)?;
    let unmatched: Vec<&String> = refs
        .keys()
        .filter(|k| !tests.contains_key(*k))
        .chain(tests.keys().filter(|k| !refs.contains_key(*k)))
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "unmatched stack ids: {unmatched:?}"
        )));
    }
    if refs.is_empty() {
        return Err(Error::InvalidArgument("no images to evaluate".into()));
    }
    let rows = refs
        .iter()
        .map(|(id, rpath)| {
            let reference = load(rpath, job.pixel_pitch)?;
            let test = load(&tests[id], job.pixel_pitch)?;
            Ok(EvalRow {
                stack_id: id.clone(),
                ..score(&reference, &test)?
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        method: job.method.clone(),
        scenario: job.scenario.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_format() {
        assert_eq!(format_mean_std(&[0.8, 0.8, 0.8]).unwrap(), "0.80 ± 0.00");
        assert_eq!(format_mean_std(&[0.74, 0.80]).unwrap(), "0.77 ± 0.03");
        assert_eq!(format_mean_std(&[]), None);
    }

    #[test]
    fn flat_images_have_no_dice() {
        let flat = Image::constant(16, 16, 0.5, 0.065).unwrap();
        let row = score(&flat, &flat).unwrap();
        assert_eq!(row.ssim, 1.0);
        assert_eq!(row.dice, None);
    }
}
