//! Plain-text stack manifests.
//!
//! ```text
//! # comment
//! z_step_um=0.5
//! pixel_pitch_um=0.065
//! plane=stack01_z00.pgm
//! plane=stack01_z01.pgm
//! ```
//!
//! Plane paths are resolved relative to the manifest's directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{load_pgm, to_unit, ZStack};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StackManifest {
    pub z_step_um: f64,
    pub pixel_pitch_um: f64,
    /// Plane files in ascending z.
    pub plane_paths: Vec<PathBuf>,
}

impl StackManifest {
    pub fn new(z_step_um: f64, pixel_pitch_um: f64, plane_paths: Vec<PathBuf>) -> Result<Self> {
        let m = StackManifest {
            z_step_um,
            pixel_pitch_um,
            plane_paths,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if self.plane_paths.is_empty() {
            return Err(Error::Manifest("no plane entries".into()));
        }
        for (key, v) in [
            ("z_step_um", self.z_step_um),
            ("pixel_pitch_um", self.pixel_pitch_um),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Manifest(format!("{key} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Parses manifest text; relative plane paths are joined onto `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut z_step = None;
        let mut pitch = None;
        let mut planes = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Manifest(format!("line {}: expected key=value", lineno + 1))
            })?;
            let value = value.trim();
            let real = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| Error::Manifest(format!("line {}: bad number {v:?}", lineno + 1)))
            };
            match key.trim() {
                "z_step_um" => z_step = Some(real(value)?),
                "pixel_pitch_um" => pitch = Some(real(value)?),
                "plane" => planes.push(base_dir.join(value)),
                other => {
                    return Err(Error::Manifest(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(
            z_step.ok_or_else(|| Error::Manifest("missing z_step_um".into()))?,
            pitch.ok_or_else(|| Error::Manifest("missing pixel_pitch_um".into()))?,
            planes,
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    /// Serializes with plane paths written relative to `base_dir` where possible.
    pub fn to_text(&self, base_dir: &Path) -> String {
        let mut s = String::new();
        writeln!(s, "z_step_um={}", self.z_step_um).unwrap();
        writeln!(s, "pixel_pitch_um={}", self.pixel_pitch_um).unwrap();
        for p in &self.plane_paths {
            let rel = p.strip_prefix(base_dir).unwrap_or(p);
            writeln!(s, "plane={}", rel.display()).unwrap();
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_text(path.parent().unwrap_or(Path::new("")));
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Loads every plane listed in the manifest, in manifest order.
pub fn load_stack(manifest: &StackManifest) -> Result<ZStack> {
    manifest.validate()?;
    let planes = manifest
        .plane_paths
        .iter()
        .map(|p| load_pgm(p).and_then(|raw| to_unit(&raw, manifest.pixel_pitch_um)))
        .collect::<Result<Vec<_>>>()?;
    ZStack::new(planes, manifest.z_step_um)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{save_pgm, BitDepth, Image};

    fn write_planes(dir: &Path, sizes: &[usize]) -> Vec<PathBuf> {
        sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let p = dir.join(format!("p{i:02}.pgm"));
                let img = Image::constant(n, n, i as f64 / 20.0, 0.065).unwrap();
                save_pgm(&img, BitDepth::Eight, &p).unwrap();
                p
            })
            .collect()
    }

    #[test]
    fn parses_keys_and_comments() {
        let m = StackManifest::parse(
            "# stack\nz_step_um=0.5\n\npixel_pitch_um = 0.065\nplane=a.pgm\nplane=b.pgm\n",
            Path::new("/data"),
        )
        .unwrap();
        assert_eq!(m.z_step_um, 0.5);
        assert_eq!(m.pixel_pitch_um, 0.065);
        assert_eq!(
            m.plane_paths,
            vec![PathBuf::from("/data/a.pgm"), PathBuf::from("/data/b.pgm")]
        );
    }

    #[test]
    fn rejects_incomplete_manifests() {
        let base = Path::new(".");
        assert!(StackManifest::parse("z_step_um=0.5\npixel_pitch_um=0.1\n", base).is_err());
        assert!(StackManifest::parse("pixel_pitch_um=0.1\nplane=a\n", base).is_err());
        assert!(StackManifest::parse("z_step_um=-1\npixel_pitch_um=0.1\nplane=a\n", base).is_err());
        assert!(StackManifest::parse("colour=rgb\n", base).is_err());
    }

    #[test]
    fn text_round_trip() {
        let base = Path::new("/data");
        let m = StackManifest::new(0.5, 0.065, vec![base.join("a.pgm")]).unwrap();
        assert_eq!(StackManifest::parse(&m.to_text(base), base).unwrap(), m);
    }

    #[test]
    fn loads_fourteen_planes_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_planes(dir.path(), &[8; 14]);
        let m = StackManifest::new(0.5, 0.065, paths).unwrap();
        let mpath = dir.path().join("s.manifest");
        m.write(&mpath).unwrap();
        let stack = load_stack(&StackManifest::from_file(&mpath).unwrap()).unwrap();
        assert_eq!(stack.len(), 14);
        assert_eq!(stack.z_step(), 0.5);
        assert_eq!(stack.pixel_pitch(), 0.065);
        // plane i was written as the constant i/20 quantized to 8 bits
        for (i, p) in stack.planes().iter().enumerate() {
            let q = ((i as f64 / 20.0) * 255.0 + 0.5).floor() / 255.0;
            assert_eq!(p.get(0, 0), q);
        }
    }

    #[test]
    fn single_plane_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = StackManifest::new(0.5, 0.065, write_planes(dir.path(), &[4])).unwrap();
        assert_eq!(load_stack(&m).unwrap().len(), 1);
    }

    #[test]
    fn mixed_sizes_fail() {
        let dir = tempfile::tempdir().unwrap();
        let m = StackManifest::new(0.5, 0.065, write_planes(dir.path(), &[16, 8])).unwrap();
        assert!(matches!(load_stack(&m), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn missing_file_fails() {
        let m = StackManifest::new(0.5, 0.065, vec![PathBuf::from("/nonexistent/x.pgm")]).unwrap();
        assert!(matches!(load_stack(&m), Err(Error::Io { .. })));
    }
}
