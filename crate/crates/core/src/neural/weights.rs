//! Binary weight files.
//!
//! Little-endian layout: magic `EDOF`, `u32` version, `u8` variant,
//! `u32` base width, `u32` residual blocks, `u32` planes, then for each
//! tensor a `u8` rank, its `u32` dims and `f32` values.

use std::path::Path;

use super::network::{expected_shapes, ArchConfig, NetworkParams, Precision, Tensor, Variant};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EDOF";
const VERSION: u32 = 1;

/// Values are stored as `f32`, so double-precision parameters lose bits.
pub fn encode_weights(cfg: &ArchConfig, params: &NetworkParams) -> Result<Vec<u8>> {
    params.check_against(cfg)?;
    let mut out = Vec::with_capacity(21 + 4 * params.param_count());
    out.extend(MAGIC);
    out.extend(VERSION.to_le_bytes());
    out.push(cfg.variant.code());
    for v in [cfg.base_width, cfg.residual_blocks, cfg.planes] {
        out.extend((v as u32).to_le_bytes());
    }
    for t in &params.tensors {
        out.push(t.shape.len() as u8);
        for d in &t.shape {
            out.extend((*d as u32).to_le_bytes());
        }
        for v in &t.data {
            out.extend((*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                expected: end,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<(ArchConfig, NetworkParams)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::WeightsFormat("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::WeightsFormat(format!(
            "unsupported version {version}"
        )));
    }
    let code = r.u8()?;
    let variant = Variant::from_code(code)
        .ok_or_else(|| Error::WeightsFormat(format!("unknown variant code {code}")))?;
    let cfg = ArchConfig {
        variant,
        base_width: r.u32()? as usize,
        residual_blocks: r.u32()? as usize,
        planes: r.u32()? as usize,
    };
    cfg.validate()
        .map_err(|e| Error::WeightsFormat(format!("invalid architecture: {e}")))?;

    let shapes = expected_shapes(&cfg);
    let mut tensors = Vec::with_capacity(shapes.len());
    for (i, want) in shapes.into_iter().enumerate() {
        let rank = r.u8()? as usize;
        let shape = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if shape != want {
            return Err(Error::WeightsFormat(format!(
                "tensor {i} has shape {shape:?}, expected {want:?}"
            )));
        }
        let n: usize = shape.iter().product();
        let data = r
            .take(4 * n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        tensors.push(Tensor { shape, data });
    }
    if r.pos != bytes.len() {
        return Err(Error::WeightsFormat(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok((
        cfg,
        NetworkParams {
            precision: Precision::Single,
            tensors,
        },
    ))
}

pub fn save_weights(path: &Path, cfg: &ArchConfig, params: &NetworkParams) -> Result<()> {
    let bytes = encode_weights(cfg, params)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: &Path) -> Result<(ArchConfig, NetworkParams)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::init_params;

    #[test]
    fn single_precision_round_trip_is_exact() {
        for cfg in [ArchConfig::max(3, 2), ArchConfig::volumetric(2, 1, 4)] {
            let p = init_params(&cfg, 8).unwrap().to_single();
            let bytes = encode_weights(&cfg, &p).unwrap();
            assert_eq!(
                bytes.len(),
                21 + p
                    .tensors
                    .iter()
                    .map(|t| 1 + 4 * t.shape.len())
                    .sum::<usize>()
                    + 4 * p.param_count()
            );
            let (c2, p2) = decode_weights(&bytes).unwrap();
            assert_eq!(c2, cfg);
            assert_eq!(p2, p);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let cfg = ArchConfig::max(2, 1);
        let p = init_params(&cfg, 1).unwrap();
        save_weights(&path, &cfg, &p).unwrap();
        let (_, back) = load_weights(&path).unwrap();
        assert_eq!(back, p.to_single());
        assert!(matches!(
            load_weights(&dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let cfg = ArchConfig::max(2, 1);
        let bytes = encode_weights(&cfg, &init_params(&cfg, 1).unwrap()).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_weights(&bad), Err(Error::WeightsFormat(_))));

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode_weights(&bad), Err(Error::WeightsFormat(_))));

        let mut bad = bytes.clone();
        bad[8] = 7;
        assert!(matches!(decode_weights(&bad), Err(Error::WeightsFormat(_))));

        // tensor 0 first dim
        let mut bad = bytes.clone();
        bad[22] = 5;
        assert!(matches!(decode_weights(&bad), Err(Error::WeightsFormat(_))));

        assert!(matches!(
            decode_weights(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(
            decode_weights(&bytes[..2]),
            Err(Error::Truncated { .. })
        ));

        let mut long = bytes;
        long.push(0);
        assert!(matches!(
            decode_weights(&long),
            Err(Error::WeightsFormat(_))
        ));
    }
}
