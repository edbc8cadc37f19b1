//! Binary PGM ("P5") codec, 8-bit and 16-bit big-endian.

use std::fs;
use std::path::Path;

use super::{Grid, Image};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn maxval(self) -> u16 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            8 => Some(BitDepth::Eight),
            16 => Some(BitDepth::Sixteen),
            _ => None,
        }
    }
}

/// Integer samples as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub depth: BitDepth,
    pub samples: Vec<u16>,
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<RawImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("{what} out of range")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<RawImage> {
    if bytes.len() < 2 {
        return Err(Error::MalformedHeader("file too short for magic".into()));
    }
    if &bytes[..2] != b"P5" {
        return Err(Error::UnsupportedFormat(
            String::from_utf8_lossy(&bytes[..2]).into_owned(),
        ));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    if !cur
        .bytes
        .get(2)
        .is_some_and(|b| b.is_ascii_whitespace() || *b == b'#')
    {
        return Err(Error::MalformedHeader(
            "magic not followed by whitespace".into(),
        ));
    }
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    let depth = match maxval {
        255 => BitDepth::Eight,
        65535 => BitDepth::Sixteen,
        other => return Err(Error::UnsupportedMaxval(other)),
    };
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(_) => {
            return Err(Error::MalformedHeader(
                "maxval not followed by whitespace".into(),
            ))
        }
        None => {
            return Err(Error::Truncated {
                expected: 1,
                found: 0,
            })
        }
    }

    let count = width * height;
    let bytes_per_sample = match depth {
        BitDepth::Eight => 1,
        BitDepth::Sixteen => 2,
    };
    let payload = &bytes[cur.pos..];
    let expected = count * bytes_per_sample;
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    let samples = match depth {
        BitDepth::Eight => payload[..count].iter().map(|&b| b as u16).collect(),
        BitDepth::Sixteen => payload[..expected]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect(),
    };
    Ok(RawImage {
        width,
        height,
        depth,
        samples,
    })
}

pub fn encode_pgm(raw: &RawImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n{}\n", raw.width, raw.height, raw.depth.maxval());
    let mut out = Vec::with_capacity(header.len() + raw.samples.len() * 2);
    out.extend_from_slice(header.as_bytes());
    match raw.depth {
        BitDepth::Eight => out.extend(raw.samples.iter().map(|&s| s as u8)),
        BitDepth::Sixteen => {
            for &s in &raw.samples {
                out.extend_from_slice(&s.to_be_bytes());
            }
        }
    }
    out
}

/// Normalizes integer samples to `[0, 1]` by dividing by maxval.
pub fn to_unit(raw: &RawImage, pixel_pitch: f64) -> Result<Image> {
    let maxval = raw.depth.maxval() as f64;
    let pixels = raw.samples.iter().map(|&s| s as f64 / maxval).collect();
    Image::from_grid(Grid::new(raw.height, raw.width, pixels)?, pixel_pitch)
}

/// Round-half-up quantization to the bit depth's maxval.
pub fn quantize(image: &Image, depth: BitDepth) -> RawImage {
    let maxval = depth.maxval() as f64;
    let samples = image
        .pixels()
        .iter()
        .map(|&v| (v * maxval + 0.5).floor().clamp(0.0, maxval) as u16)
        .collect();
    RawImage {
        width: image.width(),
        height: image.height(),
        depth,
        samples,
    }
}

pub fn save_pgm(image: &Image, depth: BitDepth, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(&quantize(image, depth))).map_err(|e| Error::io(path, e))
}
