use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Symlet-8 analysis lowpass (16 taps, 8 vanishing moments).
const SYM8_LOWPASS: [f64; 16] = [
    -0.003_382_415_951_006_125_6,
    -0.000_542_132_331_791_148_1,
    0.031_695_087_811_492_98,
    0.007_607_487_324_917_605,
    -0.143_294_238_350_809_7,
    -0.061_273_359_067_658_524,
    0.481_359_651_258_372_2,
    0.777_185_751_700_523_5,
    0.364_441_894_835_331_4,
    -0.051_945_838_107_709_04,
    -0.027_219_029_917_056_003,
    0.049_137_179_673_607_506,
    0.003_808_752_013_890_615,
    -0.014_952_258_337_048_23,
    -0.000_302_920_514_721_366_8,
    0.001_889_950_332_759_460_9,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wavelet {
    Sym8,
    Haar,
}

impl Wavelet {
    pub fn bank(self) -> FilterBank {
        match self {
            Wavelet::Sym8 => FilterBank::sym8(),
            Wavelet::Haar => FilterBank::haar(),
        }
    }
}

impl FromStr for Wavelet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sym8" => Ok(Wavelet::Sym8),
            "haar" => Ok(Wavelet::Haar),
            other => Err(Error::InvalidArgument(format!("unknown wavelet {other:?}"))),
        }
    }
}

impl fmt::Display for Wavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Wavelet::Sym8 => "sym8",
            Wavelet::Haar => "haar",
        })
    }
}

/// Orthonormal two-channel filter bank defined by its analysis lowpass.
///
/// The highpass is the quadrature mirror `g[k] = (-1)^k h[L-1-k]`; synthesis
/// uses the same taps (transpose of analysis).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    name: String,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
}

impl FilterBank {
    /// Builds a bank from an even-length lowpass, checking the orthonormality
    /// conditions to within 1e-10.
    pub fn new(name: impl Into<String>, lowpass: Vec<f64>) -> Result<Self> {
        let n = lowpass.len();
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "filter length must be even and >= 2, got {n}"
            )));
        }
        let sum: f64 = lowpass.iter().sum();
        if (sum - std::f64::consts::SQRT_2).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "lowpass sums to {sum}, expected sqrt(2)"
            )));
        }
        for m in 0..n / 2 {
            let dot: f64 = (0..n - 2 * m)
                .map(|k| lowpass[k] * lowpass[k + 2 * m])
                .sum();
            let want = if m == 0 { 1.0 } else { 0.0 };
            if (dot - want).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "lowpass fails the shift-{m} orthonormality condition ({dot})"
                )));
            }
        }
        let highpass = (0..n)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * lowpass[n - 1 - k]
            })
            .collect();
        Ok(FilterBank {
            name: name.into(),
            lowpass,
            highpass,
        })
    }

    pub fn sym8() -> Self {
        Self::new("sym8", SYM8_LOWPASS.to_vec()).expect("sym8 table is orthonormal")
    }

    pub fn haar() -> Self {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        Self::new("haar", vec![c, c]).expect("haar is orthonormal")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    pub fn taps(&self) -> usize {
        self.lowpass.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym8_satisfies_bank_invariants() {
        let b = FilterBank::sym8();
        assert_eq!(b.taps(), 16);
        let h = b.lowpass();
        assert!((h.iter().sum::<f64>() - 2f64.sqrt()).abs() < 1e-10);
        assert!((h.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-10);
        for m in 1..8 {
            let dot: f64 = (0..16 - 2 * m).map(|k| h[k] * h[k + 2 * m]).sum();
            assert!(dot.abs() < 1e-10, "shift {m}: {dot}");
        }
    }

    #[test]
    fn sym8_highpass_has_vanishing_moments() {
        let g = FilterBank::sym8().highpass().to_vec();
        // moments 0..3 vanish to well below the normalization tolerance
        for p in 0..4 {
            let m: f64 = g
                .iter()
                .enumerate()
                .map(|(k, v)| v * (k as f64).powi(p))
                .sum();
            assert!(m.abs() < 1e-8, "moment {p} = {m}");
        }
    }

    #[test]
    fn rejects_non_orthonormal_filters() {
        assert!(FilterBank::new("bad", vec![1.0, 0.5]).is_err());
        assert!(FilterBank::new("odd", vec![2f64.sqrt()]).is_err());
        // sums to sqrt(2) but shift-1 product is nonzero
        let s = 2f64.sqrt() / 4.0;
        assert!(FilterBank::new("box4", vec![s; 4]).is_err());
    }

    #[test]
    fn parses_names() {
        assert_eq!("sym8".parse::<Wavelet>().unwrap(), Wavelet::Sym8);
        assert_eq!("haar".parse::<Wavelet>().unwrap(), Wavelet::Haar);
        assert!("db4".parse::<Wavelet>().is_err());
    }
}
