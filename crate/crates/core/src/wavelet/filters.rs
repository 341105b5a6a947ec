use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Orthonormal wavelet families with embedded filter coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaveletName {
    Haar,
    Db4,
    Sym4,
}

impl WaveletName {
    pub fn as_str(self) -> &'static str {
        match self {
            WaveletName::Haar => "haar",
            WaveletName::Db4 => "db4",
            WaveletName::Sym4 => "sym4",
        }
    }

    fn lowpass(self) -> &'static [f64] {
        match self {
            WaveletName::Haar => &HAAR_LO,
            WaveletName::Db4 => &DB4_LO,
            WaveletName::Sym4 => &SYM4_LO,
        }
    }
}

impl fmt::Display for WaveletName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WaveletName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(WaveletName::Haar),
            "db4" => Ok(WaveletName::Db4),
            "sym4" => Ok(WaveletName::Sym4),
            other => Err(Error::InvalidConfig(format!("unknown wavelet {other:?}"))),
        }
    }
}

const HAAR_LO: [f64; 2] = [
    std::f64::consts::FRAC_1_SQRT_2,
    std::f64::consts::FRAC_1_SQRT_2,
];

const DB4_LO: [f64; 8] = [
    -0.010597401785069032,
    0.0328830116668852,
    0.030841381835560764,
    -0.18703481171909309,
    -0.027983769416859854,
    0.6308807679298589,
    0.7148465705529157,
    0.2303778133088965,
];

const SYM4_LO: [f64; 8] = [
    -0.07576571478927333,
    -0.02963552764599851,
    0.49761866763201545,
    0.8037387518059161,
    0.29785779560527736,
    -0.09921954357684722,
    -0.012603967262037833,
    0.0322231006040427,
];

/// Boundary handling for the analysis cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Extension {
    /// Half-sample symmetric; level output length `floor((n + F - 1) / 2)`.
    Symmetric,
    /// Periodization; level output length `ceil(n / 2)`, orthogonal for even `n`.
    Periodic,
}

impl FromStr for Extension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "symmetric" | "sym" => Ok(Extension::Symmetric),
            "periodic" | "per" | "periodization" => Ok(Extension::Periodic),
            other => Err(Error::InvalidConfig(format!("unknown extension {other:?}"))),
        }
    }
}

/// A two-channel orthonormal filter bank.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletSpec {
    pub name: WaveletName,
    pub dec_lo: Vec<f64>,
    pub dec_hi: Vec<f64>,
    pub rec_lo: Vec<f64>,
    pub rec_hi: Vec<f64>,
    pub extension: Extension,
}

const PR_TOLERANCE: f64 = 1e-10;

impl WaveletSpec {
    /// Builds the filter bank and checks the perfect-reconstruction
    /// identities: unit norm, orthogonality to even shifts, `Σ h = √2`.
    pub fn new(name: WaveletName, extension: Extension) -> Result<Self> {
        let lo = name.lowpass().to_vec();
        let f = lo.len();
        // quadrature mirror: g[k] = (-1)^(k+1) h[F-1-k]
        let hi: Vec<f64> = (0..f)
            .map(|k| {
                let s = if k % 2 == 0 { -1.0 } else { 1.0 };
                s * lo[f - 1 - k]
            })
            .collect();
        let spec = WaveletSpec {
            name,
            rec_lo: lo.iter().rev().copied().collect(),
            rec_hi: hi.iter().rev().copied().collect(),
            dec_lo: lo,
            dec_hi: hi,
            extension,
        };
        spec.check_perfect_reconstruction()?;
        Ok(spec)
    }

    pub fn sym4() -> Self {
        Self::new(WaveletName::Sym4, Extension::Symmetric).expect("embedded sym4 filters")
    }

    pub fn filter_len(&self) -> usize {
        self.dec_lo.len()
    }

    fn check_perfect_reconstruction(&self) -> Result<()> {
        let f = self.filter_len();
        let shifted = |a: &[f64], b: &[f64], m: usize| -> f64 {
            (0..f.saturating_sub(m)).map(|k| a[k] * b[k + m]).sum()
        };
        let sum: f64 = self.dec_lo.iter().sum();
        let mut worst = (sum - std::f64::consts::SQRT_2).abs();
        for m in (0..f).step_by(2) {
            let expect = if m == 0 { 1.0 } else { 0.0 };
            worst = worst.max((shifted(&self.dec_lo, &self.dec_lo, m) - expect).abs());
            worst = worst.max((shifted(&self.dec_hi, &self.dec_hi, m) - expect).abs());
            worst = worst.max(shifted(&self.dec_lo, &self.dec_hi, m).abs());
            worst = worst.max(shifted(&self.dec_hi, &self.dec_lo, m).abs());
        }
        if worst > PR_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "{} filters violate perfect reconstruction by {worst:e}",
                self.name
            )));
        }
        Ok(())
    }
}
