//! Threshold selection and coefficient shrinkage rules.

use std::fmt;
use std::str::FromStr;

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub use super::ebayes::shrink_ebayes;

/// MAD-to-sigma factor for Gaussian noise.
pub const MAD_SCALE: f64 = 0.6745;

/// BlockJS shrinkage constant.
pub const BLOCK_JS_LAMBDA: f64 = 4.50524;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Universal,
    Sure,
    Minimax,
    Fdr,
    BlockJs,
    EmpiricalBayes,
}

impl RuleKind {
    pub const ALL: [RuleKind; 6] = [
        RuleKind::Universal,
        RuleKind::Sure,
        RuleKind::Minimax,
        RuleKind::Fdr,
        RuleKind::BlockJs,
        RuleKind::EmpiricalBayes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::Universal => "universal",
            RuleKind::Sure => "sure",
            RuleKind::Minimax => "minimax",
            RuleKind::Fdr => "fdr",
            RuleKind::BlockJs => "blockjs",
            RuleKind::EmpiricalBayes => "ebayes",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RuleKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown shrinkage rule {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThresholdMode {
    Soft,
    Hard,
}

impl FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(ThresholdMode::Soft),
            "hard" => Ok(ThresholdMode::Hard),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

/// A shrinkage rule. `mode` applies to the threshold rules (universal, SURE,
/// minimax); FDR is always hard, and block James–Stein and empirical Bayes
/// use their own shrinkers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageRule {
    pub kind: RuleKind,
    pub mode: ThresholdMode,
    pub q: f64,
    pub ebayes_scale: f64,
}

impl ShrinkageRule {
    pub fn new(kind: RuleKind) -> Self {
        ShrinkageRule {
            kind,
            mode: ThresholdMode::Soft,
            q: 0.05,
            ebayes_scale: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "FDR q {} not in (0, 1)",
                self.q
            )));
        }
        if !(self.ebayes_scale > 0.0 && self.ebayes_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "ebayes scale {} must be positive",
                self.ebayes_scale
            )));
        }
        Ok(())
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `median(|d|) / 0.6745` over one level of detail coefficients.
pub fn mad_sigma(finest: &[f64]) -> Result<f64> {
    if finest.is_empty() {
        return Err(Error::EmptyLevel);
    }
    let mut abs: Vec<f64> = finest.iter().map(|c| c.abs()).collect();
    Ok(median(&mut abs) / MAD_SCALE)
}

/// `σ·sqrt(2 ln n)`.
pub fn threshold_universal(sigma: f64, n: usize) -> f64 {
    sigma * (2.0 * (n as f64).ln()).sqrt()
}

/// `σ·(0.3936 + 0.1829·log2 n)` for `n > 32`, zero otherwise.
pub fn threshold_minimax(sigma: f64, n: usize) -> f64 {
    if n <= 32 {
        0.0
    } else {
        sigma * (0.3936 + 0.1829 * (n as f64).log2())
    }
}

/// True when a level is too sparse for SURE to be reliable, in which case
/// the universal threshold is used instead.
pub fn sure_is_sparse(coeffs: &[f64], sigma: f64) -> bool {
    let n = coeffs.len() as f64;
    let excess = coeffs
        .iter()
        .map(|c| (c / sigma).powi(2) - 1.0)
        .sum::<f64>()
        / n;
    let critical = n.log2().powf(1.5) / n.sqrt();
    excess <= critical
}

/// Threshold minimizing Stein's unbiased risk estimate for soft
/// thresholding, in coefficient units.
///
/// Candidates are `0` and every `|cᵢ|/σ`; ties go to the smaller threshold.
pub fn threshold_sure(coeffs: &[f64], sigma: f64) -> Result<f64> {
    if coeffs.is_empty() {
        return Err(Error::EmptyLevel);
    }
    if !(sigma > 0.0) || coeffs.iter().all(|&c| c == 0.0) {
        return Ok(0.0);
    }
    let n = coeffs.len();
    if sure_is_sparse(coeffs, sigma) {
        return Ok(threshold_universal(sigma, n));
    }
    let mut x: Vec<f64> = coeffs.iter().map(|c| c.abs() / sigma).collect();
    x.sort_by(f64::total_cmp);
    let nf = n as f64;

    // candidate t = 0
    let zeros = x.iter().take_while(|&&v| v == 0.0).count();
    let mut best_t = 0.0;
    let mut best_risk = nf - 2.0 * zeros as f64;

    let mut below_sq = 0.0;
    let mut i = 0;
    while i < n {
        let t = x[i];
        // absorb all ties so the count is #{x <= t}
        let mut j = i;
        while j < n && x[j] == t {
            below_sq += x[j] * x[j];
            j += 1;
        }
        let count = j as f64;
        let risk = nf - 2.0 * count + below_sq + (nf - count) * t * t;
        if risk < best_risk {
            best_risk = risk;
            best_t = t;
        }
        i = j;
    }
    Ok(best_t * sigma)
}

pub fn shrink_soft(coeffs: &[f64], t: f64) -> Vec<f64> {
    coeffs
        .iter()
        .map(|&c| c.signum() * (c.abs() - t).max(0.0))
        .collect()
}

pub fn shrink_hard(coeffs: &[f64], t: f64) -> Vec<f64> {
    coeffs
        .iter()
        .map(|&c| if c.abs() > t { c } else { 0.0 })
        .collect()
}

pub fn apply_threshold(coeffs: &[f64], t: f64, mode: ThresholdMode) -> Vec<f64> {
    match mode {
        ThresholdMode::Soft => shrink_soft(coeffs, t),
        ThresholdMode::Hard => shrink_hard(coeffs, t),
    }
}

/// Two-sided Gaussian p-value of `|c|/σ`.
fn two_sided_p(c: f64, sigma: f64) -> f64 {
    erfc(c.abs() / (sigma * std::f64::consts::SQRT_2))
}

/// Benjamini–Hochberg rejection threshold on `|c|`: coefficients with
/// `|c| >= threshold` survive. `None` when nothing is discovered.
pub fn fdr_threshold(coeffs: &[f64], sigma: f64, q: f64) -> Option<f64> {
    let n = coeffs.len();
    let mut abs: Vec<f64> = coeffs.iter().map(|c| c.abs()).collect();
    // descending |c| is ascending p
    abs.sort_by(|a, b| b.total_cmp(a));
    let k = (1..=n)
        .rev()
        .find(|&k| two_sided_p(abs[k - 1], sigma) <= q * k as f64 / n as f64)?;
    Some(abs[k - 1])
}

/// Hard-thresholds at the Benjamini–Hochberg cut-off; with no discoveries
/// every coefficient is killed.
pub fn shrink_fdr(coeffs: &[f64], sigma: f64, q: f64) -> Vec<f64> {
    if !(sigma > 0.0) {
        return coeffs.to_vec();
    }
    match fdr_threshold(coeffs, sigma, q) {
        Some(t) => coeffs
            .iter()
            .map(|&c| if c.abs() >= t { c } else { 0.0 })
            .collect(),
        None => vec![0.0; coeffs.len()],
    }
}

/// Block James–Stein: contiguous blocks of `max(1, floor(ln n))`
/// coefficients, each scaled by `(1 − λ·L·σ²/S²)₊` where `S²` is the block
/// energy and `L` its length (the trailing partial block uses its own length).
pub fn shrink_block_js(coeffs: &[f64], sigma: f64) -> Vec<f64> {
    if !(sigma > 0.0) || coeffs.is_empty() {
        return coeffs.to_vec();
    }
    let block = ((coeffs.len() as f64).ln().floor() as usize).max(1);
    let mut out = Vec::with_capacity(coeffs.len());
    for chunk in coeffs.chunks(block) {
        let energy: f64 = chunk.iter().map(|c| c * c).sum();
        let factor = if energy > 0.0 {
            (1.0 - BLOCK_JS_LAMBDA * chunk.len() as f64 * sigma * sigma / energy).max(0.0)
        } else {
            0.0
        };
        out.extend(chunk.iter().map(|c| c * factor));
    }
    out
}

/// Applies `rule` to one detail level. `signal_len` is the length of the
/// original signal, used by the universal and minimax thresholds.
pub fn shrink_level(
    coeffs: &[f64],
    sigma: f64,
    signal_len: usize,
    rule: &ShrinkageRule,
) -> Result<Vec<f64>> {
    if coeffs.is_empty() {
        return Err(Error::EmptyLevel);
    }
    Ok(match rule.kind {
        RuleKind::Universal => {
            apply_threshold(coeffs, threshold_universal(sigma, signal_len), rule.mode)
        }
        RuleKind::Sure => apply_threshold(coeffs, threshold_sure(coeffs, sigma)?, rule.mode),
        RuleKind::Minimax => {
            apply_threshold(coeffs, threshold_minimax(sigma, signal_len), rule.mode)
        }
        RuleKind::Fdr => shrink_fdr(coeffs, sigma, rule.q),
        RuleKind::BlockJs => shrink_block_js(coeffs, sigma),
        RuleKind::EmpiricalBayes => shrink_ebayes(coeffs, sigma, rule.ebayes_scale),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mad_definition() {
        assert!((mad_sigma(&[0.6745; 9]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(mad_sigma(&[]), Err(Error::EmptyLevel)));
    }

    #[test]
    fn universal_values() {
        assert_eq!(threshold_universal(0.0, 2051), 0.0);
        assert!((threshold_universal(1.0, 2051) - 3.9054).abs() < 1e-3);
        assert_eq!(
            threshold_universal(2.0, 100),
            2.0 * threshold_universal(1.0, 100)
        );
    }

    #[test]
    fn minimax_values() {
        assert_eq!(threshold_minimax(1.0, 32), 0.0);
        assert!((threshold_minimax(1.0, 2048) - 2.4055).abs() < 1e-12);
        assert!(threshold_minimax(1.0, 4096) > threshold_minimax(1.0, 2048));
        assert!((threshold_minimax(3.0, 100) - 3.0 * threshold_minimax(1.0, 100)).abs() < 1e-12);
    }

    #[test]
    fn soft_and_hard() {
        assert_eq!(shrink_soft(&[3.0, -1.0], 2.0), vec![1.0, 0.0]);
        assert_eq!(shrink_hard(&[3.0, -1.0], 2.0), vec![3.0, 0.0]);
        let x = [0.5, -2.0, 7.0];
        assert_eq!(shrink_soft(&x, 0.0), x.to_vec());
        assert_eq!(shrink_hard(&x, 0.0), x.to_vec());
    }

    #[test]
    fn sure_zero_level() {
        assert_eq!(threshold_sure(&[0.0; 8], 1.0).unwrap(), 0.0);
        assert!(matches!(threshold_sure(&[], 1.0), Err(Error::EmptyLevel)));
    }

    #[test]
    fn sure_keeps_huge_coefficients() {
        let c: Vec<f64> = (0..64).map(|i| 50.0 + i as f64).collect();
        let t = threshold_sure(&c, 1.0).unwrap();
        assert!(t < threshold_universal(1.0, 64), "{t}");
    }

    #[test]
    fn fdr_edge_cases() {
        assert_eq!(shrink_fdr(&[0.0; 10], 1.0, 0.05), vec![0.0; 10]);
        let mut c = vec![0.0; 20];
        c[7] = 40.0;
        let out = shrink_fdr(&c, 1.0, 0.05);
        assert_eq!(out, c);
    }

    #[test]
    fn block_js_cases() {
        assert_eq!(shrink_block_js(&[0.0; 8], 1.0), vec![0.0; 8]);
        // n = 8: block length floor(ln 8) = 2, threshold energy 2λσ²
        let small = [1.0, 1.0, 0.5, -0.5, 0.1, 0.2, 0.0, 0.3];
        assert_eq!(shrink_block_js(&small, 1.0), vec![0.0; 8]);
        // first block (L = 2) carries S² = 2λLσ², so it is halved
        let l = 2.0;
        let s2 = 2.0 * BLOCK_JS_LAMBDA * l;
        let v = (s2 / 2.0).sqrt();
        let mut c = vec![0.0; 8];
        c[0] = v;
        c[1] = v;
        let out = shrink_block_js(&c, 1.0);
        assert!((out[0] - 0.5 * v).abs() < 1e-12);
        assert!((out[1] - 0.5 * v).abs() < 1e-12);
    }

    #[test]
    fn rule_names_round_trip() {
        for k in RuleKind::ALL {
            assert_eq!(k.as_str().parse::<RuleKind>().unwrap(), k);
        }
        assert!("bogus".parse::<RuleKind>().is_err());
    }
}
