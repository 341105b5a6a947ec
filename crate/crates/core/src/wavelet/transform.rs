//! Multilevel dyadic DWT and its exact inverse.

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

use super::filters::{Extension, WaveletName, WaveletSpec};

/// Approximation and detail coefficients of a multilevel decomposition.
///
/// `level_lengths[k]` is the length of the sequence entering level `k`
/// (`level_lengths[0]` is the source length); `details[k]` and the
/// approximation produced at that level both have length
/// `output_len(level_lengths[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPyramid {
    pub details: Vec<Vec<f64>>,
    pub approximation: Vec<f64>,
    pub level_lengths: Vec<usize>,
    pub source_length: usize,
    pub wavelet: WaveletName,
    pub extension: Extension,
}

impl CoefficientPyramid {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Sum of squares of every coefficient.
    pub fn energy(&self) -> f64 {
        self.details
            .iter()
            .flatten()
            .chain(&self.approximation)
            .map(|c| c * c)
            .sum()
    }

    /// Same bookkeeping, all coefficients zero.
    pub fn zeros_like(&self) -> Self {
        CoefficientPyramid {
            details: self.details.iter().map(|d| vec![0.0; d.len()]).collect(),
            approximation: vec![0.0; self.approximation.len()],
            ..self.clone()
        }
    }

    fn validate(&self, w: &WaveletSpec) -> Result<()> {
        let mismatch = |m: String| Err(Error::BookkeepingMismatch(m));
        if w.name != self.wavelet || w.extension != self.extension {
            return mismatch(format!(
                "pyramid built with {}/{:?}, inverted with {}/{:?}",
                self.wavelet, self.extension, w.name, w.extension
            ));
        }
        let levels = self.levels();
        if levels == 0 || self.level_lengths.len() != levels {
            return mismatch(format!(
                "{} detail levels but {} level lengths",
                levels,
                self.level_lengths.len()
            ));
        }
        if self.level_lengths[0] != self.source_length {
            return mismatch("first level length differs from source length".into());
        }
        let f = w.filter_len();
        for k in 0..levels {
            let out = output_len(self.level_lengths[k], f, self.extension);
            if self.details[k].len() != out {
                return mismatch(format!(
                    "level {k}: {} detail coefficients, expected {out}",
                    self.details[k].len()
                ));
            }
            let next = self.level_lengths.get(k + 1).copied();
            let have = next.unwrap_or(self.approximation.len());
            if have != out {
                return mismatch(format!(
                    "level {k}: approximation length {have}, expected {out}"
                ));
            }
        }
        if let Some(i) = self
            .details
            .iter()
            .flatten()
            .chain(&self.approximation)
            .position(|c| !c.is_finite())
        {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(())
    }
}

/// Coefficients produced by one analysis step on `n` samples.
pub fn output_len(n: usize, filter_len: usize, ext: Extension) -> usize {
    match ext {
        Extension::Symmetric => (n + filter_len - 1) / 2,
        Extension::Periodic => n.div_ceil(2),
    }
}

/// Deepest useful decomposition: `floor(log2(n / (F - 1)))`, the level at
/// which the coarsest approximation would still span a filter length.
pub fn max_levels(n: usize, filter_len: usize) -> usize {
    if n < filter_len {
        return 0;
    }
    let ratio = n as f64 / (filter_len.max(2) - 1) as f64;
    ratio.log2().floor().max(0.0) as usize
}

/// `min(5, floor(log2(n / F)))`, at least 1, capped at [`max_levels`].
pub fn default_levels(n: usize, w: &WaveletSpec) -> usize {
    let f = w.filter_len();
    let ratio = n as f64 / f as f64;
    let by_log = if ratio >= 2.0 {
        ratio.log2().floor() as usize
    } else {
        1
    };
    by_log.clamp(1, 5).min(max_levels(n, f).max(1))
}

fn reflect(idx: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut i = idx.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

fn analyze_symmetric(x: &[f64], lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let f = lo.len();
    let m = output_len(n, f, Extension::Symmetric);
    let mut a = vec![0.0; m];
    let mut d = vec![0.0; m];
    for o in 0..m {
        let centre = 2 * o as isize + 1;
        let (mut sa, mut sd) = (0.0, 0.0);
        for j in 0..f {
            let idx = centre - j as isize;
            let v = if (0..n as isize).contains(&idx) {
                x[idx as usize]
            } else {
                x[reflect(idx, n)]
            };
            sa += lo[j] * v;
            sd += hi[j] * v;
        }
        a[o] = sa;
        d[o] = sd;
    }
    (a, d)
}

/// Inverse of [`analyze_symmetric`] on the `n` interior samples.
fn synthesize_symmetric(a: &[f64], d: &[f64], w: &WaveletSpec, n: usize) -> Vec<f64> {
    let f = w.filter_len() as isize;
    let m = a.len() as isize;
    let mut x = vec![0.0; n];
    for (i, out) in x.iter_mut().enumerate() {
        let i = i as isize;
        // contributing outputs o satisfy 0 <= 2o + 1 - i < F
        let o_lo = (i - 1 + 1).div_euclid(2).max(0);
        let o_hi = ((i + f - 2).div_euclid(2)).min(m - 1);
        let mut s = 0.0;
        for o in o_lo..=o_hi {
            let j = 2 * o + 1 - i;
            if !(0..f).contains(&j) {
                continue;
            }
            let r = (f - 1 - j) as usize;
            s += a[o as usize] * w.rec_lo[r] + d[o as usize] * w.rec_hi[r];
        }
        *out = s;
    }
    x
}

fn analyze_periodic(x: &[f64], lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let f = lo.len();
    let mut padded = x.to_vec();
    if padded.len() % 2 == 1 {
        padded.push(*x.last().expect("non-empty"));
    }
    let n = padded.len() as isize;
    let m = padded.len() / 2;
    let shift = (f / 2) as isize;
    let mut a = vec![0.0; m];
    let mut d = vec![0.0; m];
    for o in 0..m {
        let (mut sa, mut sd) = (0.0, 0.0);
        for j in 0..f {
            let v = padded[(2 * o as isize + shift - j as isize).rem_euclid(n) as usize];
            sa += lo[j] * v;
            sd += hi[j] * v;
        }
        a[o] = sa;
        d[o] = sd;
    }
    (a, d)
}

fn synthesize_periodic(a: &[f64], d: &[f64], w: &WaveletSpec, n: usize) -> Vec<f64> {
    let f = w.filter_len();
    let padded_len = 2 * a.len();
    let np = padded_len as isize;
    let shift = (f / 2) as isize;
    let mut x = vec![0.0; padded_len];
    for o in 0..a.len() {
        for j in 0..f {
            let idx = (2 * o as isize + shift - j as isize).rem_euclid(np) as usize;
            x[idx] += a[o] * w.dec_lo[j] + d[o] * w.dec_hi[j];
        }
    }
    x.truncate(n);
    x
}

/// One analysis step.
pub fn dwt_single(x: &[f64], w: &WaveletSpec) -> (Vec<f64>, Vec<f64>) {
    match w.extension {
        Extension::Symmetric => analyze_symmetric(x, &w.dec_lo, &w.dec_hi),
        Extension::Periodic => analyze_periodic(x, &w.dec_lo, &w.dec_hi),
    }
}

/// One synthesis step producing `n` samples.
pub fn idwt_single(a: &[f64], d: &[f64], w: &WaveletSpec, n: usize) -> Vec<f64> {
    match w.extension {
        Extension::Symmetric => synthesize_symmetric(a, d, w, n),
        Extension::Periodic => synthesize_periodic(a, d, w, n),
    }
}

/// Cascade of convolve-and-downsample steps, details stored finest first.
pub fn dwt(x: &[f64], w: &WaveletSpec, levels: usize) -> Result<CoefficientPyramid> {
    let f = w.filter_len();
    if x.len() < f {
        return Err(Error::LengthTooShort {
            len: x.len(),
            filter_len: f,
        });
    }
    let max = max_levels(x.len(), f);
    if levels == 0 || levels > max {
        return Err(Error::TooManyLevels {
            requested: levels,
            max,
            len: x.len(),
        });
    }
    let mut details = Vec::with_capacity(levels);
    let mut level_lengths = Vec::with_capacity(levels);
    let mut approx = x.to_vec();
    for _ in 0..levels {
        level_lengths.push(approx.len());
        let (a, d) = dwt_single(&approx, w);
        details.push(d);
        approx = a;
    }
    Ok(CoefficientPyramid {
        details,
        approximation: approx,
        level_lengths,
        source_length: x.len(),
        wavelet: w.name,
        extension: w.extension,
    })
}

/// Exact inverse of [`dwt`].
pub fn idwt(p: &CoefficientPyramid, w: &WaveletSpec) -> Result<Vec<f64>> {
    p.validate(w)?;
    let mut approx = p.approximation.clone();
    for k in (0..p.levels()).rev() {
        approx = idwt_single(&approx, &p.details[k], w, p.level_lengths[k]);
    }
    Ok(approx)
}

/// [`dwt`] on a spectrum.
pub fn dwt_spectrum(x: &Spectrum, w: &WaveletSpec, levels: usize) -> Result<CoefficientPyramid> {
    dwt(x, w, levels)
}

/// [`idwt`] returning a validated spectrum.
pub fn idwt_spectrum(p: &CoefficientPyramid, w: &WaveletSpec) -> Result<Spectrum> {
    Spectrum::new(idwt(p, w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian, rng_from_seed};

    fn spec(name: WaveletName, ext: Extension) -> WaveletSpec {
        WaveletSpec::new(name, ext).unwrap()
    }

    // reference values from an independent implementation (PyWavelets 1.x)
    const X: [f64; 11] = [1.0, 2.0, 0.0, -1.0, 3.0, 5.0, 2.0, 2.0, 1.0, 0.0, 4.0];

    #[test]
    fn sym4_symmetric_matches_reference() {
        let (a, d) = dwt_single(&X, &spec(WaveletName::Sym4, Extension::Symmetric));
        let a_ref = [
            2.1464523588302495,
            1.9419374097067605,
            -0.4170155429366224,
            4.397664479181971,
            3.777313625787748,
            0.813059751623628,
            5.069682686069615,
            1.1135922914792353,
            2.6035743852513473,
        ];
        let d_ref = [
            -0.1696556923231078,
            0.7957842816104026,
            -1.5299016862955392,
            2.087261061276547,
            -1.7739225726773216,
            -0.5728101503446738,
            1.9614445494699215,
            -1.2906806436401903,
            -0.35379396013708353,
        ];
        assert_eq!(a.len(), 9);
        for (x, y) in a.iter().zip(&a_ref).chain(d.iter().zip(&d_ref)) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn sym4_periodic_matches_reference() {
        let (a, d) = dwt_single(&X, &spec(WaveletName::Sym4, Extension::Periodic));
        let a_ref = [
            1.260379639139748,
            0.30725753128202943,
            5.936133455813105,
            1.8316161830229165,
            2.031493122102515,
            4.89657603593084,
        ];
        let d_ref = [
            1.8169282859666043,
            0.5941448013599259,
            -1.4300693225763477,
            1.6113308646467452,
            0.18618026945894006,
            -2.071408117682332,
        ];
        for (x, y) in a.iter().zip(&a_ref).chain(d.iter().zip(&d_ref)) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn haar_on_ones() {
        let w = spec(WaveletName::Haar, Extension::Symmetric);
        let p = dwt(&[1.0; 4], &w, 1).unwrap();
        let r2 = std::f64::consts::SQRT_2;
        for c in &p.details[0] {
            assert!(c.abs() < 1e-15);
        }
        assert_eq!(p.approximation.len(), 2);
        for c in &p.approximation {
            assert!((c - r2).abs() < 1e-15);
        }
    }

    #[test]
    fn constants_have_no_detail_periodic() {
        let w = spec(WaveletName::Sym4, Extension::Periodic);
        let x = vec![3.25; 64];
        let p = dwt(&x, &w, 3).unwrap();
        for c in p.details.iter().flatten() {
            assert!(c.abs() < 1e-10);
        }
    }

    #[test]
    fn round_trip_2051_five_levels() {
        let mut rng = rng_from_seed(5);
        let x: Vec<f64> = (0..2051).map(|_| gaussian(&mut rng)).collect();
        for ext in [Extension::Symmetric, Extension::Periodic] {
            let w = spec(WaveletName::Sym4, ext);
            let p = dwt(&x, &w, 5).unwrap();
            assert_eq!(p.level_lengths[0], 2051);
            let y = idwt(&p, &w).unwrap();
            let err = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "{ext:?}: {err}");
        }
    }

    #[test]
    fn level_lengths() {
        let w = spec(WaveletName::Sym4, Extension::Periodic);
        let p = dwt(&vec![0.0; 2051], &w, 5).unwrap();
        assert_eq!(p.level_lengths, vec![2051, 1026, 513, 257, 129]);
        assert_eq!(p.approximation.len(), 65);
        let w = spec(WaveletName::Sym4, Extension::Symmetric);
        let p = dwt(&vec![0.0; 2051], &w, 2).unwrap();
        assert_eq!(p.level_lengths, vec![2051, 1029]);
        assert_eq!(p.details[1].len(), 518);
    }

    #[test]
    fn zero_pyramid_gives_zero_signal() {
        let w = WaveletSpec::sym4();
        let p = dwt(&vec![1.0; 100], &w, 3).unwrap().zeros_like();
        assert!(idwt(&p, &w).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_coefficient_synthesizes_an_atom() {
        let w = spec(WaveletName::Sym4, Extension::Periodic);
        let mut p = dwt(&vec![0.0; 64], &w, 1).unwrap();
        p.details[0][10] = 1.0;
        let x = idwt(&p, &w).unwrap();
        // atom: x[(2o + F/2 - j) mod n] = g[j]
        for j in 0..8 {
            assert!((x[(20 + 4 - j) % 64] - w.dec_hi[j]).abs() < 1e-15);
        }
        let energy: f64 = x.iter().map(|v| v * v).sum();
        assert!((energy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let w = WaveletSpec::sym4();
        assert!(matches!(
            dwt(&[0.0; 7], &w, 1),
            Err(Error::LengthTooShort { .. })
        ));
        assert!(matches!(
            dwt(&[0.0; 16], &w, 3),
            Err(Error::TooManyLevels { .. })
        ));
        let mut p = dwt(&[0.0; 64], &w, 2).unwrap();
        p.details[1].pop();
        assert!(matches!(idwt(&p, &w), Err(Error::BookkeepingMismatch(_))));
        let p = dwt(&[0.0; 64], &w, 2).unwrap();
        let other = WaveletSpec::new(WaveletName::Sym4, Extension::Periodic).unwrap();
        assert!(matches!(
            idwt(&p, &other),
            Err(Error::BookkeepingMismatch(_))
        ));
    }

    #[test]
    fn default_depth() {
        let w = WaveletSpec::sym4();
        assert_eq!(default_levels(2051, &w), 5);
        assert_eq!(default_levels(16, &w), 1);
        assert_eq!(default_levels(64, &w), 3);
    }
}
