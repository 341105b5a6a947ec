//! Synthetic Raman-like spectra: sparse Lorentzian/Gaussian peaks over a
//! smooth fluorescence-like background, with white Gaussian noise calibrated
//! against the clean spectrum's power.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics;
use crate::rng::{derive_seed, gaussian, rng_from_seed, stream, Rng};
use crate::spectrum::{
    check_same_len, Dataset, Spectrum, SpectrumPair, Split, DEFAULT_LENGTH, MIN_LENGTH,
    NOISELESS_SNR_DB,
};

pub const MIN_SNR_DB: f64 = 0.0;
pub const MAX_SNR_DB: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakShape {
    Lorentzian,
    Gaussian,
}

/// One spectral line. `width` is the half width at half maximum for
/// Lorentzians and the standard deviation for Gaussians, both in samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakSpec {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub shape: PeakShape,
}

impl PeakSpec {
    pub fn validate(&self, length: usize) -> Result<()> {
        if !(0.0..length as f64).contains(&self.center) {
            return Err(Error::InvalidConfig(format!(
                "peak center {} outside [0, {length})",
                self.center
            )));
        }
        if !(self.width >= 0.5) {
            return Err(Error::InvalidConfig(format!(
                "peak width {} below 0.5",
                self.width
            )));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "peak amplitude {} must be positive",
                self.amplitude
            )));
        }
        Ok(())
    }

    pub fn value_at(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.width;
        match self.shape {
            PeakShape::Lorentzian => self.amplitude / (1.0 + u * u),
            PeakShape::Gaussian => self.amplitude * (-0.5 * u * u).exp(),
        }
    }
}

/// Renders a sum of peaks on `length` samples.
pub fn render_peaks(peaks: &[PeakSpec], length: usize) -> Result<Spectrum> {
    for p in peaks {
        p.validate(length)?;
    }
    let values = (0..length)
        .map(|i| peaks.iter().map(|p| p.value_at(i as f64)).sum())
        .collect();
    Spectrum::new(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub length: usize,
    pub peak_count_range: [usize; 2],
    pub amplitude_range: [f64; 2],
    pub width_range: [f64; 2],
    pub baseline_poly_degree: usize,
    pub baseline_amp_range: [f64; 2],
    pub hump_count_range: [usize; 2],
    pub snr_grid_db: Vec<f64>,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            length: DEFAULT_LENGTH,
            peak_count_range: [3, 12],
            amplitude_range: [0.5, 5.0],
            width_range: [2.0, 12.0],
            baseline_poly_degree: 2,
            baseline_amp_range: [2.0, 10.0],
            hump_count_range: [1, 3],
            snr_grid_db: vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0],
            seed: 0,
        }
    }
}

fn check_range(name: &str, r: [f64; 2], min_allowed: f64) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] >= min_allowed && r[0] <= r[1]) {
        return Err(Error::InvalidConfig(format!(
            "{name} {r:?} must satisfy {min_allowed} <= min <= max"
        )));
    }
    Ok(())
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length < MIN_LENGTH {
            return Err(Error::InvalidConfig(format!(
                "length {} below {MIN_LENGTH}",
                self.length
            )));
        }
        if self.peak_count_range[0] > self.peak_count_range[1] {
            return Err(Error::InvalidConfig("peak_count_range min > max".into()));
        }
        if self.hump_count_range[0] > self.hump_count_range[1] {
            return Err(Error::InvalidConfig("hump_count_range min > max".into()));
        }
        check_range("amplitude_range", self.amplitude_range, 0.0)?;
        check_range("width_range", self.width_range, 0.5)?;
        check_range("baseline_amp_range", self.baseline_amp_range, 0.0)?;
        if self.baseline_poly_degree > 8 {
            return Err(Error::InvalidConfig(format!(
                "baseline_poly_degree {} above 8",
                self.baseline_poly_degree
            )));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::InvalidConfig("snr_grid_db is empty".into()));
        }
        if let Some(bad) = self
            .snr_grid_db
            .iter()
            .find(|v| !(MIN_SNR_DB..=MAX_SNR_DB).contains(*v))
        {
            return Err(Error::InvalidConfig(format!(
                "SNR {bad} dB outside [{MIN_SNR_DB}, {MAX_SNR_DB}]"
            )));
        }
        Ok(())
    }

    /// Canonical key/value text (TOML). Equal configs serialize identically.
    pub fn to_canonical_string(&self) -> String {
        toml::to_string(self).expect("generator config is always representable")
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let cfg: GeneratorConfig = toml::from_str(text).map_err(|e| Error::ParseFailure {
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_canonical_string().as_bytes());
        hex::encode(&hash[..8])
    }
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list of SNRs.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |m: String| Error::InvalidConfig(format!("SNR grid {text:?}: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(bad("expected start:stop:step".into()));
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || stop < start {
            return Err(bad("need step > 0 and stop >= start".into()));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|k| start + step * k as f64).collect())
    } else {
        text.split(',').map(num).collect()
    }
}

fn uniform(rng: &mut Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

fn uniform_count(rng: &mut Rng, r: [usize; 2]) -> usize {
    rng.random_range(r[0]..=r[1])
}

/// Draws the peak list used by [`gen_clean_spectrum`].
pub fn sample_peaks(cfg: &GeneratorConfig, seed: u64) -> Result<Vec<PeakSpec>> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let count = uniform_count(&mut rng, cfg.peak_count_range);
    let peaks = (0..count)
        .map(|_| PeakSpec {
            center: rng.random_range(0.0..cfg.length as f64),
            width: uniform(&mut rng, cfg.width_range),
            amplitude: uniform(&mut rng, cfg.amplitude_range),
            shape: if rng.random_bool(0.5) {
                PeakShape::Lorentzian
            } else {
                PeakShape::Gaussian
            },
        })
        .collect();
    Ok(peaks)
}

/// A clean, non-negative spectrum; a pure function of `(cfg, seed)`.
pub fn gen_clean_spectrum(cfg: &GeneratorConfig, seed: u64) -> Result<Spectrum> {
    let peaks = sample_peaks(cfg, seed)?;
    render_peaks(&peaks, cfg.length)
}

/// A smooth non-negative background: a polynomial lifted into `[0.5A, A]`
/// plus broad Gaussian humps (standard deviation at least `length/8`).
pub fn gen_baseline(cfg: &GeneratorConfig, seed: u64) -> Result<Spectrum> {
    cfg.validate()?;
    let n = cfg.length;
    let mut rng = rng_from_seed(seed);
    let amp = uniform(&mut rng, cfg.baseline_amp_range);

    let degree = cfg.baseline_poly_degree;
    let coeffs: Vec<f64> = (0..degree).map(|_| rng.random_range(-1.0..1.0)).collect();
    let u = |i: usize| i as f64 / (n - 1) as f64;
    // raw(u) = Σ_{k≥1} c_k u^k, rescaled into [0, 1]
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * u(i).powi(k as i32 + 1))
                .sum()
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let poly: Vec<f64> = if degree == 0 || hi - lo < 1e-12 {
        vec![amp; n]
    } else {
        raw.iter()
            .map(|r| amp * (0.5 + 0.5 * (r - lo) / (hi - lo)))
            .collect()
    };

    let humps = uniform_count(&mut rng, cfg.hump_count_range);
    let nf = n as f64;
    let hump_specs: Vec<(f64, f64, f64)> = (0..humps)
        .map(|_| {
            let center = rng.random_range(0.0..nf);
            let width = rng.random_range(nf / 8.0..nf / 3.0);
            let height = amp * rng.random_range(0.2..1.0);
            (center, width, height)
        })
        .collect();

    let values = poly
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let x = i as f64;
            p + hump_specs
                .iter()
                .map(|&(c, w, h)| h * (-0.5 * ((x - c) / w).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    Spectrum::new(values)
}

/// Noise bookkeeping for one noisy realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRecord {
    pub sigma: f64,
    pub target_snr_db: f64,
    pub realized_snr_db: f64,
}

/// Noise standard deviation that puts white noise at `target_snr_db` below a
/// signal of mean-square power `signal_power`.
pub fn noise_sigma(signal_power: f64, target_snr_db: f64) -> f64 {
    (signal_power / 10f64.powf(target_snr_db / 10.0)).sqrt()
}

fn check_target(target_snr_db: f64) -> Result<()> {
    if target_snr_db == NOISELESS_SNR_DB || (MIN_SNR_DB..=MAX_SNR_DB).contains(&target_snr_db) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "target SNR {target_snr_db} dB outside [{MIN_SNR_DB}, {MAX_SNR_DB}]"
        )))
    }
}

fn noise_vector(len: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..len).map(|_| sigma * gaussian(&mut rng)).collect()
}

/// Adds i.i.d. `N(0, σ²)` noise with σ calibrated so that the expected SNR
/// against `s` equals `target_snr_db`. [`NOISELESS_SNR_DB`] adds nothing.
pub fn add_awgn(s: &Spectrum, target_snr_db: f64, seed: u64) -> Result<(Spectrum, NoiseRecord)> {
    check_target(target_snr_db)?;
    let ps = s.power();
    if ps <= 0.0 {
        return Err(Error::ZeroPowerSignal);
    }
    if target_snr_db == NOISELESS_SNR_DB {
        let record = NoiseRecord {
            sigma: 0.0,
            target_snr_db,
            realized_snr_db: f64::INFINITY,
        };
        return Ok((s.clone(), record));
    }
    let sigma = noise_sigma(ps, target_snr_db);
    let noise = noise_vector(s.len(), sigma, seed);
    let noisy = Spectrum::new(s.iter().zip(&noise).map(|(v, e)| v + e).collect())?;
    let realized = metrics::snr_db(s, &noisy)?;
    Ok((
        noisy,
        NoiseRecord {
            sigma,
            target_snr_db,
            realized_snr_db: realized,
        },
    ))
}

/// `clean + baseline + noise`, with the noise calibrated against the clean
/// spectrum alone. The realized SNR stored in the pair is that of
/// `clean + noise` against `clean`.
pub fn compose_noisy(
    clean: &Spectrum,
    baseline: &Spectrum,
    target_snr_db: f64,
    seed: u64,
) -> Result<SpectrumPair> {
    check_same_len(clean.len(), baseline.len())?;
    let (with_noise, record) = add_awgn(clean, target_snr_db, seed)?;
    let noisy = with_noise.add(baseline)?;
    SpectrumPair::new(
        format!("s{seed:016x}"),
        clean.clone(),
        noisy,
        record.target_snr_db,
        record.realized_snr_db,
        seed,
    )
}

/// Generates one pair from its own seed: clean, baseline and noise each draw
/// from a child stream of `pair_seed`.
pub fn gen_pair(cfg: &GeneratorConfig, pair_seed: u64, target_snr_db: f64) -> Result<SpectrumPair> {
    let clean = gen_clean_spectrum(cfg, derive_seed(pair_seed, &[stream::CLEAN]))?;
    let baseline = gen_baseline(cfg, derive_seed(pair_seed, &[stream::BASELINE]))?;
    let mut pair = compose_noisy(
        &clean,
        &baseline,
        target_snr_db,
        derive_seed(pair_seed, &[stream::NOISE]),
    )?;
    pair.seed = pair_seed;
    Ok(pair)
}

/// The pair's noisy spectrum without its baseline, rebuilt from the stored
/// clean spectrum and seed. `None` when the rebuilt noise does not reproduce
/// the recorded SNR, i.e. the pair was not made by [`gen_pair`].
pub fn rebuild_noise_only(pair: &SpectrumPair) -> Option<Spectrum> {
    let seed = derive_seed(pair.seed, &[stream::NOISE]);
    let (with_noise, record) = add_awgn(&pair.clean, pair.target_snr_db, seed).ok()?;
    (record.realized_snr_db.to_bits() == pair.realized_snr_db.to_bits()).then_some(with_noise)
}

/// Seed of pair `index` in `split`.
pub fn pair_seed(cfg: &GeneratorConfig, split: Split, index: usize) -> u64 {
    let tag = match split {
        Split::Train => stream::TRAIN,
        Split::Test => stream::TEST,
    };
    derive_seed(cfg.seed, &[tag, index as u64])
}

fn build_split(cfg: &GeneratorConfig, split: Split, count: usize) -> Result<Dataset> {
    let digest = cfg.digest();
    let grid = &cfg.snr_grid_db;
    let mut pairs = Vec::with_capacity(count);
    for i in 0..count {
        let seed = pair_seed(cfg, split, i);
        let target = grid[i % grid.len()];
        let mut pair = gen_pair(cfg, seed, target)?;
        // peak-free draws have no power to calibrate against; take the next seed
        let mut retry = 1u64;
        while pair.clean.power() == 0.0 {
            let seed = derive_seed(seed, &[retry]);
            pair = gen_pair(cfg, seed, target)?;
            retry += 1;
            if retry > 16 {
                return Err(Error::InvalidConfig(
                    "generator keeps producing empty spectra".into(),
                ));
            }
        }
        pair.id = format!("{}-{i:06}", split.as_str());
        pairs.push(pair);
    }
    Dataset::new(pairs, split, cfg.length, digest)
}

/// Train and test sets from disjoint seed streams; targets cycle through
/// `cfg.snr_grid_db` in order.
pub fn build_dataset(
    cfg: &GeneratorConfig,
    n_train: usize,
    n_test: usize,
) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    if n_train == 0 || n_test == 0 {
        return Err(Error::InvalidConfig(
            "n_train and n_test must be positive".into(),
        ));
    }
    if cfg.peak_count_range[1] == 0 {
        return Err(Error::InvalidConfig(
            "peak_count_range allows no peaks, so no signal power".into(),
        ));
    }
    Ok((
        build_split(cfg, Split::Train, n_train)?,
        build_split(cfg, Split::Test, n_test)?,
    ))
}
