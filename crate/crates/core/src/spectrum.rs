//! Spectrum and dataset types plus their on-disk formats.
//!
//! A dataset file is line-delimited JSON: a header object on the first line,
//! then one record per pair. Reals are written in shortest round-trip decimal
//! so a write/read cycle is bit-exact.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted spectrum length.
pub const MIN_LENGTH: usize = 8;

/// Paper-scale spectrum length; only a default.
pub const DEFAULT_LENGTH: usize = 2051;

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Linear wavenumber axis, cm⁻¹. Metadata only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
}

/// A validated, immutable intensity sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    intensities: Vec<f64>,
    axis: Option<Axis>,
}

impl Spectrum {
    /// Validates `values`: non-empty, at least [`MIN_LENGTH`] long, all finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        if values.len() < MIN_LENGTH {
            return Err(Error::TooShort {
                len: values.len(),
                min: MIN_LENGTH,
            });
        }
        Ok(Spectrum {
            intensities: values,
            axis: None,
        })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0.0; len])
    }

    pub fn with_axis(mut self, axis: Axis) -> Self {
        self.axis = Some(axis);
        self
    }

    pub fn axis(&self) -> Option<Axis> {
        self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.intensities
    }

    pub fn into_values(self) -> Vec<f64> {
        self.intensities
    }

    /// Mean of squared intensities.
    pub fn power(&self) -> f64 {
        self.intensities.iter().map(|v| v * v).sum::<f64>() / self.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.intensities
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Element-wise `self - other`, keeping this spectrum's axis.
    pub fn sub(&self, other: &Spectrum) -> Result<Spectrum> {
        check_same_len(self.len(), other.len())?;
        let diff = self
            .intensities
            .iter()
            .zip(other.values())
            .map(|(a, b)| a - b)
            .collect();
        let mut s = Spectrum::new(diff)?;
        s.axis = self.axis;
        Ok(s)
    }

    /// Element-wise `self + other`, keeping this spectrum's axis.
    pub fn add(&self, other: &Spectrum) -> Result<Spectrum> {
        check_same_len(self.len(), other.len())?;
        let sum = self
            .intensities
            .iter()
            .zip(other.values())
            .map(|(a, b)| a + b)
            .collect();
        let mut s = Spectrum::new(sum)?;
        s.axis = self.axis;
        Ok(s)
    }

    /// Two-column CSV: `index,intensity`, or `wavenumber,intensity` when an
    /// axis is attached. A single leading `#` comment names the columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 24);
        match self.axis {
            Some(axis) => {
                out.push_str("# wavenumber,intensity\n");
                for (i, v) in self.intensities.iter().enumerate() {
                    let x = axis.start + axis.step * i as f64;
                    let _ = writeln!(out, "{x},{v}");
                }
            }
            None => {
                out.push_str("# index,intensity\n");
                for (i, v) in self.intensities.iter().enumerate() {
                    let _ = writeln!(out, "{i},{v}");
                }
            }
        }
        out
    }

    /// Parses the two-column CSV written by [`Spectrum::to_csv`]. The first
    /// column is treated as an axis unless it is exactly `0, 1, 2, ...`.
    pub fn from_csv(text: &str) -> Result<Spectrum> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',');
            let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::ParseFailure {
                    line: lineno + 1,
                    message: "expected two comma-separated columns".into(),
                });
            };
            let parse = |s: &str| {
                f64::from_str(s.trim()).map_err(|e| Error::ParseFailure {
                    line: lineno + 1,
                    message: format!("{s:?}: {e}"),
                })
            };
            let (x, y) = match (parse(a), parse(b)) {
                (Ok(x), Ok(y)) => (x, y),
                // tolerate a bare header row
                (Err(_), Err(_)) if xs.is_empty() => continue,
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            xs.push(x);
            ys.push(y);
        }
        let mut spectrum = Spectrum::new(ys)?;
        let is_index = xs.iter().enumerate().all(|(i, &x)| x == i as f64);
        if !is_index {
            spectrum.axis = Some(Axis {
                start: xs[0],
                step: xs[1] - xs[0],
            });
        }
        Ok(spectrum)
    }
}

impl Deref for Spectrum {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.intensities
    }
}

/// Validates a raw sequence into a [`Spectrum`].
pub fn make_spectrum(values: &[f64]) -> Result<Spectrum> {
    Spectrum::new(values.to_vec())
}

pub(crate) fn check_same_len(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

/// Target SNR meaning "add no noise at all".
pub const NOISELESS_SNR_DB: f64 = f64::INFINITY;

/// A clean/noisy training or test example.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPair {
    pub id: String,
    pub clean: Spectrum,
    pub noisy: Spectrum,
    pub target_snr_db: f64,
    pub realized_snr_db: f64,
    pub seed: u64,
}

impl SpectrumPair {
    pub fn new(
        id: impl Into<String>,
        clean: Spectrum,
        noisy: Spectrum,
        target_snr_db: f64,
        realized_snr_db: f64,
        seed: u64,
    ) -> Result<Self> {
        check_same_len(clean.len(), noisy.len())?;
        let noiseless = target_snr_db == NOISELESS_SNR_DB;
        if target_snr_db.is_nan() || (!noiseless && !target_snr_db.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "target SNR {target_snr_db} is not finite"
            )));
        }
        if realized_snr_db.is_nan() || (!noiseless && realized_snr_db.is_infinite()) {
            return Err(Error::InvalidConfig(format!(
                "realized SNR {realized_snr_db} is not finite"
            )));
        }
        Ok(SpectrumPair {
            id: id.into(),
            clean,
            noisy,
            target_snr_db,
            realized_snr_db,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.clean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clean.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pairs: Vec<SpectrumPair>,
    split: Split,
    length: usize,
    generator_config_digest: String,
}

impl Dataset {
    /// Builds a dataset, checking for a common length and unique ids.
    ///
    /// `length` is only consulted when `pairs` is empty.
    pub fn new(
        pairs: Vec<SpectrumPair>,
        split: Split,
        length: usize,
        generator_config_digest: impl Into<String>,
    ) -> Result<Self> {
        let length = pairs.first().map_or(length, SpectrumPair::len);
        let mut seen = HashSet::with_capacity(pairs.len());
        for pair in &pairs {
            check_same_len(length, pair.len())?;
            if !seen.insert(pair.id.as_str()) {
                return Err(Error::DuplicateId(pair.id.clone()));
            }
        }
        Ok(Dataset {
            pairs,
            split,
            length,
            generator_config_digest: generator_config_digest.into(),
        })
    }

    pub fn pairs(&self) -> &[SpectrumPair] {
        &self.pairs
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn generator_config_digest(&self) -> &str {
        &self.generator_config_digest
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    length: usize,
    split: Split,
    generator_config_digest: String,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    #[serde(with = "snr_field")]
    target_snr_db: f64,
    #[serde(with = "snr_field")]
    realized_snr_db: f64,
    seed: u64,
    clean: Vec<f64>,
    noisy: Vec<f64>,
}

/// JSON has no infinity; the noiseless sentinel is written as the string `"inf"`.
mod snr_field {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad SNR value {s:?}"))),
        }
    }
}

/// Writes `dataset` in the line-delimited record format.
pub fn write_dataset<W: Write>(dataset: &Dataset, mut dest: W) -> Result<()> {
    let header = Header {
        format_version: DATASET_FORMAT_VERSION,
        length: dataset.length,
        split: dataset.split,
        generator_config_digest: dataset.generator_config_digest.clone(),
    };
    serde_json::to_writer(&mut dest, &header).map_err(std::io::Error::from)?;
    dest.write_all(b"\n")?;
    for pair in &dataset.pairs {
        let record = Record {
            id: pair.id.clone(),
            target_snr_db: pair.target_snr_db,
            realized_snr_db: pair.realized_snr_db,
            seed: pair.seed,
            clean: pair.clean.values().to_vec(),
            noisy: pair.noisy.values().to_vec(),
        };
        serde_json::to_writer(&mut dest, &record).map_err(std::io::Error::from)?;
        dest.write_all(b"\n")?;
    }
    dest.flush()?;
    Ok(())
}

/// Reads a dataset file, re-validating every invariant.
pub fn read_dataset<R: BufRead>(source: R) -> Result<Dataset> {
    let mut lines = source.lines().enumerate();
    let header: Header = match lines.next() {
        Some((_, line)) => parse_line(&line?, 1)?,
        None => {
            return Err(Error::ParseFailure {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    if header.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::ParseFailure {
            line: 1,
            message: format!("unsupported format_version {}", header.format_version),
        });
    }
    let mut pairs = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = parse_line(&line, lineno)?;
        check_same_len(record.clean.len(), record.noisy.len())?;
        check_same_len(header.length, record.clean.len())?;
        let at_line = |e: Error| match e {
            Error::LengthMismatch { .. } => e,
            other => Error::ParseFailure {
                line: lineno,
                message: other.to_string(),
            },
        };
        let clean = Spectrum::new(record.clean).map_err(at_line)?;
        let noisy = Spectrum::new(record.noisy).map_err(at_line)?;
        pairs.push(
            SpectrumPair::new(
                record.id,
                clean,
                noisy,
                record.target_snr_db,
                record.realized_snr_db,
                record.seed,
            )
            .map_err(at_line)?,
        );
    }
    Dataset::new(
        pairs,
        header.split,
        header.length,
        header.generator_config_digest,
    )
}

fn parse_line<T: for<'de> Deserialize<'de>>(line: &str, lineno: usize) -> Result<T> {
    serde_json::from_str(line).map_err(|e| Error::ParseFailure {
        line: lineno,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, n: usize, offset: f64) -> SpectrumPair {
        let clean: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() + offset).collect();
        let noisy: Vec<f64> = clean.iter().map(|v| v + 0.1 / 3.0).collect();
        SpectrumPair::new(
            id,
            Spectrum::new(clean).unwrap(),
            Spectrum::new(noisy).unwrap(),
            9.5,
            9.4871,
            42,
        )
        .unwrap()
    }

    #[test]
    fn zero_spectrum_of_length_eight() {
        let s = make_spectrum(&[0.0; 8]).unwrap();
        assert_eq!(s.len(), 8);
    }

    #[test]
    fn paper_length_spectrum() {
        let values: Vec<f64> = (0..2051).map(|i| i as f64).collect();
        assert_eq!(make_spectrum(&values).unwrap().len(), 2051);
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(
            make_spectrum(&[1.0, f64::NAN, 2.0]),
            Err(Error::NonFiniteValue(1))
        ));
        assert!(matches!(make_spectrum(&[]), Err(Error::EmptyInput)));
        assert!(matches!(
            make_spectrum(&[1.0; 7]),
            Err(Error::TooShort { len: 7, .. })
        ));
    }

    #[test]
    fn empty_dataset_writes_header_only() {
        let d = Dataset::new(vec![], Split::Test, 2051, "abc").unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(
            text,
            "{\"format_version\":1,\"length\":2051,\"split\":\"test\",\"generator_config_digest\":\"abc\"}\n"
        );
        assert_eq!(read_dataset(&buf[..]).unwrap(), d);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let d = Dataset::new(
            vec![pair("a", 16, 0.0), pair("b", 16, 1e-300)],
            Split::Train,
            16,
            "digest",
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        let back = read_dataset(&buf[..]).unwrap();
        assert_eq!(back, d);
        let mut again = Vec::new();
        write_dataset(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn noiseless_sentinel_round_trips() {
        let clean = Spectrum::new(vec![1.0; 8]).unwrap();
        let p = SpectrumPair::new(
            "z",
            clean.clone(),
            clean,
            NOISELESS_SNR_DB,
            f64::INFINITY,
            0,
        )
        .unwrap();
        let d = Dataset::new(vec![p], Split::Test, 8, "").unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        assert_eq!(read_dataset(&buf[..]).unwrap(), d);
    }

    #[test]
    fn mismatched_record_lengths() {
        let text = "{\"format_version\":1,\"length\":8,\"split\":\"train\",\"generator_config_digest\":\"\"}\n\
            {\"id\":\"a\",\"target_snr_db\":1,\"realized_snr_db\":1,\"seed\":0,\"clean\":[0,0,0,0,0,0,0,0],\"noisy\":[0,0,0,0,0,0,0,0,0]}\n";
        assert!(matches!(
            read_dataset(text.as_bytes()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn truncated_line_reports_line_number() {
        let d = Dataset::new(
            vec![pair("a", 8, 0.0), pair("b", 8, 0.0)],
            Split::Train,
            8,
            "",
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut = text.len() - 20;
        match read_dataset(&text.as_bytes()[..cut]) {
            Err(Error::ParseFailure { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Dataset::new(
            vec![pair("a", 8, 0.0), pair("a", 8, 0.0)],
            Split::Train,
            8,
            "",
        );
        assert!(matches!(err, Err(Error::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn csv_round_trip_with_and_without_axis() {
        let s = Spectrum::new(vec![0.5, 1.0, -2.25, 3.0, 1e-7, 8.0, 9.0, 10.0]).unwrap();
        assert_eq!(Spectrum::from_csv(&s.to_csv()).unwrap(), s);
        let with_axis = s.clone().with_axis(Axis {
            start: 200.0,
            step: 0.5,
        });
        let back = Spectrum::from_csv(&with_axis.to_csv()).unwrap();
        assert_eq!(back.values(), s.values());
        assert_eq!(back.axis(), with_axis.axis());
    }
}
