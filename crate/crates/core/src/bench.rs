//! Benchmark harness: baseline-correct each test input, run every method on
//! it, and score the result against the clean spectrum.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::airpls::{correct, AirplsConfig};
use crate::cnn::{denoise_batch, Checkpoint, Topology};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricsReport};
use crate::spectrum::{Dataset, Spectrum};
use crate::synth::rebuild_noise_only;
use crate::wavelet::{wavelet_denoise, RuleKind, ShrinkageRule, ThresholdMode, WaveletSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Dl,
    CnnSerial,
    Wavelet(RuleKind),
}

impl Method {
    /// Report order.
    pub const ALL: [Method; 8] = [
        Method::Dl,
        Method::CnnSerial,
        Method::Wavelet(RuleKind::Universal),
        Method::Wavelet(RuleKind::Sure),
        Method::Wavelet(RuleKind::Minimax),
        Method::Wavelet(RuleKind::Fdr),
        Method::Wavelet(RuleKind::BlockJs),
        Method::Wavelet(RuleKind::EmpiricalBayes),
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dl => "dl",
            Method::CnnSerial => "cnn_serial",
            Method::Wavelet(kind) => kind.as_str(),
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, Method::Dl | Method::CnnSerial)
    }

    /// Parses a comma-separated list; `all` expands to [`Method::ALL`].
    pub fn parse_list(text: &str) -> Result<Vec<Method>> {
        if text.trim() == "all" {
            return Ok(Method::ALL.to_vec());
        }
        let mut out: Vec<Method> = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Method = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

/// Everything the denoisers need besides the input.
#[derive(Debug, Clone)]
pub struct DenoiseSettings {
    pub wavelet: WaveletSpec,
    pub levels: Option<usize>,
    pub mode: ThresholdMode,
    pub fdr_q: f64,
    pub dl: Option<Checkpoint>,
    pub cnn_serial: Option<Checkpoint>,
}

impl Default for DenoiseSettings {
    fn default() -> Self {
        DenoiseSettings {
            wavelet: WaveletSpec::sym4(),
            levels: None,
            mode: ThresholdMode::Soft,
            fdr_q: 0.05,
            dl: None,
            cnn_serial: None,
        }
    }
}

impl DenoiseSettings {
    pub fn rule(&self, kind: RuleKind) -> ShrinkageRule {
        ShrinkageRule {
            mode: self.mode,
            q: self.fdr_q,
            ..ShrinkageRule::new(kind)
        }
    }

    fn checkpoint(&self, method: Method) -> Result<&Checkpoint> {
        let (slot, topology) = match method {
            Method::Dl => (&self.dl, Topology::Parallel),
            Method::CnnSerial => (&self.cnn_serial, Topology::Serial),
            Method::Wavelet(_) => unreachable!("wavelet methods need no checkpoint"),
        };
        let ckpt = slot
            .as_ref()
            .ok_or_else(|| Error::MissingCheckpoint(method.as_str().into()))?;
        if ckpt.config().topology != topology {
            return Err(Error::InvalidConfig(format!(
                "{method} needs a {} network, checkpoint holds a {} one",
                topology.as_str(),
                ckpt.config().topology.as_str()
            )));
        }
        Ok(ckpt)
    }

    /// Fails early when a neural method has no usable checkpoint.
    pub fn check_methods(&self, methods: &[Method]) -> Result<()> {
        for &m in methods.iter().filter(|m| m.is_neural()) {
            self.checkpoint(m)?;
        }
        Ok(())
    }
}

/// airPLS-corrected noisy inputs, in dataset order.
pub fn preprocess_dataset(ds: &Dataset, airpls: &AirplsConfig) -> Result<Vec<Spectrum>> {
    ds.pairs()
        .iter()
        .map(|p| correct(&p.noisy, airpls))
        .collect()
}

/// Denoises already baseline-corrected spectra with one method.
pub fn denoise_many(
    method: Method,
    inputs: &[Spectrum],
    settings: &DenoiseSettings,
) -> Result<Vec<Spectrum>> {
    match method {
        Method::Wavelet(kind) => {
            let rule = settings.rule(kind);
            inputs
                .iter()
                .map(|x| wavelet_denoise(x, &rule, &settings.wavelet, settings.levels))
                .collect()
        }
        Method::Dl | Method::CnnSerial => {
            let ckpt = settings.checkpoint(method)?;
            let mut out = Vec::with_capacity(inputs.len());
            for chunk in inputs.chunks(64) {
                let rows: Vec<&[f64]> = chunk.iter().map(Spectrum::values).collect();
                for v in denoise_batch(ckpt, &rows)? {
                    out.push(Spectrum::new(v)?);
                }
            }
            Ok(out)
        }
    }
}

pub fn denoise_with_method(
    method: Method,
    input: &Spectrum,
    settings: &DenoiseSettings,
) -> Result<Spectrum> {
    let mut out = denoise_many(method, std::slice::from_ref(input), settings)?;
    Ok(out.pop().expect("one output per input"))
}

/// Label of the row scoring the noisy inputs before any processing, with the
/// generator's baseline left out so the figure is the calibrated input SNR.
pub const NOISY_ROW: &str = "noisy";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: String,
    pub snr_db: f64,
    pub rmse: f64,
    pub mape_pct: f64,
    pub n_spectra: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumScore {
    pub method: String,
    pub id: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    pub id: String,
    /// Column names after `index`.
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub per_spectrum: Vec<SpectrumScore>,
    pub overlay: Overlay,
}

impl BenchReport {
    pub fn row(&self, method: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn table_csv(&self) -> String {
        let mut s = String::from("method,snr_db,rmse,mape_pct,n_spectra\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{}",
                r.method, r.snr_db, r.rmse, r.mape_pct, r.n_spectra
            )
            .unwrap();
        }
        s
    }

    pub fn per_spectrum_csv(&self) -> String {
        let mut s = String::from("method,id,snr_db,rmse,mape_pct,excluded_points\n");
        for p in &self.per_spectrum {
            let r = &p.report;
            writeln!(
                s,
                "{},{},{},{},{},{}",
                p.method, p.id, r.snr_db, r.rmse, r.mape_pct, r.excluded_points
            )
            .unwrap();
        }
        s
    }

    pub fn overlay_csv(&self) -> String {
        let o = &self.overlay;
        let mut s = String::from("index");
        for c in &o.columns {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        let len = o.values.first().map_or(0, Vec::len);
        for i in 0..len {
            write!(s, "{i}").unwrap();
            for col in &o.values {
                write!(s, ",{}", col[i]).unwrap();
            }
            s.push('\n');
        }
        s
    }
}

fn aggregate(method: &str, reports: &[MetricsReport]) -> BenchRow {
    let n = reports.len() as f64;
    BenchRow {
        method: method.to_string(),
        snr_db: reports.iter().map(|r| r.snr_db).sum::<f64>() / n,
        rmse: reports.iter().map(|r| r.rmse).sum::<f64>() / n,
        mape_pct: reports.iter().map(|r| r.mape_pct).sum::<f64>() / n,
        n_spectra: reports.len(),
    }
}

/// Runs `methods` over every pair of `test`. Method rows follow the given
/// order. When every pair's noise can be rebuilt from its seed, a
/// [`NOISY_ROW`] leads the table. `overlay_index` picks the pair whose curves
/// go into the overlay.
pub fn run_bench(
    test: &Dataset,
    methods: &[Method],
    airpls: &AirplsConfig,
    settings: &DenoiseSettings,
    overlay_index: usize,
) -> Result<BenchReport> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods selected".into()));
    }
    settings.check_methods(methods)?;
    let overlay_index = overlay_index.min(test.len() - 1);
    let inputs = preprocess_dataset(test, airpls)?;
    let pairs = test.pairs();

    let mut rows = Vec::new();
    let mut per_spectrum = Vec::new();
    let pick = &pairs[overlay_index];
    let mut overlay = Overlay {
        id: pick.id.clone(),
        columns: vec!["clean".into(), "noisy".into(), "corrected".into()],
        values: vec![
            pick.clean.values().to_vec(),
            pick.noisy.values().to_vec(),
            inputs[overlay_index].values().to_vec(),
        ],
    };

    let mut score = |label: &str, outputs: &[Spectrum]| -> Result<()> {
        let mut reports = Vec::with_capacity(outputs.len());
        for (pair, out) in pairs.iter().zip(outputs) {
            let r = evaluate(pair.clean.values(), out.values())?;
            per_spectrum.push(SpectrumScore {
                method: label.to_string(),
                id: pair.id.clone(),
                report: r,
            });
            reports.push(r);
        }
        rows.push(aggregate(label, &reports));
        Ok(())
    };
    let noise_only: Option<Vec<Spectrum>> = pairs.iter().map(rebuild_noise_only).collect();
    if let Some(noisy) = &noise_only {
        score(NOISY_ROW, noisy)?;
    }
    for &m in methods {
        let outputs = denoise_many(m, &inputs, settings)?;
        score(m.as_str(), &outputs)?;
        overlay.columns.push(m.as_str().into());
        overlay
            .values
            .push(outputs[overlay_index].values().to_vec());
    }
    Ok(BenchReport {
        rows,
        per_spectrum,
        overlay,
    })
}
