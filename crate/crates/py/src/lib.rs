//! Python bindings. Spectra cross the boundary as lists of floats.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use raman_denoise::airpls::{self, AirplsConfig};
use raman_denoise::bench::{self as core_bench, DenoiseSettings, Method};
use raman_denoise::cnn::{self, NetworkConfig, Topology, TrainHyper};
use raman_denoise::metrics;
use raman_denoise::synth::{self, GeneratorConfig};
use raman_denoise::wavelet::{self, RuleKind, ShrinkageRule, ThresholdMode, WaveletSpec};
use raman_denoise::{Error, Spectrum};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        e if e.is_numeric() => PyArithmeticError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for Result<T, Error> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn spectrum(values: Vec<f64>) -> PyResult<Spectrum> {
    Spectrum::new(values).py_err()
}

fn wavelet_spec(name: &str, extension: &str) -> PyResult<WaveletSpec> {
    WaveletSpec::new(name.parse().py_err()?, extension.parse().py_err()?).py_err()
}

/// A generated clean/noisy pair.
#[pyclass(frozen, get_all, module = "ramandenoise")]
struct Pair {
    id: String,
    clean: Vec<f64>,
    noisy: Vec<f64>,
    target_snr_db: f64,
    realized_snr_db: f64,
    seed: u64,
}

impl Pair {
    fn from_core(p: &raman_denoise::SpectrumPair) -> Self {
        Pair {
            id: p.id.clone(),
            clean: p.clean.values().to_vec(),
            noisy: p.noisy.values().to_vec(),
            target_snr_db: p.target_snr_db,
            realized_snr_db: p.realized_snr_db,
            seed: p.seed,
        }
    }
}

#[pymethods]
impl Pair {
    fn __repr__(&self) -> String {
        format!(
            "Pair(id={:?}, len={}, realized_snr_db={:.3})",
            self.id,
            self.clean.len(),
            self.realized_snr_db
        )
    }
}

/// Train or test split, as read from or written to a dataset file.
#[pyclass(frozen, module = "ramandenoise")]
struct Dataset {
    inner: raman_denoise::Dataset,
}

#[pymethods]
impl Dataset {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let f = std::fs::File::open(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let inner = raman_denoise::read_dataset(std::io::BufReader::new(f)).py_err()?;
        Ok(Dataset { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let f = std::fs::File::create(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        raman_denoise::write_dataset(&self.inner, std::io::BufWriter::new(f)).py_err()
    }

    fn pairs(&self) -> Vec<Pair> {
        self.inner.pairs().iter().map(Pair::from_core).collect()
    }

    #[getter]
    fn length(&self) -> usize {
        self.inner.length()
    }

    #[getter]
    fn split(&self) -> &'static str {
        self.inner.split().as_str()
    }

    #[getter]
    fn generator_config_digest(&self) -> String {
        self.inner.generator_config_digest().to_string()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Builds train and test datasets from the default generator settings.
#[pyfunction]
#[pyo3(signature = (n_train, n_test, snr_db=vec![9.5], seed=0, length=2051))]
fn generate(
    py: Python<'_>,
    n_train: usize,
    n_test: usize,
    snr_db: Vec<f64>,
    seed: u64,
    length: usize,
) -> PyResult<(Dataset, Dataset)> {
    let cfg = GeneratorConfig {
        length,
        snr_grid_db: snr_db,
        seed,
        ..GeneratorConfig::default()
    };
    let (train, test) = py
        .detach(|| synth::build_dataset(&cfg, n_train, n_test))
        .py_err()?;
    Ok((Dataset { inner: train }, Dataset { inner: test }))
}

/// `values` plus white noise calibrated to `snr_db`; returns the noisy
/// values and the realized SNR.
#[pyfunction]
fn add_noise(values: Vec<f64>, snr_db: f64, seed: u64) -> PyResult<(Vec<f64>, f64)> {
    let (noisy, rec) = synth::add_awgn(&spectrum(values)?, snr_db, seed).py_err()?;
    Ok((noisy.into_values(), rec.realized_snr_db))
}

#[pyfunction]
#[pyo3(signature = (y, w, lam))]
fn whittaker_smooth(y: Vec<f64>, w: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
    airpls::whittaker_smooth(&y, &w, lam).py_err()
}

fn airpls_config(lam: f64, max_iter: usize) -> AirplsConfig {
    AirplsConfig {
        lambda: lam,
        max_iter,
        ..AirplsConfig::default()
    }
}

#[pyfunction]
#[pyo3(signature = (values, lam=1e5, max_iter=15))]
fn airpls_baseline(values: Vec<f64>, lam: f64, max_iter: usize) -> PyResult<Vec<f64>> {
    let fit = airpls::airpls(&spectrum(values)?, &airpls_config(lam, max_iter)).py_err()?;
    Ok(fit.baseline.into_values())
}

#[pyfunction]
#[pyo3(signature = (values, lam=1e5, max_iter=15))]
fn airpls_correct(values: Vec<f64>, lam: f64, max_iter: usize) -> PyResult<Vec<f64>> {
    let out = airpls::correct(&spectrum(values)?, &airpls_config(lam, max_iter)).py_err()?;
    Ok(out.into_values())
}

/// Multilevel DWT; returns `(details finest-first, approximation)`.
#[pyfunction]
#[pyo3(signature = (values, levels, wavelet="sym4", extension="symmetric"))]
fn dwt(
    values: Vec<f64>,
    levels: usize,
    wavelet: &str,
    extension: &str,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let w = wavelet_spec(wavelet, extension)?;
    let p = wavelet::dwt(&values, &w, levels).py_err()?;
    Ok((p.details, p.approximation))
}

/// Inverse of [`dwt`]; `length` is the original signal length.
#[pyfunction]
#[pyo3(signature = (details, approximation, length, wavelet="sym4", extension="symmetric"))]
fn idwt(
    details: Vec<Vec<f64>>,
    approximation: Vec<f64>,
    length: usize,
    wavelet: &str,
    extension: &str,
) -> PyResult<Vec<f64>> {
    let w = wavelet_spec(wavelet, extension)?;
    // rebuild the bookkeeping by decomposing a zero signal of the same length
    let mut p = wavelet::dwt(&vec![0.0; length], &w, details.len()).py_err()?;
    let same = p
        .details
        .iter()
        .zip(&details)
        .all(|(a, b)| a.len() == b.len())
        && p.approximation.len() == approximation.len();
    if !same {
        return Err(PyValueError::new_err(
            "coefficient lengths do not match the signal length",
        ));
    }
    p.details = details;
    p.approximation = approximation;
    wavelet::idwt(&p, &w).py_err()
}

#[pyfunction]
#[pyo3(signature = (values, rule="ebayes", wavelet="sym4", extension="symmetric", levels=None, mode="soft", fdr_q=0.05))]
fn wavelet_denoise(
    values: Vec<f64>,
    rule: &str,
    wavelet: &str,
    extension: &str,
    levels: Option<usize>,
    mode: &str,
    fdr_q: f64,
) -> PyResult<Vec<f64>> {
    let kind: RuleKind = rule.parse().py_err()?;
    let rule = ShrinkageRule {
        mode: mode.parse::<ThresholdMode>().py_err()?,
        q: fdr_q,
        ..ShrinkageRule::new(kind)
    };
    let w = wavelet_spec(wavelet, extension)?;
    let out = wavelet::wavelet_denoise(&spectrum(values)?, &rule, &w, levels).py_err()?;
    Ok(out.into_values())
}

#[pyfunction]
fn snr_db(reference: Vec<f64>, observed: Vec<f64>) -> PyResult<f64> {
    metrics::snr_db(&reference, &observed).py_err()
}

#[pyfunction]
fn rmse(original: Vec<f64>, forecast: Vec<f64>) -> PyResult<f64> {
    metrics::rmse(&original, &forecast).py_err()
}

/// Returns `(mape_pct, excluded_points)`; `floor` defaults to 1% of the
/// largest original magnitude.
#[pyfunction]
#[pyo3(signature = (original, forecast, floor=None))]
fn mape_pct(original: Vec<f64>, forecast: Vec<f64>, floor: Option<f64>) -> PyResult<(f64, usize)> {
    let floor = floor.unwrap_or_else(|| metrics::default_mape_floor(&original));
    metrics::mape_pct(&original, &forecast, floor).py_err()
}

#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    original: Vec<f64>,
    forecast: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = metrics::evaluate(&original, &forecast).py_err()?;
    let d = PyDict::new(py);
    d.set_item("snr_db", r.snr_db)?;
    d.set_item("rmse", r.rmse)?;
    d.set_item("mape_pct", r.mape_pct)?;
    d.set_item("excluded_points", r.excluded_points)?;
    Ok(d)
}

/// A trained (or freshly initialized) denoising network.
#[pyclass(frozen, module = "ramandenoise")]
struct Checkpoint {
    inner: cnn::Checkpoint,
}

#[pymethods]
impl Checkpoint {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Checkpoint {
            inner: cnn::load_checkpoint(&path).py_err()?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        cnn::save_checkpoint(&self.inner, &path).py_err()
    }

    /// Denoises one baseline-corrected spectrum.
    fn denoise(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(cnn::denoise(&self.inner, &spectrum(values)?)
            .py_err()?
            .into_values())
    }

    #[getter]
    fn history(&self) -> Vec<f64> {
        self.inner.history.clone()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.network.params.len()
    }

    #[getter]
    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = self.inner.config();
        let h = &self.inner.hyper;
        let d = PyDict::new(py);
        d.set_item("topology", c.topology.as_str())?;
        d.set_item("branch_depth", c.branch_depth)?;
        d.set_item("filters_per_layer", c.filters_per_layer)?;
        d.set_item("kernel_len", c.kernel_len)?;
        d.set_item("input_len", c.input_len)?;
        d.set_item("learning_rate", h.learning_rate)?;
        d.set_item("epochs", h.epochs)?;
        d.set_item("batch_size", h.batch_size)?;
        d.set_item("seed", h.seed)?;
        d.set_item("shift_augment", h.shift_augment)?;
        Ok(d)
    }
}

/// Trains a network on baseline-corrected inputs and clean targets.
#[pyfunction]
#[pyo3(signature = (inputs, targets, preset="desk", topology="parallel", epochs=None, learning_rate=None, batch_size=None, seed=0, shift_augment=None))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    preset: &str,
    topology: &str,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    seed: u64,
    shift_augment: Option<bool>,
) -> PyResult<Checkpoint> {
    let len = inputs.first().map_or(0, Vec::len);
    let (mut config, mut hyper) = match preset {
        "desk" => (NetworkConfig::desk(len), TrainHyper::desk()),
        "paper" => (NetworkConfig::paper(len), TrainHyper::paper()),
        other => return Err(PyValueError::new_err(format!("unknown preset {other:?}"))),
    };
    config.topology = topology.parse::<Topology>().py_err()?;
    hyper.seed = seed;
    hyper.epochs = epochs.unwrap_or(hyper.epochs);
    hyper.learning_rate = learning_rate.unwrap_or(hyper.learning_rate);
    hyper.batch_size = batch_size.unwrap_or(hyper.batch_size);
    hyper.shift_augment = shift_augment.unwrap_or(hyper.shift_augment);
    let inner = py
        .detach(|| cnn::train(config, &inputs, &targets, &hyper))
        .py_err()?;
    Ok(Checkpoint { inner })
}

/// Runs the benchmark over a test dataset and returns the summary CSV.
#[pyfunction]
#[pyo3(signature = (test, methods="universal,sure,minimax,fdr,blockjs,ebayes", dl=None, cnn_serial=None))]
fn run_bench(
    py: Python<'_>,
    test: &Dataset,
    methods: &str,
    dl: Option<&Checkpoint>,
    cnn_serial: Option<&Checkpoint>,
) -> PyResult<String> {
    let methods = Method::parse_list(methods).py_err()?;
    let settings = DenoiseSettings {
        dl: dl.map(|c| c.inner.clone()),
        cnn_serial: cnn_serial.map(|c| c.inner.clone()),
        ..DenoiseSettings::default()
    };
    let report = py
        .detach(|| {
            core_bench::run_bench(
                &test.inner,
                &methods,
                &AirplsConfig::default(),
                &settings,
                0,
            )
        })
        .py_err()?;
    Ok(report.table_csv())
}

#[pymodule]
fn ramandenoise(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Pair>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<Checkpoint>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(whittaker_smooth, m)?)?;
    m.add_function(wrap_pyfunction!(airpls_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(airpls_correct, m)?)?;
    m.add_function(wrap_pyfunction!(dwt, m)?)?;
    m.add_function(wrap_pyfunction!(idwt, m)?)?;
    m.add_function(wrap_pyfunction!(wavelet_denoise, m)?)?;
    m.add_function(wrap_pyfunction!(snr_db, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(mape_pct, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    Ok(())
}
