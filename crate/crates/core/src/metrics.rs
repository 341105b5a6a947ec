//! Output SNR, RMSE and MAPE of a denoised spectrum against its clean reference.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectrum::check_same_len;

/// Per-spectrum or aggregate quality figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub snr_db: f64,
    pub rmse: f64,
    pub mape_pct: f64,
    pub excluded_points: usize,
}

/// `10·log10(P_s/P_n)` with both powers as mean squares over the whole
/// spectrum. Returns `+inf` when `observed == reference`.
pub fn snr_db(reference: &[f64], observed: &[f64]) -> Result<f64> {
    check_same_len(reference.len(), observed.len())?;
    let n = reference.len() as f64;
    let ps = reference.iter().map(|v| v * v).sum::<f64>() / n;
    if ps <= 0.0 {
        return Err(Error::ZeroPowerSignal);
    }
    let pn = mean_sq_diff(reference, observed);
    if pn == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (ps / pn).log10())
}

pub fn rmse(original: &[f64], forecast: &[f64]) -> Result<f64> {
    check_same_len(original.len(), forecast.len())?;
    Ok(mean_sq_diff(original, forecast).sqrt())
}

fn mean_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Default MAPE floor: 1% of the largest absolute original value.
pub fn default_mape_floor(original: &[f64]) -> f64 {
    0.01 * original.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Mean absolute percentage error over points with `|original| > floor`.
/// Exact zeros are always excluded. Returns the percentage and the number of
/// excluded points.
pub fn mape_pct(original: &[f64], forecast: &[f64], floor: f64) -> Result<(f64, usize)> {
    check_same_len(original.len(), forecast.len())?;
    let floor = floor.max(0.0);
    let mut sum = 0.0;
    let mut kept = 0usize;
    for (&o, &f) in original.iter().zip(forecast) {
        if o.abs() > floor {
            sum += ((o - f) / o).abs();
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::AllPointsExcluded { floor });
    }
    Ok((100.0 * sum / kept as f64, original.len() - kept))
}

/// All three indices with the default MAPE floor.
pub fn evaluate(original: &[f64], forecast: &[f64]) -> Result<MetricsReport> {
    let (mape, excluded) = mape_pct(original, forecast, default_mape_floor(original))?;
    Ok(MetricsReport {
        snr_db: snr_db(original, forecast)?,
        rmse: rmse(original, forecast)?,
        mape_pct: mape,
        excluded_points: excluded,
    })
}
