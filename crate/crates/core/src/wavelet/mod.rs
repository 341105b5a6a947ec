//! Wavelet shrinkage denoising: a dyadic DWT engine plus six rules for
//! shrinking detail coefficients.

mod ebayes;
pub mod filters;
pub mod shrink;
pub mod transform;

pub use ebayes::{fit_weight, posterior_median, weight_for_threshold};
pub use filters::{Extension, WaveletName, WaveletSpec};
pub use shrink::{
    fdr_threshold, mad_sigma, shrink_block_js, shrink_ebayes, shrink_fdr, shrink_hard,
    shrink_level, shrink_soft, threshold_minimax, threshold_sure, threshold_universal, RuleKind,
    ShrinkageRule, ThresholdMode,
};
pub use transform::{
    default_levels, dwt, dwt_spectrum, idwt, idwt_spectrum, max_levels, CoefficientPyramid,
};

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

/// Noise level from the finest detail band (MAD estimator).
pub fn estimate_sigma(p: &CoefficientPyramid) -> Result<f64> {
    let finest = p.details.first().ok_or(Error::EmptyLevel)?;
    mad_sigma(finest)
}

/// Decompose, shrink every detail level with one global noise estimate,
/// reconstruct. The approximation band is left untouched. `levels = None`
/// uses [`default_levels`].
pub fn wavelet_denoise(
    x: &Spectrum,
    rule: &ShrinkageRule,
    w: &WaveletSpec,
    levels: Option<usize>,
) -> Result<Spectrum> {
    rule.validate()?;
    let levels = levels.unwrap_or_else(|| default_levels(x.len(), w));
    let mut pyramid = dwt(x, w, levels)?;
    let sigma = estimate_sigma(&pyramid)?;
    if sigma > 0.0 {
        for level in pyramid.details.iter_mut() {
            *level = shrink_level(level, sigma, x.len(), rule)?;
        }
    }
    let mut out = idwt_spectrum(&pyramid, w)?;
    if let Some(axis) = x.axis() {
        out = out.with_axis(axis);
    }
    Ok(out)
}
