//! Empirical Bayes shrinkage with a spike-and-Laplace prior.
//!
//! Each standardized coefficient is modelled as `x = μ + z`, `z ~ N(0, 1)`,
//! with `μ = 0` with probability `1 − w` and `μ ~ Laplace(a)` otherwise. The
//! mixing weight is fitted by marginal maximum likelihood on each level and
//! coefficients are replaced by their posterior median.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Mills ratio `(1 − Φ(z)) / φ(z)` for `z ≥ 0`.
pub(crate) fn mills_ratio(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z < 5.0 {
        std_normal_cdf(-z) / std_normal_pdf(z)
    } else {
        // continued fraction 1/(z + 1/(z + 2/(z + 3/(z + ...))))
        let mut f = z;
        for k in (1..=80).rev() {
            f = z + k as f64 / f;
        }
        1.0 / f
    }
}

/// `g(x)/φ(x) − 1`, where `g` is the Laplace(a) prior convolved with N(0, 1).
/// Even in `x`; may be `+inf` for very large `|x|`.
pub(crate) fn beta_laplace(x: f64, a: f64) -> f64 {
    let x = x.abs();
    let xma = x - a;
    let upper = std_normal_cdf(xma);
    let log_ratio = upper.ln() + 0.5 * xma * xma + LN_SQRT_2PI;
    0.5 * a * (mills_ratio(x + a) + log_ratio.exp()) - 1.0
}

/// Derivative of the marginal log-likelihood with respect to `w`.
fn score(w: f64, betas: &[f64]) -> f64 {
    betas
        .iter()
        .map(|&b| {
            if b.is_infinite() {
                1.0 / w
            } else {
                b / (1.0 + w * b)
            }
        })
        .sum()
}

/// Mixing weight whose posterior-median threshold equals `t`.
pub fn weight_for_threshold(t: f64, a: f64) -> f64 {
    let tma = t - a;
    let inv = a * std_normal_cdf(tma) / std_normal_pdf(tma) - beta_laplace(t, a);
    (1.0 / inv).clamp(0.0, 1.0)
}

/// Marginal maximum-likelihood mixing weight on `[w_min, 1]`, found by
/// bisection on the (monotone decreasing) score to within `tol`.
pub fn fit_weight(standardized: &[f64], a: f64, w_min: f64, tol: f64) -> f64 {
    let betas: Vec<f64> = standardized.iter().map(|&x| beta_laplace(x, a)).collect();
    if score(1.0, &betas) >= 0.0 {
        return 1.0;
    }
    if score(w_min, &betas) <= 0.0 {
        return w_min;
    }
    let (mut lo, mut hi) = (w_min, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if score(mid, &betas) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Posterior median of `μ` given one standardized observation.
pub fn posterior_median(x: f64, w: f64, a: f64) -> f64 {
    let ax = x.abs();
    if ax == 0.0 {
        return 0.0;
    }
    let xma = ax - a;
    if xma > 25.0 {
        return x.signum() * xma;
    }
    let dens = std_normal_pdf(xma);
    let zz = dens * (1.0 / w - 1.0) / a + 0.5 * (dens * mills_ratio(ax + a) + std_normal_cdf(xma));
    if zz >= 1.0 {
        return 0.0;
    }
    let normal = Normal::standard();
    let correction = normal.inverse_cdf(zz);
    let mu = (xma - correction).max(0.0).min(ax);
    x.signum() * mu
}

/// Shrinks one level of coefficients: standardize by `sigma`, fit the
/// mixing weight, map to posterior medians, rescale.
pub fn shrink_ebayes(coeffs: &[f64], sigma: f64, a: f64) -> Vec<f64> {
    if coeffs.is_empty() || !(sigma > 0.0) {
        return coeffs.to_vec();
    }
    let n = coeffs.len();
    let standardized: Vec<f64> = coeffs.iter().map(|c| c / sigma).collect();
    let universal = (2.0 * (n.max(2) as f64).ln()).sqrt();
    let w_min = weight_for_threshold(universal, a);
    let w = fit_weight(&standardized, a, w_min, 1e-6);
    standardized
        .iter()
        .map(|&x| sigma * posterior_median(x, w, a))
        .collect()
}
