//! Baseline removal by adaptive iteratively reweighted penalized least
//! squares (airPLS), built on a banded Whittaker smoother.

use crate::error::{Error, Result};
use crate::spectrum::{check_same_len, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirplsConfig {
    pub lambda: f64,
    pub max_iter: usize,
    /// Difference order of the roughness penalty.
    pub order: usize,
    pub termination_ratio: f64,
}

impl Default for AirplsConfig {
    fn default() -> Self {
        AirplsConfig {
            lambda: 1e5,
            max_iter: 15,
            order: 2,
            termination_ratio: 1e-3,
        }
    }
}

impl AirplsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "airPLS lambda {} must be positive",
                self.lambda
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("airPLS max_iter must be >= 1".into()));
        }
        if !(1..=3).contains(&self.order) {
            return Err(Error::InvalidConfig(format!(
                "difference order {} not in 1..=3",
                self.order
            )));
        }
        if !(self.termination_ratio >= 0.0) {
            return Err(Error::InvalidConfig(
                "termination_ratio must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineFit {
    pub baseline: Spectrum,
    pub iterations_used: usize,
    pub converged: bool,
    /// Sum of the weights used in the final fit.
    pub final_weight_mass: f64,
    /// `|d⁻|₁` after each fit, for diagnostics.
    pub negative_residual_history: Vec<f64>,
}

/// Largest exponent fed to the weight update.
const MAX_WEIGHT_EXPONENT: f64 = 50.0;

/// Coefficients of the order-`d` forward difference, e.g. `[1, -2, 1]`.
fn difference_stencil(order: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    for _ in 0..order {
        let mut next = vec![0.0; c.len() + 1];
        for (k, v) in c.iter().enumerate() {
            next[k] -= v;
            next[k + 1] += v;
        }
        c = next;
    }
    // sign convention: leading coefficient positive for even orders
    if order % 2 == 1 {
        c.iter_mut().for_each(|v| *v = -*v);
    }
    c
}

/// Symmetric positive definite band matrix, lower band stored by row:
/// `band[i * (p + 1) + k] = A[i][i - k]`.
struct SymBand {
    n: usize,
    p: usize,
    band: Vec<f64>,
}

impl SymBand {
    fn at(&self, i: usize, k: usize) -> f64 {
        self.band[i * (self.p + 1) + k]
    }

    fn at_mut(&mut self, i: usize, k: usize) -> &mut f64 {
        &mut self.band[i * (self.p + 1) + k]
    }

    /// `W + λ DᵀD` for the order-`p` difference matrix `D`.
    fn penalized(weights: &[f64], lambda: f64, order: usize) -> Self {
        let n = weights.len();
        let p = order;
        let mut m = SymBand {
            n,
            p,
            band: vec![0.0; n * (p + 1)],
        };
        let c = difference_stencil(order);
        for r in 0..n.saturating_sub(order) {
            for a in 0..=order {
                for b in 0..=a {
                    *m.at_mut(r + a, a - b) += lambda * c[a] * c[b];
                }
            }
        }
        for (i, w) in weights.iter().enumerate() {
            *m.at_mut(i, 0) += w;
        }
        m
    }

    /// In-place LDLᵀ; afterwards `at(i, 0)` holds `D[i]` and `at(i, k)` holds
    /// `L[i][i-k]`.
    fn factor(&mut self) -> Result<()> {
        let (n, p) = (self.n, self.p);
        let scale = (0..n).map(|i| self.at(i, 0).abs()).fold(0.0, f64::max);
        for i in 0..n {
            let lo = i.saturating_sub(p);
            for j in lo..i {
                let mut s = self.at(i, i - j);
                for k in lo.max(j.saturating_sub(p))..j {
                    s -= self.at(i, i - k) * self.at(j, j - k) * self.at(k, 0);
                }
                *self.at_mut(i, i - j) = s / self.at(j, 0);
            }
            let mut d = self.at(i, 0);
            for k in lo..i {
                let l = self.at(i, i - k);
                d -= l * l * self.at(k, 0);
            }
            if !(d > 1e-14 * scale) {
                return Err(Error::SingularSystem);
            }
            *self.at_mut(i, 0) = d;
        }
        Ok(())
    }

    #[allow(clippy::needless_range_loop)]
    fn solve_factored(&self, rhs: &mut [f64]) {
        let (n, p) = (self.n, self.p);
        for i in 0..n {
            let mut s = rhs[i];
            for j in i.saturating_sub(p)..i {
                s -= self.at(i, i - j) * rhs[j];
            }
            rhs[i] = s;
        }
        for i in 0..n {
            rhs[i] /= self.at(i, 0);
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for j in i + 1..(i + p + 1).min(n) {
                s -= self.at(j, j - i) * rhs[j];
            }
            rhs[i] = s;
        }
    }
}

/// Minimizes `Σ wᵢ(yᵢ − zᵢ)² + λ Σ (Δ^order z)²` by solving
/// `(W + λDᵀD) z = W y` with a banded LDLᵀ factorization.
pub fn whittaker_smooth_order(y: &[f64], w: &[f64], lambda: f64, order: usize) -> Result<Vec<f64>> {
    check_same_len(y.len(), w.len())?;
    if y.len() < 3 || y.len() <= order {
        return Err(Error::LengthTooShort {
            len: y.len(),
            filter_len: order.max(2) + 1,
        });
    }
    if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidConfig(
            "weights must be finite and non-negative".into(),
        ));
    }
    // the penalty's null space is the polynomials of degree < order
    if w.iter().filter(|&&v| v > 0.0).count() < order.max(1) {
        return Err(Error::SingularSystem);
    }
    let mut a = SymBand::penalized(w, lambda, order);
    a.factor()?;
    let mut z: Vec<f64> = w.iter().zip(y).map(|(w, y)| w * y).collect();
    a.solve_factored(&mut z);
    Ok(z)
}

/// Second-order Whittaker smoother.
pub fn whittaker_smooth(y: &[f64], w: &[f64], lambda: f64) -> Result<Vec<f64>> {
    whittaker_smooth_order(y, w, lambda, 2)
}

/// Estimates the lower envelope of `y`: each pass zeroes the weight of
/// points above the current fit and raises the weight of points below it by
/// `exp(iter·|dᵢ|/|d⁻|₁)`.
pub fn airpls(y: &Spectrum, cfg: &AirplsConfig) -> Result<BaselineFit> {
    cfg.validate()?;
    let n = y.len();
    let abs_sum: f64 = y.iter().map(|v| v.abs()).sum();
    let mut w = vec![1.0; n];
    let mut history = Vec::with_capacity(cfg.max_iter);
    let mut z = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iter {
        z = whittaker_smooth_order(y, &w, cfg.lambda, cfg.order)?;
        iterations = iter;
        let d: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a - b).collect();
        let dssn: f64 = d.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
        history.push(dssn);
        if dssn == 0.0 || dssn < cfg.termination_ratio * abs_sum {
            converged = true;
            break;
        }
        if iter == cfg.max_iter {
            break;
        }
        let k = iter as f64;
        let mut nearest_below = f64::NEG_INFINITY;
        for (wi, &di) in w.iter_mut().zip(&d) {
            if di >= 0.0 {
                *wi = 0.0;
            } else {
                *wi = (k * -di / dssn).min(MAX_WEIGHT_EXPONENT).exp();
                nearest_below = nearest_below.max(di);
            }
        }
        // anchor both ends so the fit stays determined at the boundaries
        let edge = (k * nearest_below / dssn).min(MAX_WEIGHT_EXPONENT).exp();
        w[0] = edge;
        w[n - 1] = edge;
    }

    let ceiling = y.max();
    for v in &mut z {
        *v = v.min(ceiling);
    }
    let mut baseline = Spectrum::new(z)?;
    if let Some(axis) = y.axis() {
        baseline = baseline.with_axis(axis);
    }
    Ok(BaselineFit {
        baseline,
        iterations_used: iterations,
        converged,
        final_weight_mass: w.iter().sum(),
        negative_residual_history: history,
    })
}

/// `y` minus its airPLS baseline.
pub fn correct(y: &Spectrum, cfg: &AirplsConfig) -> Result<Spectrum> {
    let fit = airpls(y, cfg)?;
    y.sub(&fit.baseline)
}
