#![allow(dead_code)]

use raman_denoise::cnn::{Network, Tensor};
use raman_denoise::rng::{gaussian, rng_from_seed};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// Relative error with an absolute floor so exact zeros compare sanely.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

pub fn random_vec(n: usize, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| scale * gaussian(&mut rng)).collect()
}

pub fn random_tensor(shape: [usize; 3], seed: u64) -> Tensor {
    Tensor::new(random_vec(shape.iter().product(), seed, 1.0), shape).unwrap()
}

#[derive(Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    pub skipped: usize,
    pub worst: f64,
    pub worst_name: String,
}

impl GradReport {
    pub fn passes(&self) -> bool {
        self.checked > 0 && self.worst < FD_TOLERANCE
    }
}

fn loss_and_pattern(net: &Network, x: &Tensor, t: &Tensor) -> (f64, Vec<usize>) {
    let cache = net.forward_train(x).unwrap();
    let (loss, _) = net.backward(Some(&cache), t).unwrap();
    (loss, cache.activation_pattern())
}

/// Central differences on the parameters picked by `pick(range_len)` from
/// every tensor in the layout. Perturbations that change which units are
/// active (a relu or maxpool kink) are skipped.
pub fn check_network(
    net: &mut Network,
    x: &Tensor,
    t: &Tensor,
    mut pick: impl FnMut(usize) -> Vec<usize>,
) -> GradReport {
    let cache = net.forward_train(x).unwrap();
    let base_pattern = cache.activation_pattern();
    let (_, grads) = net.backward(Some(&cache), t).unwrap();
    drop(cache);
    let mut report = GradReport::default();
    for (name, range) in net.layout.named_ranges() {
        for off in pick(range.len()) {
            let i = range.start + off;
            let orig = net.params[i];
            net.params[i] = orig + FD_STEP;
            let (lp, pp) = loss_and_pattern(net, x, t);
            net.params[i] = orig - FD_STEP;
            let (lm, pm) = loss_and_pattern(net, x, t);
            net.params[i] = orig;
            if pp != base_pattern || pm != base_pattern {
                report.skipped += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * FD_STEP);
            let e = rel_err(grads[i], numeric);
            report.checked += 1;
            if e > report.worst {
                report.worst = e;
                report.worst_name =
                    format!("{name}[{off}] analytic {} numeric {numeric}", grads[i]);
            }
        }
    }
    report
}

/// SURE risk of soft thresholding standardized data at `t`.
fn sure_risk(x: &[f64], t: f64) -> f64 {
    let n = x.len() as f64;
    let inside = x.iter().filter(|v| v.abs() <= t).count() as f64;
    n - 2.0 * inside + x.iter().map(|v| v.min(t).powi(2)).sum::<f64>()
}

/// Exhaustive SURE minimizer over `{0} ∪ {|cᵢ|/σ}`, ties to the smaller
/// threshold, with the sparse-level fallback to the universal threshold.
pub fn sure_oracle(coeffs: &[f64], sigma: f64) -> f64 {
    let n = coeffs.len();
    let x: Vec<f64> = coeffs.iter().map(|c| c.abs() / sigma).collect();
    let nf = n as f64;
    let excess = x.iter().map(|v| v * v - 1.0).sum::<f64>() / nf;
    if excess <= nf.log2().powf(1.5) / nf.sqrt() {
        return sigma * (2.0 * nf.ln()).sqrt();
    }
    let mut candidates = x.clone();
    candidates.push(0.0);
    let mut best = (f64::INFINITY, f64::INFINITY);
    for &t in &candidates {
        let r = sure_risk(&x, t);
        if r < best.0 || (r == best.0 && t < best.1) {
            best = (r, t);
        }
    }
    best.1 * sigma
}

/// Benjamini–Hochberg by the textbook recipe: sort p-values, find the
/// largest k with p₍ₖ₎ ≤ qk/n, reject the k smallest.
pub fn bh_survivors(coeffs: &[f64], sigma: f64, q: f64) -> Vec<usize> {
    let n = coeffs.len();
    let p: Vec<f64> = coeffs
        .iter()
        .map(|c| statrs::function::erf::erfc(c.abs() / sigma / std::f64::consts::SQRT_2))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let k = (1..=n)
        .filter(|&k| p[order[k - 1]] <= q * k as f64 / n as f64)
        .max()
        .unwrap_or(0);
    let mut out: Vec<usize> = order[..k].to_vec();
    out.sort_unstable();
    out
}

/// Minimizer of Σ wᵢ(yᵢ − zᵢ)² + λ‖Δ²z‖² from the dense normal equations.
pub fn whittaker_dense(y: &[f64], w: &[f64], lambda: f64) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let n = y.len();
    let mut d = DMatrix::<f64>::zeros(n - 2, n);
    for i in 0..n - 2 {
        d[(i, i)] = 1.0;
        d[(i, i + 1)] = -2.0;
        d[(i, i + 2)] = 1.0;
    }
    let a = DMatrix::from_diagonal(&DVector::from_column_slice(w)) + lambda * d.transpose() * &d;
    let rhs = DVector::from_iterator(n, y.iter().zip(w).map(|(a, b)| a * b));
    a.lu()
        .solve(&rhs)
        .expect("oracle system is regular")
        .iter()
        .copied()
        .collect()
}
