mod common;

use proptest::prelude::*;

use common::{bh_survivors, random_vec, sure_oracle, whittaker_dense};
use raman_denoise::airpls::{airpls, whittaker_smooth, AirplsConfig};
use raman_denoise::synth::{render_peaks, PeakShape, PeakSpec};
use raman_denoise::wavelet::{fdr_threshold, threshold_sure};
use raman_denoise::Spectrum;

/// Noise plus a few large coefficients, so most levels are not sparse.
fn level(seed: u64, n: usize, spikes: usize) -> Vec<f64> {
    let mut c = random_vec(n, seed, 1.0);
    for (k, v) in c.iter_mut().take(spikes).enumerate() {
        *v += if k % 2 == 0 { 4.0 } else { -5.5 };
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sure_equals_exhaustive_search(seed in any::<u64>(), n in 1usize..=64, spikes in 0usize..20, sigma in 0.2f64..3.0) {
        let c: Vec<f64> = level(seed, n, spikes).iter().map(|v| v * sigma).collect();
        prop_assert_eq!(threshold_sure(&c, sigma).unwrap(), sure_oracle(&c, sigma));
    }

    #[test]
    fn sure_ties_on_integer_levels(vals in prop::collection::vec(-6i32..=6, 1..=64)) {
        let c: Vec<f64> = vals.iter().map(|&v| v as f64).collect();
        prop_assume!(c.iter().any(|&v| v != 0.0));
        prop_assert_eq!(threshold_sure(&c, 1.0).unwrap(), sure_oracle(&c, 1.0));
    }

    #[test]
    fn fdr_survivors_equal_brute_force(seed in any::<u64>(), n in 1usize..=100, spikes in 0usize..30, q in 0.01f64..0.3) {
        let c = level(seed, n, spikes);
        let got: Vec<usize> = match fdr_threshold(&c, 1.0, q) {
            Some(t) => (0..n).filter(|&i| c[i].abs() >= t).collect(),
            None => Vec::new(),
        };
        prop_assert_eq!(got, bh_survivors(&c, 1.0, q));
    }

    #[test]
    fn whittaker_equals_dense_solve(seed in any::<u64>(), n in 3usize..=128, log_lambda in -2.0f64..4.0) {
        let y = random_vec(n, seed, 2.0);
        let w: Vec<f64> = random_vec(n, seed ^ 9, 1.0).iter().map(|v| 0.05 + v.abs()).collect();
        let lambda = 10f64.powf(log_lambda);
        let z = whittaker_smooth(&y, &w, lambda).unwrap();
        let oracle = whittaker_dense(&y, &w, lambda);
        for (a, b) in z.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}

#[test]
fn whittaker_with_zero_weights_inside() {
    // airPLS zeroes the weights of every point above the fit
    let y = random_vec(100, 3, 1.0);
    let w: Vec<f64> = (0..100)
        .map(|i| if i % 3 == 0 { 0.0 } else { 1.0 })
        .collect();
    let z = whittaker_smooth(&y, &w, 50.0).unwrap();
    for (a, b) in z.iter().zip(whittaker_dense(&y, &w, 50.0)) {
        assert!((a - b).abs() < 1e-8);
    }
}

fn five_peaks(n: usize) -> Vec<PeakSpec> {
    [
        (300.0, 4.0, 8.0),
        (700.0, 6.0, 5.0),
        (1020.0, 3.0, 10.0),
        (1400.0, 5.0, 6.0),
        (1800.0, 4.0, 7.0),
    ]
    .iter()
    .map(|&(center, width, amplitude)| PeakSpec {
        center: center * n as f64 / 2051.0,
        width,
        amplitude,
        shape: PeakShape::Lorentzian,
    })
    .collect()
}

#[test]
fn airpls_recovers_quadratic_under_peaks() {
    let n = 2051;
    let peaks = render_peaks(&five_peaks(n), n).unwrap();
    let base: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 / (n - 1) as f64;
            20.0 + 15.0 * x - 25.0 * x * x
        })
        .collect();
    let y = Spectrum::new(peaks.iter().zip(&base).map(|(a, b)| a + b).collect()).unwrap();
    let fit = airpls(&y, &AirplsConfig::default()).unwrap();
    let rmse = raman_denoise::metrics::rmse(&fit.baseline, &base).unwrap();
    assert!(rmse < 0.02 * 10.0, "baseline rmse {rmse}");
    assert!(fit.iterations_used <= 15);
    assert!(fit.baseline.iter().all(|&b| b <= y.max()));
}

#[test]
fn airpls_on_peaks_alone_stays_near_zero() {
    let n = 2051;
    let y = render_peaks(&five_peaks(n), n).unwrap();
    let fit = airpls(&y, &AirplsConfig::default()).unwrap();
    let worst = fit.baseline.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst < 0.01 * 10.0, "{worst}");
}
