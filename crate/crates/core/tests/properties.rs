mod common;

use proptest::prelude::*;

use common::random_vec;
use raman_denoise::cnn::layers::{conv1d_forward, ConvShape};
use raman_denoise::cnn::{mse_loss, Network, NetworkConfig, Tensor, Topology};
use raman_denoise::metrics::{mape_pct, rmse, snr_db};
use raman_denoise::synth::{build_dataset, GeneratorConfig};
use raman_denoise::wavelet::{
    dwt, idwt, shrink_block_js, shrink_ebayes, shrink_fdr, shrink_hard, shrink_soft, Extension,
    WaveletName, WaveletSpec,
};
use raman_denoise::{make_spectrum, read_dataset, write_dataset, Error};

fn spec(name: WaveletName, ext: Extension) -> WaveletSpec {
    WaveletSpec::new(name, ext).unwrap()
}

fn wavelets() -> impl Strategy<Value = WaveletSpec> {
    (
        prop_oneof![
            Just(WaveletName::Haar),
            Just(WaveletName::Db4),
            Just(WaveletName::Sym4)
        ],
        prop_oneof![Just(Extension::Symmetric), Just(Extension::Periodic)],
    )
        .prop_map(|(n, e)| spec(n, e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dwt_round_trip(w in wavelets(), len in 16usize..700, seed in any::<u64>(), extra in 0usize..4) {
        let x = random_vec(len, seed, 3.0);
        let max = raman_denoise::wavelet::max_levels(len, w.filter_len());
        prop_assume!(max >= 1);
        let levels = 1 + extra % max;
        let p = dwt(&x, &w, levels).unwrap();
        let back = idwt(&p, &w).unwrap();
        let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn periodic_transform_preserves_energy(
        name in prop_oneof![Just(WaveletName::Haar), Just(WaveletName::Sym4)],
        k in 4u32..11,
        seed in any::<u64>(),
    ) {
        // power-of-two lengths keep every level even, so no padding sample
        let len = 1usize << k;
        let w = spec(name, Extension::Periodic);
        let x = random_vec(len, seed, 1.0);
        let levels = raman_denoise::wavelet::max_levels(len, w.filter_len()).max(1);
        let p = dwt(&x, &w, levels).unwrap();
        let ex: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!((ex - p.energy()).abs() < 1e-8 * ex.max(1.0));
    }

    #[test]
    fn shrinkers_never_expand(seed in any::<u64>(), n in 1usize..200, sigma in 0.05f64..3.0, t in 0.0f64..4.0) {
        let c = random_vec(n, seed, 2.0);
        let outs = [
            shrink_soft(&c, t),
            shrink_hard(&c, t),
            shrink_block_js(&c, sigma),
            shrink_ebayes(&c, sigma, 0.5),
            shrink_fdr(&c, sigma, 0.05),
        ];
        for out in &outs {
            for (o, i) in out.iter().zip(&c) {
                prop_assert!(o.abs() <= i.abs() + 1e-15);
                prop_assert!(*o == 0.0 || o.signum() == i.signum());
            }
        }
    }

    #[test]
    fn snr_rmse_identity(seed in any::<u64>(), n in 8usize..400, scale in 0.01f64..10.0) {
        let r = random_vec(n, seed, 1.0);
        let o: Vec<f64> = r.iter().zip(random_vec(n, seed ^ 1, scale)).map(|(a, b)| a + b).collect();
        let ps = r.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let lhs = snr_db(&r, &o).unwrap();
        let rhs = 10.0 * ps.log10() - 20.0 * rmse(&r, &o).unwrap().log10();
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn rmse_triangle_inequality(seed in any::<u64>(), n in 1usize..100) {
        let a = random_vec(n, seed, 1.0);
        let b = random_vec(n, seed.wrapping_add(1), 1.0);
        let c = random_vec(n, seed.wrapping_add(2), 1.0);
        prop_assert!(rmse(&a, &c).unwrap() <= rmse(&a, &b).unwrap() + rmse(&b, &c).unwrap() + 1e-12);
    }

    #[test]
    fn mape_is_scale_invariant(seed in any::<u64>(), n in 2usize..100, k in 0.01f64..100.0) {
        let a: Vec<f64> = random_vec(n, seed, 1.0).iter().map(|v| v + 3.0).collect();
        let b = random_vec(n, seed ^ 7, 1.0);
        let (m1, e1) = mape_pct(&a, &b, 0.0).unwrap();
        let ak: Vec<f64> = a.iter().map(|v| v * k).collect();
        let bk: Vec<f64> = b.iter().map(|v| v * k).collect();
        let (m2, e2) = mape_pct(&ak, &bk, 0.0).unwrap();
        prop_assert_eq!(e1, e2);
        prop_assert!((m1 - m2).abs() <= 1e-9 * m1.max(1.0));
    }

    #[test]
    fn non_finite_values_are_rejected(n in 8usize..64, at in 0usize..64, which in 0u8..3) {
        let at = at % n;
        let mut v = vec![1.0; n];
        v[at] = [f64::NAN, f64::INFINITY, f64::NEG_INFINITY][which as usize];
        prop_assert!(matches!(make_spectrum(&v), Err(Error::NonFiniteValue(i)) if i == at));
    }

    #[test]
    fn loss_is_nonnegative_and_zero_only_on_equality(seed in any::<u64>(), n in 1usize..50) {
        let p = Tensor::new(random_vec(n, seed, 1.0), [1, 1, n]).unwrap();
        let t = Tensor::new(random_vec(n, seed ^ 3, 1.0), [1, 1, n]).unwrap();
        prop_assert!(mse_loss(&p, &t).unwrap() > 0.0);
        prop_assert_eq!(mse_loss(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn network_output_matches_input_length(
        depth in 1usize..5, filters in 1usize..4, kernel in 1usize..9,
        len in 8usize..80, serial in any::<bool>(),
    ) {
        let cfg = NetworkConfig {
            topology: if serial { Topology::Serial } else { Topology::Parallel },
            branch_depth: depth,
            filters_per_layer: filters,
            kernel_len: kernel,
            input_len: len,
        };
        let mut expect = len;
        for _ in 0..depth {
            expect = expect.div_ceil(2);
        }
        prop_assert_eq!(cfg.pooled_len(), expect);
        let net = Network::init(cfg, 1).unwrap();
        let x = Tensor::new(random_vec(2 * len, 5, 1.0), [2, 1, len]).unwrap();
        prop_assert_eq!(net.forward(&x).unwrap().shape, [2, 1, len]);
    }
}

/// Direct nested-loop cross-correlation with the same padding convention.
fn naive_conv(x: &Tensor, w: &[f64], b: &[f64], s: ConvShape) -> Vec<f64> {
    let [batch, _, len] = x.shape;
    let pad = (s.kernel - 1) / 2;
    let mut y = vec![0.0; batch * s.out_ch * len];
    for n in 0..batch {
        for o in 0..s.out_ch {
            for t in 0..len {
                let mut acc = b[o];
                for c in 0..s.in_ch {
                    for j in 0..s.kernel {
                        let src = t as isize + j as isize - pad as isize;
                        if src >= 0 && (src as usize) < len {
                            acc += w[(o * s.in_ch + c) * s.kernel + j]
                                * x.data[(n * s.in_ch + c) * len + src as usize];
                        }
                    }
                }
                y[(n * s.out_ch + o) * len + t] = acc;
            }
        }
    }
    y
}

#[test]
fn conv_matches_nested_loops_on_100_shapes() {
    let mut rng = raman_denoise::rng::rng_from_seed(11);
    use rand::Rng;
    for draw in 0..100u64 {
        let s = ConvShape {
            in_ch: rng.random_range(1..5),
            out_ch: rng.random_range(1..5),
            kernel: rng.random_range(1..12),
        };
        let batch = rng.random_range(1..4);
        let len = rng.random_range(1..40);
        let x = Tensor::new(
            random_vec(batch * s.in_ch * len, draw, 1.0),
            [batch, s.in_ch, len],
        )
        .unwrap();
        let w = random_vec(s.weight_len(), draw + 1000, 1.0);
        let b = random_vec(s.out_ch, draw + 2000, 1.0);
        let got = conv1d_forward(&x, &w, &b, s).unwrap();
        for (g, e) in got.data.iter().zip(naive_conv(&x, &w, &b, s)) {
            assert!((g - e).abs() < 1e-12, "draw {draw}: {g} vs {e}");
        }
    }
}

#[test]
fn dataset_round_trip_is_bit_exact() {
    let cfg = GeneratorConfig {
        length: 64,
        snr_grid_db: vec![0.0, 9.5, 80.0],
        seed: 4,
        ..GeneratorConfig::default()
    };
    let (train, test) = build_dataset(&cfg, 6, 2).unwrap();
    for ds in [train, test] {
        let mut bytes = Vec::new();
        write_dataset(&ds, &mut bytes).unwrap();
        let back = read_dataset(bytes.as_slice()).unwrap();
        assert_eq!(back, ds);
        let mut again = Vec::new();
        write_dataset(&back, &mut again).unwrap();
        assert_eq!(bytes, again);
    }
}
