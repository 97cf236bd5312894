use std::f64::consts::PI;

use mocap_doppler::dsp::{
    build_pairs, center_shift, compress_sqrt, dft, fill_gaps, naive_dft, resample_linear,
    segment_windows, stft_density, window_count, Complex64, ComplexSpectrogram, MoCapStream,
    PreprocessConfig, RadarSignal, Taper,
};
use mocap_doppler::synth::{simulate, ScattererScene, Trajectory};
use mocap_doppler::tensor::RngState;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cfg(window: usize, hop: usize) -> PreprocessConfig {
    PreprocessConfig {
        window,
        hop,
        ..PreprocessConfig::default()
    }
}

fn stream(t: Vec<f64>, rate: f64, values: Vec<f64>) -> MoCapStream {
    MoCapStream::new(t, vec!["a".into()], 1, rate, values).unwrap()
}

fn random_iq(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = RngState::new(seed);
    (0..n).map(|_| c(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))).collect()
}

#[test]
fn resample_constant_channel() {
    let t: Vec<f64> = (0..251).map(|i| i as f64 / 250.0).collect();
    let s = stream(t, 250.0, vec![2.5; 251]);
    let out = resample_linear(&s, 256.0).unwrap();
    assert_eq!(out.frames(), 257);
    assert!(out.data.iter().all(|&v| (v - 2.5).abs() < 1e-15));
}

#[test]
fn resample_linear_signal_is_exact() {
    let t: Vec<f64> = (0..251).map(|i| i as f64 / 250.0).collect();
    let s = stream(t.clone(), 250.0, t);
    let out = resample_linear(&s, 256.0).unwrap();
    for (time, v) in out.t.iter().zip(&out.data) {
        assert!((time - v).abs() < 1e-12);
    }
    assert_eq!(out.t[0], 0.0);
    assert!((out.t.last().unwrap() - 1.0).abs() < 1e-12);
    assert!((out.data.last().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn resample_sine_against_analytic() {
    let f = 5.0;
    let t: Vec<f64> = (0..501).map(|i| i as f64 / 250.0).collect();
    let v = t.iter().map(|t| (2.0 * PI * f * t).sin()).collect();
    let out = resample_linear(&stream(t, 250.0, v), 256.0).unwrap();
    let err = out
        .t
        .iter()
        .zip(&out.data)
        .map(|(t, v)| (v - (2.0 * PI * f * t).sin()).abs())
        .fold(0.0, f64::max);
    // Linear interpolation error is at most h²·max|x''|/8.
    let h = 1.0 / 250.0;
    let bound = h * h * (2.0 * PI * f).powi(2) / 8.0;
    assert!(err <= bound * (1.0 + 1e-9), "max error {err} above bound {bound}");
    assert!(err > 0.9 * bound, "max error {err} far below bound {bound}");
}

#[test]
fn resample_needs_two_frames() {
    let s = stream(vec![0.0], 250.0, vec![1.0]);
    assert!(resample_linear(&s, 256.0).is_err());
}

#[test]
fn gap_fill_interior_and_edges() {
    let nan = f64::NAN;
    let t: Vec<f64> = (0..6).map(|i| i as f64).collect();
    let s = stream(t, 1.0, vec![nan, 1.0, nan, nan, 4.0, nan]);
    let (filled, report) = fill_gaps(&s).unwrap();
    assert_eq!(filled.data, vec![1.0, 1.0, 2.0, 3.0, 4.0, 4.0]);
    assert_eq!(report.total(), 4);
}

#[test]
fn gap_fill_rejects_marker_never_seen() {
    let s = stream(vec![0.0, 1.0], 1.0, vec![f64::NAN, f64::NAN]);
    assert!(fill_gaps(&s).is_err());
}

#[test]
fn segment_examples() {
    assert_eq!(window_count(1024, 256, 64).unwrap(), 13);
    assert_eq!(window_count(256, 256, 64).unwrap(), 1);
    assert_eq!(window_count(256 + 63, 256, 64).unwrap(), 1);
    assert!(window_count(255, 256, 64).is_err());

    let data: Vec<f64> = (0..10).map(|v| v as f64).collect();
    let (w, starts) = segment_windows(&data, 1, 10, 3).unwrap();
    assert_eq!(w, data);
    assert_eq!(starts, vec![0]);
    let (w, starts) = segment_windows(&data, 2, 2, 1).unwrap();
    assert_eq!(starts, vec![0, 1, 2, 3]);
    assert_eq!(&w[4..8], &[2.0, 3.0, 4.0, 5.0]);
}

proptest! {
    #[test]
    fn window_count_matches_counting_loop(w in 1usize..64, h_frac in 0.0f64..1.0, extra in 0usize..300) {
        let h = 1 + ((w - 1) as f64 * h_frac) as usize;
        let n = w + extra;
        let mut count = 0;
        let mut start = 0;
        while start + w <= n {
            count += 1;
            start += h;
        }
        prop_assert_eq!(window_count(n, w, h).unwrap(), count);
    }

    #[test]
    fn sqrt_compression_is_monotone(a in 0.0f64..10.0, b in 0.0f64..10.0, pa in 0.0f64..6.3, pb in 0.0f64..6.3) {
        let spec = ComplexSpectrogram { bins: 2, frames: 1, data: vec![Complex64::from_polar(a, pa), Complex64::from_polar(b, pb)] };
        let out = compress_sqrt(&spec).data;
        if a < b {
            prop_assert!(out[0] < out[1]);
        }
        prop_assert!(out.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn stft_constant_signal() {
    let spec = stft_density(&vec![c(1.0, 0.0); 8], &cfg(8, 8)).unwrap();
    assert_eq!((spec.bins, spec.frames), (8, 1));
    assert!(spec.at(0, 0).norm() > 0.1);
    for k in 1..8 {
        assert!(spec.at(k, 0).norm() < 1e-12);
    }
}

#[test]
fn stft_pure_tone_single_bin() {
    let w = 16;
    for k0 in [0usize, 3, 11] {
        let iq: Vec<_> = (0..w)
            .map(|n| Complex64::from_polar(1.0, 2.0 * PI * (k0 * n) as f64 / w as f64))
            .collect();
        let spec = stft_density(&iq, &cfg(w, w)).unwrap();
        for k in 0..w {
            let mag = spec.at(k, 0).norm();
            if k == k0 {
                assert!(mag > 0.1);
            } else {
                assert!(mag < 1e-12, "bin {k} leaked {mag}");
            }
        }
    }
}

#[test]
fn stft_matches_naive_dft_oracle() {
    let cfg = PreprocessConfig::default();
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let iq = random_iq(512, seed);
        let spec = stft_density(&iq, &cfg).unwrap();
        let w = cfg.window;
        let scale = 1.0 / (cfg.radar_rate * w as f64).sqrt();
        for t in 0..spec.frames {
            let seg = &iq[t * cfg.hop..t * cfg.hop + w];
            // Independent O(W²) transform.
            for k in 0..w {
                let mut acc = c(0.0, 0.0);
                for (n, x) in seg.iter().enumerate() {
                    acc += x * Complex64::from_polar(1.0, -2.0 * PI * ((k * n) % w) as f64 / w as f64);
                }
                worst = worst.max((spec.at(k, t) - acc * scale).norm());
            }
        }
    }
    assert!(worst < 1e-9, "max abs diff {worst}");
}

#[test]
fn radix2_agrees_with_naive_for_odd_sizes_too() {
    let x = random_iq(64, 3);
    let fast = dft(&x);
    let slow = naive_dft(&x);
    for (a, b) in fast.iter().zip(&slow) {
        assert!((a - b).norm() < 1e-10);
    }
    let y = random_iq(12, 4);
    assert_eq!(dft(&y), naive_dft(&y));
}

#[test]
fn parseval_under_density_scaling() {
    let cfg = cfg(256, 64);
    let df = cfg.bin_hz();
    for seed in 0..20 {
        let iq = random_iq(512, 100 + seed);
        let spec = stft_density(&iq, &cfg).unwrap();
        for t in 0..spec.frames {
            let seg = &iq[t * 64..t * 64 + 256];
            let mean_power = seg.iter().map(|v| v.norm_sqr()).sum::<f64>() / 256.0;
            let total = spec.column_energy(t) * df;
            assert!((total - mean_power).abs() < 1e-9, "{total} vs {mean_power}");
        }
    }
}

#[test]
fn hann_taper_is_periodic() {
    let w = Taper::Hann.weights(4);
    let expect = [0.0, 0.5, 1.0, 0.5];
    for (a, b) in w.iter().zip(expect) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn center_shift_examples() {
    let rows = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)];
    let spec = ComplexSpectrogram { bins: 4, frames: 1, data: rows.to_vec() };
    let shifted = center_shift(&spec);
    assert_eq!(shifted.data, vec![rows[2], rows[3], rows[0], rows[1]]);
    assert_eq!(center_shift(&shifted), spec);
}

#[test]
fn center_shift_odd_puts_zero_at_middle() {
    let data: Vec<_> = (0..5).map(|k| c(k as f64, 0.0)).collect();
    let spec = ComplexSpectrogram { bins: 5, frames: 1, data };
    let shifted = center_shift(&spec);
    assert_eq!(shifted.at(2, 0), c(0.0, 0.0));
    let order: Vec<f64> = shifted.data.iter().map(|v| v.re).collect();
    assert_eq!(order, vec![3.0, 4.0, 0.0, 1.0, 2.0]);
}

#[test]
fn center_shift_is_energy_preserving_permutation() {
    let iq = random_iq(1024, 9);
    let spec = stft_density(&iq, &cfg(128, 32)).unwrap();
    let shifted = center_shift(&spec);
    for t in 0..spec.frames {
        assert!((spec.column_energy(t) - shifted.column_energy(t)).abs() < 1e-12);
        let mut a: Vec<f64> = spec.column(t).iter().map(|v| v.norm()).collect();
        let mut b: Vec<f64> = shifted.column(t).iter().map(|v| v.norm()).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }
}

#[test]
fn compression_commutes_with_energy_ranking() {
    let iq = random_iq(512, 12);
    let spec = stft_density(&iq, &cfg(64, 64)).unwrap();
    let shifted = center_shift(&spec);
    let s = compress_sqrt(&shifted);
    for t in 0..spec.frames {
        let raw = spec.column(t);
        for k in 0..64 {
            let j = (k + 32) % 64;
            assert_eq!(s.at(j, t), raw[k].norm().sqrt());
        }
    }
}

#[test]
fn compress_examples() {
    let spec = ComplexSpectrogram { bins: 2, frames: 1, data: vec![c(0.0, 0.0), c(3.0, 4.0)] };
    let out = compress_sqrt(&spec);
    assert_eq!(out.data[0], 0.0);
    assert!((out.data[1] - 5f64.sqrt()).abs() < 1e-12);
}

fn static_scene() -> ScattererScene {
    ScattererScene::new([0.0, 0.0, 1.0])
        .with("a", Trajectory::Stationary { position: [3.0, 1.0, 1.0] })
        .with("b", Trajectory::Stationary { position: [2.0, -1.0, 0.5] })
}

#[test]
fn build_pairs_shapes() {
    let (m, r) = simulate(&static_scene(), 3.0, 250.0, 256.0, 0).unwrap();
    let cfg = cfg(128, 32);
    let pairs = build_pairs(&m, &r, &cfg).unwrap();
    let n = r.len();
    let t = (n - 128) / 32 + 1;
    assert_eq!(pairs.len(), t);
    assert_eq!(pairs.mocap.len(), t * 128 * 2 * 3);
    assert_eq!(pairs.spec.len(), t * 128);
    assert_eq!(pairs.bins(), pairs.window());
    pairs.validate().unwrap();
}

#[test]
fn build_pairs_stationary_zero_doppler() {
    let (m, r) = simulate(&static_scene(), 2.0, 250.0, 256.0, 0).unwrap();
    let cfg = PreprocessConfig::default();
    let pairs = build_pairs(&m, &r, &cfg).unwrap();
    let centre = cfg.window / 2;
    for t in 0..pairs.len() {
        // The target is sqrt(|S|), so energy is the fourth power.
        let row = pairs.target(t);
        let total: f64 = row.iter().map(|v| v.powi(4)).sum();
        let off: f64 = row
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != centre)
            .map(|(_, v)| v.powi(4))
            .sum();
        assert!(off < 1e-9 * total, "leakage {}", off / total);
    }
}

#[test]
fn build_pairs_single_window_and_short_overlap() {
    let (m, r) = simulate(&static_scene(), 1.0, 250.0, 256.0, 0).unwrap();
    let pairs = build_pairs(&m, &r, &PreprocessConfig::default()).unwrap();
    assert_eq!(pairs.len(), 1);

    let (m, r) = simulate(&static_scene(), 0.5, 250.0, 256.0, 0).unwrap();
    let err = build_pairs(&m, &r, &PreprocessConfig::default()).unwrap_err();
    assert!(err.to_string().contains("insufficient overlap"));
}

#[test]
fn build_pairs_windows_follow_the_radar_clock() {
    // x(t) = t sampled at 250 Hz must land on the radar timestamps.
    let t: Vec<f64> = (0..=500).map(|i| i as f64 / 250.0).collect();
    let m = MoCapStream::new(t.clone(), vec!["a".into()], 1, 250.0, t).unwrap();
    let rt: Vec<f64> = (0..=512).map(|i| i as f64 / 256.0).collect();
    let r = RadarSignal::new(rt.clone(), vec![c(1.0, 0.0); rt.len()], 256.0, 5.8e9).unwrap();
    let pairs = build_pairs(&m, &r, &cfg(64, 64)).unwrap();
    for (ti, &s) in pairs.starts.iter().enumerate() {
        for (j, v) in pairs.input(ti).iter().enumerate() {
            assert!((v - rt[s + j]).abs() < 1e-12);
        }
    }
}

#[test]
fn build_pairs_fills_gaps() {
    let (mut m, r) = simulate(&static_scene(), 2.0, 250.0, 256.0, 0).unwrap();
    for v in &mut m.data[30..36] {
        *v = f64::NAN;
    }
    let pairs = build_pairs(&m, &r, &PreprocessConfig::default()).unwrap();
    assert!(pairs.mocap.iter().all(|v| v.is_finite()));
}

#[test]
fn build_pairs_is_deterministic() {
    let mut scene = static_scene();
    scene.noise_sigma = 0.1;
    let (m, r) = simulate(&scene, 3.0, 250.0, 256.0, 5).unwrap();
    let a = build_pairs(&m, &r, &PreprocessConfig::default()).unwrap();
    let b = build_pairs(&m, &r, &PreprocessConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_validation() {
    assert!(cfg(64, 0).validate().is_err());
    assert!(cfg(64, 65).validate().is_err());
    assert!(cfg(64, 64).validate().is_ok());
    assert!(stft_density(&random_iq(10, 0), &cfg(16, 4)).is_err());
}
