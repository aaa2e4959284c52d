use gated_ser::dsp::{
    frame_count, frame_signal, mel, mel_inv, power_spectrum, resample_48k_to_16k, resampler_taps, Mfcc, MfccConfig,
};
use gated_ser::seed;
use proptest::prelude::*;
use rand::Rng;

fn noisy_tone(n: usize, s: u64) -> Vec<f64> {
    let mut rng = seed::rng(s);
    (0..n)
        .map(|i| 0.05 * (0.07 * i as f64).sin() + rng.gen_range(-0.02..0.02))
        .collect()
}

// Naive O(N²) DFT as the oracle.
fn dft_power(x: &[f64], n_fft: usize) -> Vec<f64> {
    (0..=n_fft / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &v) in x.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * n) as f64 / n_fft as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            (re * re + im * im) / n_fft as f64
        })
        .collect()
}

#[test]
fn power_spectrum_matches_a_direct_dft_and_parseval() {
    let x = noisy_tone(200, 4);
    let n_fft = 256;
    let p = power_spectrum(&x, n_fft).unwrap();
    let q = dft_power(&x, n_fft);
    for (a, b) in p.iter().zip(&q) {
        assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{a} vs {b}");
    }
    // one-sided Parseval: P0 + 2·ΣP_k + P_{N/2} = Σx²
    let energy: f64 = x.iter().map(|v| v * v).sum();
    let folded = p[0] + p[n_fft / 2] + 2.0 * p[1..n_fft / 2].iter().sum::<f64>();
    assert!((folded - energy).abs() < 1e-12 * energy);
}

#[test]
fn tones_land_in_the_nearest_mel_filter() {
    let cfg = MfccConfig::default();
    let m = Mfcc::<f64>::new(cfg.clone()).unwrap();
    let top = mel(8000.0);
    let centers: Vec<f64> = (1..=cfg.n_mels).map(|k| mel_inv(top * k as f64 / (cfg.n_mels + 1) as f64)).collect();
    // tones sitting on a filter center avoid ties between neighbours
    for &k in &[3usize, 8, 15, 22] {
        let f = centers[k];
        let tone: Vec<f64> = (0..8000).map(|n| 0.3 * (2.0 * std::f64::consts::PI * f * n as f64 / 16_000.0).sin()).collect();
        let e = m.mel_energies(&tone).unwrap();
        let mean: Vec<f64> = (0..e.cols()).map(|c| (0..e.rows()).map(|t| e.row(t)[c]).sum::<f64>()).collect();
        let peak = (0..mean.len()).max_by(|&a, &b| mean[a].total_cmp(&mean[b])).unwrap();
        assert_eq!(peak, k, "{f:.0} Hz");
    }
}

#[test]
fn resampled_tone_is_scaled_by_the_filter_response() {
    let f = 440.0;
    let x: Vec<f64> = (0..48_000).map(|n| (2.0 * std::f64::consts::PI * f * n as f64 / 48_000.0).sin()).collect();
    let y = resample_48k_to_16k(&x).unwrap();
    assert_eq!(y.len(), 16_000);
    // symmetric taps: zero phase, real gain H(f) = Σ h[k]·cos(ω(k − m))
    let h = resampler_taps();
    let m = (h.len() - 1) as f64 / 2.0;
    let w = 2.0 * std::f64::consts::PI * f / 48_000.0;
    let gain: f64 = h.iter().enumerate().map(|(k, &c)| c * (w * (k as f64 - m)).cos()).sum();
    assert!((gain - 1.0).abs() < 5e-3, "passband gain {gain}");
    // away from the edges every output sample equals the scaled 16 kHz tone
    let worst = (40..15_960)
        .map(|j| (y[j] - gain * (2.0 * std::f64::consts::PI * f * j as f64 / 16_000.0).sin()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gain_moves_only_c0(n in 800usize..4000, s in any::<u64>(), g in 0.1f64..10.0) {
        let cfg = MfccConfig::default();
        let m = Mfcc::<f64>::new(cfg.clone()).unwrap();
        let x = noisy_tone(n, s);
        let gx: Vec<f64> = x.iter().map(|v| v * g).collect();
        let a = m.compute(&x, "a").unwrap();
        let b = m.compute(&gx, "b").unwrap();
        prop_assert_eq!(a.width(), 13);
        // orthonormal DCT-II: c0 = Σ log E / √N, and log E shifts by ln g²
        let shift = (cfg.n_mels as f64).sqrt() * (g * g).ln();
        for t in 0..a.len() {
            let (ra, rb) = (a.frames.row(t), b.frames.row(t));
            prop_assert!((rb[0] - ra[0] - shift).abs() < 1e-9);
            for c in 1..13 {
                prop_assert!((rb[c] - ra[c]).abs() < 1e-9, "c{} {} vs {}", c, ra[c], rb[c]);
            }
        }
    }

    #[test]
    fn framing_covers_the_signal_in_hops(n in 0usize..2000, frame in 1usize..400, hop in 1usize..200) {
        let x: Vec<usize> = (0..n).collect();
        match frame_signal(&x, frame, hop) {
            Ok(frames) => {
                prop_assert_eq!(Some(frames.len()), frame_count(n, frame, hop));
                for (i, f) in frames.iter().enumerate() {
                    prop_assert_eq!(f.len(), frame);
                    prop_assert_eq!(f[0], i * hop);
                }
                // the next frame would run past the end
                prop_assert!(frames.len() * hop + frame > n);
            }
            Err(_) => prop_assert!(n < frame),
        }
    }
}
