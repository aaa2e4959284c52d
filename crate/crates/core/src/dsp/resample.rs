use super::DspError;
use crate::scalar::Scalar;

pub const RESAMPLER_TAPS: usize = 101;
pub const RESAMPLER_CUTOFF_HZ: f64 = 7200.0;
const FACTOR: usize = 3;

/// Hamming-windowed sinc low-pass for 48 kHz input, normalized to unit DC
/// gain.
pub fn resampler_taps() -> Vec<f64> {
    let m = (RESAMPLER_TAPS - 1) as f64 / 2.0;
    let fc = RESAMPLER_CUTOFF_HZ / 48_000.0;
    let mut h: Vec<f64> = (0..RESAMPLER_TAPS)
        .map(|n| {
            let t = n as f64 - m;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * std::f64::consts::PI * fc * t).sin() / (std::f64::consts::PI * t)
            };
            let w = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (RESAMPLER_TAPS - 1) as f64).cos();
            sinc * w
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|x| *x /= dc);
    h
}

/// Low-pass filters ('same' alignment, zeros beyond the ends) and keeps
/// every third sample. Output length is `floor(N / 3)`.
pub fn resample_48k_to_16k<T: Scalar>(samples: &[T]) -> Result<Vec<T>, DspError> {
    if samples.len() < FACTOR {
        return Err(DspError::TooShort {
            needed: FACTOR,
            found: samples.len(),
        });
    }
    let taps: Vec<T> = resampler_taps().into_iter().map(T::lit).collect();
    let half = (RESAMPLER_TAPS - 1) / 2;
    let n = samples.len();
    let out = (0..n / FACTOR)
        .map(|j| {
            let centre = j * FACTOR;
            // y[c] = Σ_k h[k] · x[c + half − k]
            let k_lo = (centre + half + 1).saturating_sub(n);
            let k_hi = (centre + half).min(RESAMPLER_TAPS - 1);
            (k_lo..=k_hi).fold(T::zero(), |acc, k| acc + taps[k] * samples[centre + half - k])
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_are_symmetric_with_unit_dc_gain() {
        let h = resampler_taps();
        assert_eq!(h.len(), 101);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..101 {
            assert!((h[i] - h[100 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn length_and_dc() {
        let x = vec![0.3f64; 48_000];
        let y = resample_48k_to_16k(&x).unwrap();
        assert_eq!(y.len(), 16_000);
        for &v in &y[20..y.len() - 20] {
            assert!((v - 0.3).abs() < 1e-6);
        }
        assert_eq!(resample_48k_to_16k(&[0.0f64; 7]).unwrap().len(), 2);
        assert!(matches!(resample_48k_to_16k(&[0.0f64; 2]), Err(DspError::TooShort { .. })));
    }

    // Stopband oracle: evaluate the frequency response directly.
    #[test]
    fn response_at_20khz_is_far_below_one_percent() {
        let h = resampler_taps();
        let w = 2.0 * std::f64::consts::PI * 20_000.0 / 48_000.0;
        let (re, im) = h.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, &c)| {
            (re + c * (w * n as f64).cos(), im - c * (w * n as f64).sin())
        });
        assert!((re * re + im * im).sqrt() < 1e-3);
    }

    #[test]
    fn twenty_khz_tone_is_removed() {
        let x: Vec<f64> = (0..48_000)
            .map(|n| (2.0 * std::f64::consts::PI * 20_000.0 * n as f64 / 48_000.0).sin())
            .collect();
        let y = resample_48k_to_16k(&x).unwrap();
        let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
        assert!(rms(&y[40..y.len() - 40]) < 0.01 * rms(&x));
    }
}
