//! Additive environmental noise at a controlled signal-to-noise ratio.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::corpus::{NoiseKind, NoiseRecording, Utterance};
use crate::dsp::{resample_48k_to_16k, DspError, NOISE_RATE, SPEECH_RATE};
use crate::scalar::Scalar;
use crate::seed;

/// Tolerance of [`verify_snr`] against the requested SNR.
pub const SNR_TOLERANCE_DB: f64 = 0.1;

#[derive(Debug, Error)]
pub enum MixError {
    #[error("cannot measure the power of an empty signal")]
    Empty,
    #[error("noise has {noise} samples, the utterance needs {clean}")]
    NoiseTooShort { noise: usize, clean: usize },
    #[error("sample rates differ: speech {speech} Hz, noise {noise} Hz")]
    RateMismatch { speech: u32, noise: u32 },
    #[error("SNR is undefined: the {0} signal is silent")]
    UndefinedSnr(&'static str),
    #[error("target SNR must be finite, got {0}")]
    InvalidTarget(f64),
    #[error("achieved SNR {achieved:.4} dB is off the {target} dB target")]
    SnrMismatch { target: f64, achieved: f64 },
    #[error("signals are not the constituents of this mixture")]
    NotConstituents,
    #[error("noise must be at {NOISE_RATE} or {SPEECH_RATE} Hz, got {0} Hz")]
    UnsupportedRate(u32),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SnrMode {
    /// Scale the noise so that `10·log10(P_clean / P_noise)` equals the value.
    TargetDb(f64),
    /// Add the noise segment as recorded.
    RawAdd,
}

impl fmt::Display for SnrMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnrMode::TargetDb(db) => write!(f, "{db}"),
            SnrMode::RawAdd => f.write_str("raw"),
        }
    }
}

impl std::str::FromStr for SnrMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("raw") || s.eq_ignore_ascii_case("raw_add") {
            return Ok(SnrMode::RawAdd);
        }
        let db: f64 = s
            .trim_end_matches("dB")
            .trim_end_matches("db")
            .trim()
            .parse()
            .map_err(|_| format!("bad SNR `{s}` (expected dB value or `raw`)"))?;
        if db.is_finite() {
            Ok(SnrMode::TargetDb(db))
        } else {
            Err(format!("SNR must be finite, got {s}"))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnrSpec {
    pub mode: SnrMode,
    /// Combined with the utterance id to pick the noise segment.
    pub segment_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedUtterance<T> {
    /// Clean metadata with the mixed samples.
    pub utterance: Utterance<T>,
    pub noise_kind: NoiseKind,
    pub mode: SnrMode,
    /// `10·log10(P_clean / P_scaled_noise)`, before the clip guard.
    pub achieved_snr: f64,
    /// Factor applied to the noise segment.
    pub noise_gain: T,
    /// Start of the noise segment within the recording.
    pub segment_offset: usize,
    /// `noise_gain · segment`, the noise actually added.
    pub scaled_noise: Vec<T>,
    /// `1/peak` when the mixture had to be rescaled, else 1.
    pub clip_gain: T,
}

/// Mean square `(1/N)·Σ s²`.
pub fn measure_power<T: Scalar>(samples: &[T]) -> Result<T, MixError> {
    if samples.is_empty() {
        return Err(MixError::Empty);
    }
    let sum = samples.iter().fold(T::zero(), |a, &s| a + s * s);
    Ok(sum / T::from_usize_lossy(samples.len()))
}

/// `sqrt(P_clean / (P_noise · 10^(snr/10)))`.
pub fn noise_gain<T: Scalar>(p_clean: T, p_noise: T, snr_db: f64) -> Result<T, MixError> {
    if !snr_db.is_finite() {
        return Err(MixError::InvalidTarget(snr_db));
    }
    if p_clean <= T::zero() {
        return Err(MixError::UndefinedSnr("clean"));
    }
    if p_noise <= T::zero() {
        return Err(MixError::UndefinedSnr("noise"));
    }
    Ok((p_clean / (p_noise * T::lit(10f64.powf(snr_db / 10.0)))).sqrt())
}

fn snr_db<T: Scalar>(p_clean: T, p_noise: T) -> f64 {
    if p_noise <= T::zero() {
        f64::INFINITY
    } else {
        10.0 * (p_clean / p_noise).to_f64_lossy().log10()
    }
}

/// Brings a noise recording to the speech rate (48 kHz is decimated by 3).
pub fn noise_at_speech_rate<T: Scalar>(noise: NoiseRecording<T>) -> Result<NoiseRecording<T>, MixError> {
    match noise.sample_rate {
        SPEECH_RATE => Ok(noise),
        NOISE_RATE => Ok(NoiseRecording {
            kind: noise.kind,
            samples: resample_48k_to_16k(&noise.samples)?,
            sample_rate: SPEECH_RATE,
        }),
        other => Err(MixError::UnsupportedRate(other)),
    }
}

/// Adds a seeded, equal-length stretch of `noise` to `clean`. If the sum
/// peaks above 1 the whole mixture is scaled down to peak 1.
pub fn mix<T: Scalar>(
    clean: &Utterance<T>,
    noise: &NoiseRecording<T>,
    spec: &SnrSpec,
) -> Result<MixedUtterance<T>, MixError> {
    if clean.sample_rate != noise.sample_rate {
        return Err(MixError::RateMismatch {
            speech: clean.sample_rate,
            noise: noise.sample_rate,
        });
    }
    let n = clean.samples.len();
    if noise.samples.len() < n {
        return Err(MixError::NoiseTooShort {
            noise: noise.samples.len(),
            clean: n,
        });
    }
    let p_clean = measure_power(&clean.samples)?;
    let mut rng = seed::rng(seed::derive(spec.segment_seed, &["segment", noise.kind.name(), &clean.id]));
    let offset = rng.gen_range(0..=noise.samples.len() - n);
    let segment = &noise.samples[offset..offset + n];
    let p_segment = measure_power(segment)?;
    let gain = match spec.mode {
        SnrMode::TargetDb(db) => noise_gain(p_clean, p_segment, db)?,
        SnrMode::RawAdd => T::one(),
    };
    let scaled_noise: Vec<T> = segment.iter().map(|&s| gain * s).collect();
    let mut samples: Vec<T> = clean.samples.iter().zip(&scaled_noise).map(|(&c, &v)| c + v).collect();
    let peak = samples.iter().fold(T::zero(), |m, s| m.max(s.abs()));
    let clip_gain = if peak > T::one() {
        let g = T::one() / peak;
        samples.iter_mut().for_each(|s| *s = (*s * g).max(-T::one()).min(T::one()));
        g
    } else {
        T::one()
    };
    let achieved_snr = snr_db(p_clean, measure_power(&scaled_noise)?);
    Ok(MixedUtterance {
        utterance: Utterance {
            id: clean.id.clone(),
            speaker: clean.speaker.clone(),
            label: clean.label,
            samples,
            sample_rate: clean.sample_rate,
        },
        noise_kind: noise.kind,
        mode: spec.mode,
        achieved_snr,
        noise_gain: gain,
        segment_offset: offset,
        scaled_noise,
        clip_gain,
    })
}

/// Recomputes `10·log10(P_clean / P_scaled_noise)` from the constituents of
/// one [`mix`] call and checks it against the requested target. Returns
/// `+∞` when the noise is silent.
pub fn verify_snr<T: Scalar>(mixed: &MixedUtterance<T>, clean: &[T], scaled_noise: &[T]) -> Result<f64, MixError> {
    let n = mixed.utterance.samples.len();
    if clean.len() != n || scaled_noise.len() != n {
        return Err(MixError::NotConstituents);
    }
    let tol = T::epsilon().sqrt();
    let unclipped = T::one() / mixed.clip_gain;
    let consistent = mixed
        .utterance
        .samples
        .iter()
        .zip(clean.iter().zip(scaled_noise))
        .all(|(&m, (&c, &v))| (m * unclipped - (c + v)).abs() <= tol * (T::one() + unclipped));
    if !consistent {
        return Err(MixError::NotConstituents);
    }
    let snr = snr_db(measure_power(clean)?, measure_power(scaled_noise)?);
    if let SnrMode::TargetDb(target) = mixed.mode {
        if snr.is_finite() && (snr - target).abs() > SNR_TOLERANCE_DB {
            return Err(MixError::SnrMismatch { target, achieved: snr });
        }
    }
    Ok(snr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EmotionLabel;

    fn utt(samples: Vec<f64>) -> Utterance<f64> {
        Utterance::new("03a01Wa", "03", EmotionLabel::Anger, samples, 16000).unwrap()
    }

    fn rec(samples: Vec<f64>) -> NoiseRecording<f64> {
        NoiseRecording {
            kind: NoiseKind::Cafe,
            samples,
            sample_rate: 16000,
        }
    }

    #[test]
    fn power_examples() {
        assert_eq!(measure_power(&[0.5f64; 10]).unwrap(), 0.25);
        assert_eq!(measure_power(&[0.0f64; 10]).unwrap(), 0.0);
        let sine: Vec<f64> = (0..1600).map(|n| (2.0 * std::f64::consts::PI * n as f64 / 160.0).sin()).collect();
        assert!((measure_power(&sine).unwrap() - 0.5).abs() < 1e-9);
        assert!(matches!(measure_power::<f64>(&[]), Err(MixError::Empty)));
    }

    #[test]
    fn gain_formula() {
        assert!((noise_gain(0.3f64, 0.3, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((noise_gain(0.04f64, 0.01, 10.0).unwrap() - 0.4f64.sqrt()).abs() < 1e-15);
        assert!((noise_gain(0.04f64, 0.01, 10.0).unwrap() - 0.63246).abs() < 1e-5);
        assert!(matches!(noise_gain(0.0f64, 0.01, 10.0), Err(MixError::UndefinedSnr("clean"))));
    }

    #[test]
    fn silent_clean_input_is_rejected() {
        let spec = SnrSpec { mode: SnrMode::TargetDb(10.0), segment_seed: 1 };
        let r = mix(&utt(vec![0.0; 100]), &rec(vec![0.1; 200]), &spec);
        assert!(matches!(r, Err(MixError::UndefinedSnr("clean"))));
    }

    #[test]
    fn length_and_rate_preconditions() {
        let spec = SnrSpec { mode: SnrMode::RawAdd, segment_seed: 1 };
        assert!(matches!(mix(&utt(vec![0.1; 100]), &rec(vec![0.1; 99]), &spec), Err(MixError::NoiseTooShort { .. })));
        let mut r = rec(vec![0.1; 200]);
        r.sample_rate = 48000;
        assert!(matches!(mix(&utt(vec![0.1; 100]), &r, &spec), Err(MixError::RateMismatch { .. })));
    }

    #[test]
    fn raw_add_reports_the_native_ratio() {
        let clean: Vec<f64> = (0..100).map(|i| 0.2 * ((i as f64) * 0.3).sin()).collect();
        let noise: Vec<f64> = (0..300).map(|i| 0.05 * ((i as f64) * 1.7).cos()).collect();
        let spec = SnrSpec { mode: SnrMode::RawAdd, segment_seed: 9 };
        let m = mix(&utt(clean.clone()), &rec(noise.clone()), &spec).unwrap();
        assert_eq!(m.noise_gain, 1.0);
        let seg = &noise[m.segment_offset..m.segment_offset + 100];
        let expect = 10.0 * (measure_power(&clean).unwrap() / measure_power(seg).unwrap()).log10();
        assert!((verify_snr(&m, &clean, &m.scaled_noise).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn mixing_is_linear_and_deterministic() {
        let clean: Vec<f64> = (0..500).map(|i| 0.3 * ((i as f64) * 0.05).sin()).collect();
        let noise: Vec<f64> = (0..4000).map(|i| 0.2 * ((i * i) as f64 * 0.001).sin()).collect();
        let spec = SnrSpec { mode: SnrMode::TargetDb(0.0), segment_seed: 4 };
        let m = mix(&utt(clean.clone()), &rec(noise.clone()), &spec).unwrap();
        assert_eq!(m.clip_gain, 1.0);
        for ((&y, &c), &v) in m.utterance.samples.iter().zip(&clean).zip(&m.scaled_noise) {
            // one rounding in the sum, so equal up to the last bit
            assert!((y - v - c).abs() <= f64::EPSILON * (c.abs() + v.abs()));
        }
        assert_eq!(mix(&utt(clean.clone()), &rec(noise.clone()), &spec).unwrap(), m);
        let snr = verify_snr(&m, &clean, &m.scaled_noise).unwrap();
        assert!(snr.abs() < SNR_TOLERANCE_DB);
        let other = SnrSpec { segment_seed: 5, ..spec };
        assert_ne!(mix(&utt(clean), &rec(noise), &other).unwrap().segment_offset, m.segment_offset);
    }

    #[test]
    fn clip_guard_restores_unit_peak() {
        let clean = vec![0.9f64; 50];
        let noise = vec![0.9f64; 50];
        let spec = SnrSpec { mode: SnrMode::TargetDb(0.0), segment_seed: 0 };
        let m = mix(&utt(clean.clone()), &rec(noise), &spec).unwrap();
        assert!((m.clip_gain - 1.0 / 1.8).abs() < 1e-15);
        assert!(m.utterance.samples.iter().all(|s| s.abs() <= 1.0));
        assert!(verify_snr(&m, &clean, &m.scaled_noise).unwrap().abs() < 1e-12);
    }

    #[test]
    fn silent_noise_gives_infinite_snr_in_raw_mode() {
        let clean = vec![0.1f64; 20];
        let spec = SnrSpec { mode: SnrMode::RawAdd, segment_seed: 0 };
        let m = mix(&utt(clean.clone()), &rec(vec![0.0; 20]), &spec).unwrap();
        assert_eq!(verify_snr(&m, &clean, &m.scaled_noise).unwrap(), f64::INFINITY);
    }

    #[test]
    fn foreign_signals_are_rejected() {
        let clean = vec![0.1f64; 20];
        let spec = SnrSpec { mode: SnrMode::TargetDb(10.0), segment_seed: 0 };
        let m = mix(&utt(clean.clone()), &rec(vec![0.05; 40]), &spec).unwrap();
        assert!(matches!(verify_snr(&m, &clean, &[0.0; 20]), Err(MixError::NotConstituents)));
        let mut wrong = m.clone();
        wrong.mode = SnrMode::TargetDb(20.0);
        assert!(matches!(verify_snr(&wrong, &clean, &m.scaled_noise), Err(MixError::SnrMismatch { .. })));
    }

    #[test]
    fn snr_mode_parsing() {
        assert_eq!("10".parse::<SnrMode>().unwrap(), SnrMode::TargetDb(10.0));
        assert_eq!("0dB".parse::<SnrMode>().unwrap(), SnrMode::TargetDb(0.0));
        assert_eq!("raw".parse::<SnrMode>().unwrap(), SnrMode::RawAdd);
        assert!("inf".parse::<SnrMode>().is_err());
    }
}
