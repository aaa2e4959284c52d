//! Stand-in corpora for machines without EMO-DB or DEMAND: class-separated
//! tone utterances under EMO-DB file names, and 48 kHz colored noise under
//! the eight noise names.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{build_manifest, write_wav, CorpusError, EmotionLabel, Manifest, NoiseKind};
use crate::dsp::{NOISE_RATE, SPEECH_RATE};
use crate::seed;

const SPEAKERS: [&str; 10] = ["03", "08", "09", "10", "11", "12", "13", "14", "15", "16"];
const TEXTS: [&str; 10] = ["a01", "a02", "a04", "a05", "a07", "b01", "b02", "b03", "b09", "b10"];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    /// Utterances per class; `None` follows the reference inventory.
    pub per_class: Option<usize>,
    pub seed: u64,
    pub min_secs: f64,
    pub max_secs: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            per_class: Some(20),
            seed: 0,
            min_secs: 0.6,
            max_secs: 1.2,
        }
    }
}

/// EMO-DB style name for the `i`-th synthetic utterance of `label`.
pub fn utterance_id(label: EmotionLabel, i: usize) -> String {
    let speaker = SPEAKERS[i % SPEAKERS.len()];
    let text = TEXTS[(i / SPEAKERS.len()) % TEXTS.len()];
    let version = (b'a' + (i / (SPEAKERS.len() * TEXTS.len())) as u8) as char;
    format!("{speaker}{text}{}{version}", label.emodb_letter())
}

/// A harmonic tone with a class-specific pitch and a resonance ("formant")
/// that shapes the spectral envelope, plus tremolo, per-utterance jitter
/// and a little white noise. The envelope is what MFCCs see. Peak ≤ 0.6.
pub fn utterance_signal(label: EmotionLabel, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let c = label.index() as f64;
    let f0 = 120.0 * 1.2f64.powf(c) * rng.gen_range(0.95..1.05);
    let formant = 350.0 * 1.4f64.powf(c) * rng.gen_range(0.95..1.05);
    let trem = 2.0 + 1.5 * c;
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let sr = f64::from(SPEECH_RATE);
    let harmonics: Vec<(f64, f64)> = (1..)
        .map(f64::from)
        .take_while(|h| h * f0 < 0.45 * sr)
        .map(|h| {
            let z = (h * f0 - formant) / (0.3 * formant);
            (h, (0.05 + (-0.5 * z * z).exp()) / h.sqrt())
        })
        .collect();
    let norm: f64 = harmonics.iter().map(|(_, a)| a).sum();
    (0..n)
        .map(|t| {
            let t = t as f64 / sr;
            let env = 0.7 + 0.3 * (std::f64::consts::TAU * trem * t).sin();
            let tone: f64 = harmonics
                .iter()
                .map(|&(h, a)| a * (std::f64::consts::TAU * h * f0 * t + phase * h).sin())
                .sum();
            let hiss: f64 = StandardNormal.sample(rng);
            (0.5 * env * tone / norm + 0.01 * hiss).clamp(-0.6, 0.6)
        })
        .collect()
}

/// Writes the synthetic corpus into `dir` and returns its manifest.
pub fn write_corpus(dir: &Path, config: &SynthConfig) -> Result<Manifest, CorpusError> {
    std::fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
    for label in EmotionLabel::ALL {
        let count = config.per_class.unwrap_or(EmotionLabel::REFERENCE_COUNTS[label.index()]);
        for i in 0..count {
            let id = utterance_id(label, i);
            let mut rng = seed::rng(seed::derive(config.seed, &["synth-utterance", &id]));
            let secs = rng.gen_range(config.min_secs..=config.max_secs);
            let n = (secs * f64::from(SPEECH_RATE)) as usize;
            let x = utterance_signal(label, n, &mut rng);
            write_wav(&dir.join(format!("{id}.wav")), &x, SPEECH_RATE)?;
        }
    }
    build_manifest(dir)
}

/// Gaussian noise through a kind-specific one-pole low-pass, plus a hum
/// for the engine-like kinds; scaled to RMS 0.1.
pub fn noise_signal(kind: NoiseKind, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let (pole, hum_hz) = match kind {
        NoiseKind::Traffic => (0.97, Some(90.0)),
        NoiseKind::Cafe => (0.6, None),
        NoiseKind::Living => (0.85, None),
        NoiseKind::Park => (0.3, None),
        NoiseKind::Washing => (0.9, Some(50.0)),
        NoiseKind::Car => (0.99, Some(35.0)),
        NoiseKind::Office => (0.75, Some(120.0)),
        NoiseKind::River => (0.0, None),
    };
    let sr = f64::from(NOISE_RATE);
    let mut y = 0.0;
    let mut out: Vec<f64> = (0..n)
        .map(|t| {
            let w: f64 = StandardNormal.sample(rng);
            y = pole * y + (1.0 - pole) * w;
            let hum = hum_hz.map_or(0.0, |f| 0.3 * (std::f64::consts::TAU * f * t as f64 / sr).sin());
            y + hum * (1.0 - pole).sqrt()
        })
        .collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v = (*v * 0.1 / rms).clamp(-0.99, 0.99));
    }
    out
}

/// Writes `<kind>.wav` at 48 kHz for each kind.
pub fn write_noise(dir: &Path, kinds: &[NoiseKind], secs: f64, seed_base: u64) -> Result<(), CorpusError> {
    std::fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
    let n = (secs * f64::from(NOISE_RATE)) as usize;
    for &kind in kinds {
        let mut rng = seed::rng(seed::derive(seed_base, &["synth-noise", kind.name()]));
        let x = noise_signal(kind, n, &mut rng);
        write_wav(&dir.join(format!("{}.wav", kind.name())), &x, NOISE_RATE)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{decode_emodb_label, NoiseRecording};
    use std::collections::HashSet;

    #[test]
    fn ids_decode_and_are_unique() {
        let mut seen = HashSet::new();
        for label in EmotionLabel::ALL {
            for i in 0..127 {
                let id = utterance_id(label, i);
                assert_eq!(decode_emodb_label(&id).unwrap(), label);
                assert!(seen.insert(id));
            }
        }
    }

    #[test]
    fn corpus_and_noise_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig { per_class: Some(2), ..Default::default() };
        let m = write_corpus(&dir.path().join("speech"), &cfg).unwrap();
        assert_eq!(m.len(), 14);
        write_noise(&dir.path().join("noise"), &[NoiseKind::Car], 0.5, 1).unwrap();
        let r = NoiseRecording::<f64>::load(&dir.path().join("noise"), NoiseKind::Car).unwrap();
        assert_eq!((r.samples.len(), r.sample_rate), (24_000, 48_000));
    }
}
