//! MFCC front-end and the 48 kHz → 16 kHz noise resampler.

mod features;
mod mfcc;
mod resample;

use thiserror::Error;

pub use features::{read_features, write_features, FeatureSequence, FeatureStats, Normalization};
pub use mfcc::{
    dct_ii, dct_iii, frame_count, frame_signal, hamming_window, mel, mel_filterbank, mel_inv, mfcc,
    power_spectrum, Mfcc, MfccConfig,
};
pub use resample::{resample_48k_to_16k, resampler_taps, RESAMPLER_CUTOFF_HZ, RESAMPLER_TAPS};

/// Sample rate every utterance is processed at.
pub const SPEECH_RATE: u32 = 16_000;
/// Sample rate of the DEMAND noise recordings.
pub const NOISE_RATE: u32 = 48_000;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("signal too short: need at least {needed} samples, got {found}")]
    TooShort { needed: usize, found: usize },
    #[error("size error: {0}")]
    Size(String),
    #[error("mel filterbank: {0}")]
    Filterbank(String),
    #[error("MFCC config: {0}")]
    Config(String),
    #[error("feature sequence: {0}")]
    Features(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}
