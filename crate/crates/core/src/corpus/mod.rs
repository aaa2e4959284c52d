//! Clean speech and environmental noise on disk: WAV decoding, EMO-DB
//! label decoding, manifests and the stratified train/validation split.

mod manifest;
mod wav;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::Scalar;

pub use manifest::{
    build_manifest, build_manifest_with_labels, class_counts, count_warnings, read_label_overrides,
    read_manifest, stratified_split, stratified_subset, write_manifest, Manifest, ManifestEntry,
};
pub use wav::{load_wav, write_wav};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed WAV: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{path}: unsupported WAV: {msg}")]
    Unsupported { path: PathBuf, msg: String },
    #[error("cannot decode an emotion label from `{0}`")]
    LabelDecode(String),
    #[error("no WAV files in {0}")]
    EmptyCorpus(PathBuf),
    #[error("stratification: {0}")]
    Stratification(String),
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),
    #[error("unknown noise kind `{0}` (expected traffic|cafe|living|park|washing|car|office|river|none)")]
    UnknownNoise(String),
    #[error("no recording for noise `{kind}` under {dir}")]
    MissingNoise { kind: NoiseKind, dir: PathBuf },
    #[error("invalid utterance {id}: {msg}")]
    InvalidUtterance { id: String, msg: String },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// The seven EMO-DB emotion categories, in class-index order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmotionLabel {
    Anger,
    Boredom,
    Disgust,
    Fear,
    Joy,
    Neutral,
    Sadness,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 7] = [
        EmotionLabel::Anger,
        EmotionLabel::Boredom,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Joy,
        EmotionLabel::Neutral,
        EmotionLabel::Sadness,
    ];

    /// Utterances per class in the full corpus; sums to 535.
    pub const REFERENCE_COUNTS: [usize; 7] = [127, 81, 46, 69, 71, 79, 62];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "anger",
            EmotionLabel::Boredom => "boredom",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Joy => "joy",
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Sadness => "sadness",
        }
    }

    /// German initial used in EMO-DB file names.
    pub fn emodb_letter(self) -> char {
        match self {
            EmotionLabel::Anger => 'W',
            EmotionLabel::Boredom => 'L',
            EmotionLabel::Disgust => 'E',
            EmotionLabel::Fear => 'A',
            EmotionLabel::Joy => 'F',
            EmotionLabel::Neutral => 'N',
            EmotionLabel::Sadness => 'T',
        }
    }

    pub fn from_emodb_letter(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.emodb_letter() == c)
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or(CorpusError::LabelDecode(s))
    }
}

/// Decodes the emotion from an EMO-DB file name such as `03a01Wa.wav`:
/// two speaker digits, a three-character text code, the emotion letter,
/// then a version letter.
pub fn decode_emodb_label(filename: &str) -> Result<EmotionLabel, CorpusError> {
    let stem = Path::new(filename)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(filename);
    let chars: Vec<char> = stem.chars().collect();
    if chars.len() != 7 || !chars[..2].iter().all(char::is_ascii_digit) {
        return Err(CorpusError::LabelDecode(filename.to_string()));
    }
    EmotionLabel::from_emodb_letter(chars[5]).ok_or_else(|| CorpusError::LabelDecode(filename.to_string()))
}

/// A labeled mono recording.
#[derive(Clone, Debug, PartialEq)]
pub struct Utterance<T> {
    pub id: String,
    pub speaker: String,
    pub label: EmotionLabel,
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Scalar> Utterance<T> {
    /// Checks that samples are nonempty and lie in `[-1, 1]`.
    pub fn new(
        id: impl Into<String>,
        speaker: impl Into<String>,
        label: EmotionLabel,
        samples: Vec<T>,
        sample_rate: u32,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        let bad = |msg: &str| CorpusError::InvalidUtterance {
            id: id.clone(),
            msg: msg.to_string(),
        };
        if samples.is_empty() {
            return Err(bad("no samples"));
        }
        if sample_rate == 0 {
            return Err(bad("zero sample rate"));
        }
        if samples.iter().any(|s| s.is_nan() || s.abs() > T::one()) {
            return Err(bad("sample outside [-1, 1]"));
        }
        Ok(Self {
            speaker: speaker.into(),
            id,
            label,
            samples,
            sample_rate,
        })
    }

    /// Loads the WAV behind a manifest entry.
    pub fn load(entry: &ManifestEntry) -> Result<Self, CorpusError> {
        let (samples, rate) = load_wav(&entry.path)?;
        Self::new(entry.id.clone(), entry.speaker.clone(), entry.label, samples, rate)
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// The eight environmental noise types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoiseKind {
    Traffic,
    Cafe,
    Living,
    Park,
    Washing,
    Car,
    Office,
    River,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 8] = [
        NoiseKind::Traffic,
        NoiseKind::Cafe,
        NoiseKind::Living,
        NoiseKind::Park,
        NoiseKind::Washing,
        NoiseKind::Car,
        NoiseKind::Office,
        NoiseKind::River,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Traffic => "traffic",
            NoiseKind::Cafe => "cafe",
            NoiseKind::Living => "living",
            NoiseKind::Park => "park",
            NoiseKind::Washing => "washing",
            NoiseKind::Car => "car",
            NoiseKind::Office => "office",
            NoiseKind::River => "river",
        }
    }

    /// DEMAND environment directory holding this noise.
    pub fn demand_dir(self) -> &'static str {
        match self {
            NoiseKind::Traffic => "STRAFFIC",
            NoiseKind::Cafe => "PCAFETER",
            NoiseKind::Living => "DLIVING",
            NoiseKind::Park => "NPARK",
            NoiseKind::Washing => "DWASHING",
            NoiseKind::Car => "TCAR",
            NoiseKind::Office => "OOFFICE",
            NoiseKind::River => "NRIVER",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or(CorpusError::UnknownNoise(s))
    }
}

/// A noise kind or the clean (`none`) condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Clean,
    Noisy(NoiseKind),
}

impl Condition {
    /// `none` followed by the eight noise kinds.
    pub fn all() -> Vec<Condition> {
        std::iter::once(Condition::Clean)
            .chain(NoiseKind::ALL.into_iter().map(Condition::Noisy))
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Condition::Clean => "none",
            Condition::Noisy(k) => k.name(),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("none") {
            Ok(Condition::Clean)
        } else {
            s.parse().map(Condition::Noisy)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRecording<T> {
    pub kind: NoiseKind,
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Scalar> NoiseRecording<T> {
    /// Finds the recording for `kind` under `dir`, either in DEMAND layout
    /// (`STRAFFIC/ch01.wav`) or flat (`traffic.wav`). Multi-channel files
    /// contribute channel 0.
    pub fn load(dir: &Path, kind: NoiseKind) -> Result<Self, CorpusError> {
        let candidates = [
            dir.join(kind.demand_dir()).join("ch01.wav"),
            dir.join(format!("{}.wav", kind.name())),
        ];
        let path = candidates
            .iter()
            .find(|p| p.is_file())
            .ok_or_else(|| CorpusError::MissingNoise {
                kind,
                dir: dir.to_path_buf(),
            })?;
        let (samples, sample_rate) = load_wav(path)?;
        Ok(Self {
            kind,
            samples,
            sample_rate,
        })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}
