use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::cells::{CellKind, Pooling};
use crate::corpus::Condition;
use crate::dsp::{MfccConfig, Normalization};
use crate::mixer::SnrMode;
use crate::trainer::TrainConfig;

/// `1, 1e-1, …, 1e-9`.
pub const LEARNING_RATES: [f64; 10] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9];
pub const CELL_GRID: [usize; 6] = [1, 2, 4, 8, 16, 32];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    None,
    LearningRate,
    Cells,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "none" => Ok(SweepAxis::None),
            "learning_rate" | "lr" => Ok(SweepAxis::LearningRate),
            "cells" => Ok(SweepAxis::Cells),
            other => Err(format!("unknown sweep axis `{other}` (none|learning_rate|cells)")),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::None => "none",
            SweepAxis::LearningRate => "learning_rate",
            SweepAxis::Cells => "cells",
        })
    }
}

/// Everything one experiment run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    /// Required when any noisy condition is requested.
    pub noise_dir: Option<PathBuf>,
    /// Optional `id,label` CSV overriding file-name labels.
    pub labels: Option<PathBuf>,
    pub conditions: Vec<Condition>,
    pub snr: SnrMode,
    pub models: Vec<CellKind>,
    pub sweep: SweepAxis,
    pub train: TrainConfig<f64>,
    pub train_fraction: f64,
    /// Stratified subset of the corpus to use; `None` uses all of it.
    pub max_utterances: Option<usize>,
    pub normalize: Normalization,
    pub mfcc: MfccConfig,
    pub bench_repeats: usize,
    pub output: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus: PathBuf::from("emodb/wav"),
            noise_dir: None,
            labels: None,
            conditions: vec![Condition::Clean],
            snr: SnrMode::TargetDb(10.0),
            models: vec![CellKind::Lstm, CellKind::Gru],
            sweep: SweepAxis::None,
            train: TrainConfig::default(),
            train_fraction: 0.75,
            max_utterances: None,
            normalize: Normalization::Global,
            mfcc: MfccConfig::default(),
            bench_repeats: 5,
            output: PathBuf::from("results"),
            seed: 0,
        }
    }
}

fn list<T>(v: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        Err("empty list".into())
    } else {
        Ok(items)
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("`{key}`: cannot parse `{v}`"))
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let v = value.trim();
        let r: Result<(), String> = (|| {
            match key.trim() {
                "corpus" => self.corpus = PathBuf::from(v),
                "noise_dir" => self.noise_dir = (!v.is_empty() && v != "none").then(|| PathBuf::from(v)),
                "labels" => self.labels = (!v.is_empty() && v != "none").then(|| PathBuf::from(v)),
                "noise" => {
                    self.conditions = if v == "all" {
                        Condition::all()
                    } else {
                        list(v, |s| s.parse::<Condition>().map_err(|e| e.to_string()))?
                    }
                }
                "snr" => self.snr = v.parse()?,
                "models" => self.models = list(v, |s| s.parse::<CellKind>())?,
                "sweep" => self.sweep = v.parse()?,
                "learning_rate" => self.train.learning_rate = num(key, v)?,
                "use_bias" => self.train.use_bias = num(key, v)?,
                "cells" => self.train.hidden_cells = num(key, v)?,
                "epochs" => self.train.epochs = num(key, v)?,
                "clip_norm" => self.train.clip_norm = if v == "none" { None } else { Some(num(key, v)?) },
                "readout" => self.train.readout = v.parse::<Pooling>()?,
                "peepholes" => self.train.peepholes = num(key, v)?,
                "train_fraction" => self.train_fraction = num(key, v)?,
                "max_utterances" => self.max_utterances = if v == "all" { None } else { Some(num(key, v)?) },
                "normalize" => self.normalize = v.parse()?,
                "bench_repeats" => self.bench_repeats = num(key, v)?,
                "output" => self.output = PathBuf::from(v),
                "seed" => self.seed = num(key, v)?,
                "frame_len" => self.mfcc.frame_len = num(key, v)?,
                "hop" => self.mfcc.hop = num(key, v)?,
                "n_mels" => self.mfcc.n_mels = num(key, v)?,
                other => return Err(format!("unknown key `{other}`")),
            }
            Ok(())
        })();
        r.map_err(HarnessError::Config)
    }

    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// resolved against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(k, v)
                .map_err(|e| HarnessError::Config(format!("line {}: {}", n + 1, e.to_string().trim_start_matches("config: "))))?;
        }
        if let Some(base) = base {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            fix(&mut cfg.corpus);
            fix(&mut cfg.output);
            if let Some(p) = cfg.noise_dir.as_mut() {
                fix(p);
            }
            if let Some(p) = cfg.labels.as_mut() {
                fix(p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    /// Canonical `key = value` text; parses back to the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("none".to_string(), |p| p.display().to_string());
        let names = |v: Vec<String>| v.join(",");
        let _ = writeln!(s, "corpus = {}", self.corpus.display());
        let _ = writeln!(s, "noise_dir = {}", path(&self.noise_dir));
        let _ = writeln!(s, "labels = {}", path(&self.labels));
        let _ = writeln!(s, "noise = {}", names(self.conditions.iter().map(|c| c.to_string()).collect()));
        let _ = writeln!(s, "snr = {}", self.snr);
        let _ = writeln!(s, "models = {}", names(self.models.iter().map(|m| m.to_string()).collect()));
        let _ = writeln!(s, "sweep = {}", self.sweep);
        let _ = writeln!(s, "learning_rate = {}", self.train.learning_rate);
        let _ = writeln!(s, "use_bias = {}", self.train.use_bias);
        let _ = writeln!(s, "cells = {}", self.train.hidden_cells);
        let _ = writeln!(s, "epochs = {}", self.train.epochs);
        let _ = writeln!(s, "clip_norm = {}", self.train.clip_norm.map_or("none".into(), |c| c.to_string()));
        let _ = writeln!(s, "readout = {}", self.train.readout);
        let _ = writeln!(s, "peepholes = {}", self.train.peepholes);
        let _ = writeln!(s, "train_fraction = {}", self.train_fraction);
        let _ = writeln!(s, "max_utterances = {}", self.max_utterances.map_or("all".into(), |n| n.to_string()));
        let _ = writeln!(s, "normalize = {}", self.normalize);
        let _ = writeln!(s, "bench_repeats = {}", self.bench_repeats);
        let _ = writeln!(s, "output = {}", self.output.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "frame_len = {}", self.mfcc.frame_len);
        let _ = writeln!(s, "hop = {}", self.mfcc.hop);
        let _ = writeln!(s, "n_mels = {}", self.mfcc.n_mels);
        s
    }

    /// Checks values; does not touch the filesystem.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.models.is_empty() {
            return bad("at least one model kind is required".into());
        }
        if self.conditions.is_empty() {
            return bad("at least one noise condition is required".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if self.max_utterances == Some(0) {
            return bad("max_utterances must be positive".into());
        }
        if let SnrMode::TargetDb(db) = self.snr {
            if !db.is_finite() {
                return bad(format!("snr must be finite, got {db}"));
            }
        }
        let needs_noise = self.conditions.iter().any(|c| *c != Condition::Clean);
        if needs_noise && self.noise_dir.is_none() {
            return bad("noise_dir is required for noisy conditions".into());
        }
        self.train.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.mfcc.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }
}
