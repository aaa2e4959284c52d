use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::{DspError, MfccConfig};
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// MFCC frames of one utterance, `T × 13`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence<T> {
    pub frames: Matrix<T>,
    pub utterance_id: String,
}

impl<T: Scalar> FeatureSequence<T> {
    pub fn new(frames: Matrix<T>, utterance_id: impl Into<String>) -> Result<Self, DspError> {
        let utterance_id = utterance_id.into();
        if frames.rows() == 0 {
            return Err(DspError::Features(format!("{utterance_id}: no frames")));
        }
        if !frames.is_finite() {
            return Err(DspError::Features(format!("{utterance_id}: non-finite coefficient")));
        }
        Ok(Self { frames, utterance_id })
    }

    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn width(&self) -> usize {
        self.frames.cols()
    }

    /// Standardizes every coefficient over time. Constant columns become 0.
    pub fn z_score(&mut self) {
        let (rows, cols) = self.frames.shape();
        let n = T::from_usize_lossy(rows);
        for c in 0..cols {
            let mean = (0..rows).fold(T::zero(), |a, r| a + self.frames[(r, c)]) / n;
            let var = (0..rows).fold(T::zero(), |a, r| {
                let d = self.frames[(r, c)] - mean;
                a + d * d
            }) / n;
            let sd = var.sqrt();
            for r in 0..rows {
                let v = self.frames[(r, c)] - mean;
                self.frames[(r, c)] = if sd > T::zero() { v / sd } else { T::zero() };
            }
        }
    }
}

/// How MFCC coefficients are standardized before training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Normalization {
    None,
    /// Each utterance on its own statistics (cepstral mean and variance
    /// normalization). Removes any stationary spectral envelope.
    Utterance,
    /// Per-coefficient statistics fitted on the training set, applied to
    /// every split.
    #[default]
    Global,
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Normalization::None => "none",
            Normalization::Utterance => "utterance",
            Normalization::Global => "global",
        })
    }
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Normalization::None),
            "utterance" => Ok(Normalization::Utterance),
            "global" => Ok(Normalization::Global),
            other => Err(format!("unknown normalization `{other}` (expected none|utterance|global)")),
        }
    }
}

/// Per-coefficient mean and standard deviation over every frame of a set
/// of sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStats<T> {
    pub mean: Vec<T>,
    pub sd: Vec<T>,
}

impl<T: Scalar> FeatureStats<T> {
    pub fn fit<'a>(seqs: impl IntoIterator<Item = &'a FeatureSequence<T>>) -> Result<Self, DspError> {
        let seqs: Vec<_> = seqs.into_iter().collect();
        let width = seqs.first().map(|s| s.width()).ok_or_else(|| DspError::Features("no sequences to fit".into()))?;
        if let Some(s) = seqs.iter().find(|s| s.width() != width) {
            return Err(DspError::Features(format!("{}: width {} differs from {width}", s.utterance_id, s.width())));
        }
        let n = T::from_usize_lossy(seqs.iter().map(|s| s.len()).sum());
        let mut mean = vec![T::zero(); width];
        for s in &seqs {
            for r in 0..s.len() {
                mean.iter_mut().zip(s.frames.row(r)).for_each(|(m, &v)| *m += v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![T::zero(); width];
        for s in &seqs {
            for r in 0..s.len() {
                for ((a, &v), &m) in var.iter_mut().zip(s.frames.row(r)).zip(&mean) {
                    *a += (v - m) * (v - m);
                }
            }
        }
        let sd = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Ok(Self { mean, sd })
    }

    /// `(x - mean) / sd`, with constant coefficients mapped to 0.
    pub fn apply(&self, seq: &mut FeatureSequence<T>) -> Result<(), DspError> {
        if seq.width() != self.mean.len() {
            return Err(DspError::Features(format!(
                "{}: width {} differs from fitted {}",
                seq.utterance_id,
                seq.width(),
                self.mean.len()
            )));
        }
        let cols = seq.width();
        for (i, v) in seq.frames.as_mut_slice().iter_mut().enumerate() {
            let c = i % cols;
            *v = if self.sd[c] > T::zero() { (*v - self.mean[c]) / self.sd[c] } else { T::zero() };
        }
        Ok(())
    }
}

/// CSV dump: a `# id=… T=… config=…` line, a `c0,…,c12` header, then one
/// row per frame.
pub fn write_features<T: Scalar>(seq: &FeatureSequence<T>, config: &MfccConfig, path: &Path) -> Result<(), DspError> {
    let io = |source| DspError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(w, "# id={} T={} config={:016x}", seq.utterance_id, seq.len(), config.hash()).map_err(io)?;
    let header: Vec<String> = (0..seq.width()).map(|c| format!("c{c}")).collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for t in 0..seq.len() {
        let row: Vec<String> = seq.frames.row(t).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a dump written by [`write_features`]; returns the sequence and
/// the config hash recorded with it.
pub fn read_features<T: Scalar + FromStr>(path: &Path) -> Result<(FeatureSequence<T>, u64), DspError> {
    let io = |source| DspError::Io {
        path: path.to_path_buf(),
        source,
    };
    let bad = |m: &str| DspError::Features(format!("{}: {m}", path.display()));
    let mut lines = BufReader::new(std::fs::File::open(path).map_err(io)?).lines();
    let meta = lines.next().transpose().map_err(io)?.ok_or_else(|| bad("empty file"))?;
    let mut id = None;
    let mut t_decl = None;
    let mut hash = None;
    for field in meta.trim_start_matches('#').split_whitespace() {
        match field.split_once('=') {
            Some(("id", v)) => id = Some(v.to_string()),
            Some(("T", v)) => t_decl = v.parse::<usize>().ok(),
            Some(("config", v)) => hash = u64::from_str_radix(v, 16).ok(),
            _ => {}
        }
    }
    let (Some(id), Some(t_decl), Some(hash)) = (id, t_decl, hash) else {
        return Err(bad("metadata line needs id, T and config"));
    };
    let header = lines.next().transpose().map_err(io)?.ok_or_else(|| bad("missing header"))?;
    let width = header.split(',').count();
    let mut data = Vec::with_capacity(t_decl * width);
    let mut rows = 0;
    for line in lines {
        let line = line.map_err(io)?;
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for v in line.split(',') {
            data.push(v.trim().parse::<T>().map_err(|_| bad(&format!("bad value `{v}`")))?);
        }
        if data.len() - before != width {
            return Err(bad("ragged row"));
        }
        rows += 1;
    }
    if rows != t_decl {
        return Err(bad(&format!("metadata says {t_decl} frames, found {rows}")));
    }
    let frames = Matrix::from_vec(rows, width, data).map_err(|e| bad(&e.to_string()))?;
    Ok((FeatureSequence::new(frames, id)?, hash))
}
