//! Corpus manifests and the stratified split.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use super::{decode_emodb_label, CorpusError, EmotionLabel};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub label: EmotionLabel,
    pub speaker: String,
}

/// Utterances of one corpus or split. Entries are kept sorted by id.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Seed of the split that produced this manifest, if any.
    pub split_seed: Option<u64>,
}

impl Manifest {
    /// Sorts by id and rejects duplicates.
    pub fn new(mut entries: Vec<ManifestEntry>) -> Result<Self, CorpusError> {
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = entries.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(CorpusError::DuplicateId(w[0].id.clone()));
        }
        Ok(Self {
            entries,
            split_seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }
}

/// Per-class utterance counts in class-index order.
pub fn class_counts(manifest: &Manifest) -> [usize; 7] {
    let mut counts = [0; 7];
    for e in &manifest.entries {
        counts[e.label.index()] += 1;
    }
    counts
}

/// One message per class whose count differs from the reference inventory.
pub fn count_warnings(manifest: &Manifest) -> Vec<String> {
    let counts = class_counts(manifest);
    EmotionLabel::ALL
        .iter()
        .zip(counts.iter().zip(EmotionLabel::REFERENCE_COUNTS))
        .filter(|(_, (&got, want))| got != *want)
        .map(|(l, (got, want))| format!("{l}: {got} utterances, reference inventory has {want}"))
        .collect()
}

/// One entry per `*.wav` in `dir`, labels decoded from EMO-DB file names.
pub fn build_manifest(dir: &Path) -> Result<Manifest, CorpusError> {
    build_manifest_with_labels(dir, &HashMap::new())
}

/// Like [`build_manifest`], but ids present in `overrides` take their label
/// from there instead of the file name.
pub fn build_manifest_with_labels(
    dir: &Path,
    overrides: &HashMap<String, EmotionLabel>,
) -> Result<Manifest, CorpusError> {
    let listing = std::fs::read_dir(dir).map_err(|e| CorpusError::io(dir, e))?;
    let mut entries = Vec::new();
    for item in listing {
        let path = item.map_err(|e| CorpusError::io(dir, e))?.path();
        let is_wav = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if !is_wav || !path.is_file() {
            continue;
        }
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CorpusError::LabelDecode(path.display().to_string()))?
            .to_string();
        let label = match overrides.get(&id) {
            Some(&l) => l,
            None => decode_emodb_label(&id)?,
        };
        let speaker: String = id.chars().take(2).collect();
        entries.push(ManifestEntry {
            id,
            path,
            label,
            speaker,
        });
    }
    if entries.is_empty() {
        return Err(CorpusError::EmptyCorpus(dir.to_path_buf()));
    }
    let manifest = Manifest::new(entries)?;
    log::info!("{} utterances, per class {:?}", manifest.len(), class_counts(&manifest));
    for w in count_warnings(&manifest) {
        log::warn!("{w}");
    }
    Ok(manifest)
}

/// Reads an `id,label` CSV of label overrides.
pub fn read_label_overrides(path: &Path) -> Result<HashMap<String, EmotionLabel>, CorpusError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CorpusError::Manifest(e.to_string()))?;
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CorpusError::Manifest(e.to_string()))?;
        let (Some(id), Some(label)) = (rec.get(0), rec.get(1)) else {
            return Err(CorpusError::Manifest("label override rows need `id,label`".into()));
        };
        out.insert(id.trim().to_string(), label.parse()?);
    }
    Ok(out)
}

/// Shuffles each class with a seeded generator and sends
/// `ceil(train_fraction · n)` of its members to the training side.
pub fn stratified_split(
    manifest: &Manifest,
    train_fraction: f64,
    split_seed: u64,
) -> Result<(Manifest, Manifest), CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(train_fraction));
    }
    if manifest.is_empty() {
        return Err(CorpusError::Stratification("manifest has no entries".into()));
    }
    let mut by_class: BTreeMap<EmotionLabel, Vec<&ManifestEntry>> = BTreeMap::new();
    for e in &manifest.entries {
        by_class.entry(e.label).or_default().push(e);
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (label, mut members) in by_class {
        let mut rng = seed::rng(seed::derive(split_seed, &["split", label.name()]));
        members.shuffle(&mut rng);
        // the slack keeps products like 0.7 · 10 = 7.000000000000001 at 7
        let n_train = ((train_fraction * members.len() as f64) - 1e-9).ceil() as usize;
        let (a, b) = members.split_at(n_train.min(members.len()));
        train.extend(a.iter().map(|&e| e.clone()));
        val.extend(b.iter().map(|&e| e.clone()));
    }
    let mut train = Manifest::new(train)?;
    let mut val = Manifest::new(val)?;
    train.split_seed = Some(split_seed);
    val.split_seed = Some(split_seed);
    Ok((train, val))
}

/// Exactly `size` entries with class proportions kept as close as integer
/// counts allow: each class gets the floor of its proportional share, and
/// leftover slots go to the largest remainders (ties to the earlier class).
pub fn stratified_subset(manifest: &Manifest, size: usize, seed: u64) -> Result<Manifest, CorpusError> {
    if manifest.is_empty() || size == 0 {
        return Err(CorpusError::Stratification("subset needs entries and a positive size".into()));
    }
    if size >= manifest.len() {
        return Manifest::new(manifest.entries.clone());
    }
    let mut by_class: BTreeMap<EmotionLabel, Vec<&ManifestEntry>> = BTreeMap::new();
    for e in &manifest.entries {
        by_class.entry(e.label).or_default().push(e);
    }
    let total = manifest.len();
    let mut quotas: Vec<(usize, usize)> = by_class
        .values()
        .map(|m| (size * m.len() / total, size * m.len() % total))
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.0).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].1.cmp(&quotas[a].1).then(a.cmp(&b)));
    for &i in order.iter().take(size - assigned) {
        quotas[i].0 += 1;
    }
    let mut out = Vec::with_capacity(size);
    for ((label, mut members), (quota, _)) in by_class.into_iter().zip(quotas) {
        let mut rng = seed::rng(seed::derive(seed, &["subset", label.name()]));
        members.shuffle(&mut rng);
        out.extend(members.into_iter().take(quota).cloned());
    }
    Manifest::new(out)
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<(), CorpusError> {
    let merr = |e: csv::Error| CorpusError::Manifest(e.to_string());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(merr)?;
    w.write_record(["id", "path", "label", "speaker"]).map_err(merr)?;
    for e in &manifest.entries {
        let p = e.path.to_string_lossy();
        w.write_record([e.id.as_str(), p.as_ref(), e.label.name(), e.speaker.as_str()])
            .map_err(merr)?;
    }
    w.flush().map_err(|e| CorpusError::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest, CorpusError> {
    let merr = |e: csv::Error| CorpusError::Manifest(e.to_string());
    let mut rdr = csv::Reader::from_path(path).map_err(merr)?;
    let header = rdr.headers().map_err(merr)?.clone();
    if header.iter().collect::<Vec<_>>() != ["id", "path", "label", "speaker"] {
        return Err(CorpusError::Manifest(format!(
            "expected header id,path,label,speaker in {}",
            path.display()
        )));
    }
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(merr)?;
        let id = rec[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId(id));
        }
        entries.push(ManifestEntry {
            id,
            path: PathBuf::from(&rec[1]),
            label: rec[2].parse()?,
            speaker: rec[3].to_string(),
        });
    }
    Manifest::new(entries)
}
