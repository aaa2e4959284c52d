use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::{worker_threads, ExperimentConfig, ExperimentResult, HarnessError, ResultRow, SweepAxis, CELL_GRID, LEARNING_RATES};
use crate::cells::CellKind;
use crate::corpus::{
    build_manifest_with_labels, read_label_overrides, stratified_split, stratified_subset, Condition, CorpusError, Manifest, NoiseRecording,
    Utterance,
};
use crate::dsp::{FeatureStats, Mfcc, Normalization, SPEECH_RATE};
use crate::mixer::{mix, noise_at_speech_rate, SnrSpec};
use crate::seed;
use crate::trainer::{benchmark, train, Sample, TrainConfig, TrainError, TrainReport};

/// The values one experiment cell overrides in the base training config.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub learning_rate: f64,
    pub use_bias: bool,
    pub cells: usize,
}

impl SweepPoint {
    fn slug(&self) -> String {
        format!("lr{:e}_bias{}_p{}", self.learning_rate, self.use_bias, self.cells)
    }

    fn apply(&self, base: &TrainConfig<f64>, seed: u64) -> TrainConfig<f64> {
        TrainConfig {
            learning_rate: self.learning_rate,
            use_bias: self.use_bias,
            hidden_cells: self.cells,
            seed,
            ..base.clone()
        }
    }
}

/// Grid for the config's sweep axis: the base point alone, 10 rates × 2
/// bias settings, or 6 sizes × 2 bias settings.
pub fn sweep_points(config: &ExperimentConfig) -> Vec<SweepPoint> {
    let base = SweepPoint {
        learning_rate: config.train.learning_rate,
        use_bias: config.train.use_bias,
        cells: config.train.hidden_cells,
    };
    match config.sweep {
        SweepAxis::None => vec![base],
        SweepAxis::LearningRate => [false, true]
            .into_iter()
            .flat_map(|b| LEARNING_RATES.iter().map(move |&lr| SweepPoint { learning_rate: lr, use_bias: b, ..base }))
            .collect(),
        SweepAxis::Cells => [false, true]
            .into_iter()
            .flat_map(|b| CELL_GRID.iter().map(move |&p| SweepPoint { cells: p, use_bias: b, ..base }))
            .collect(),
    }
}

/// Features of every utterance under one noise condition.
#[derive(Clone, Debug)]
pub struct ConditionData {
    pub condition: Condition,
    pub train: Vec<Sample<f64>>,
    pub validation: Vec<Sample<f64>>,
}

fn pool() -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads())
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))
}

fn load_split(config: &ExperimentConfig) -> Result<(Manifest, Manifest), HarnessError> {
    if !config.corpus.is_dir() {
        return Err(CorpusError::EmptyCorpus(config.corpus.clone()).into());
    }
    let overrides = match &config.labels {
        Some(p) => read_label_overrides(p)?,
        None => Default::default(),
    };
    let mut manifest = build_manifest_with_labels(&config.corpus, &overrides)?;
    if let Some(max) = config.max_utterances {
        if max < manifest.len() {
            manifest = stratified_subset(&manifest, max, seed::derive(config.seed, &["subset"]))?;
        }
    }
    Ok(stratified_split(&manifest, config.train_fraction, seed::derive(config.seed, &["split"]))?)
}

fn load_utterances(m: &Manifest) -> Result<Vec<Utterance<f64>>, HarnessError> {
    m.entries
        .par_iter()
        .map(|e| {
            let u = Utterance::<f64>::load(e)?;
            if u.sample_rate != SPEECH_RATE {
                return Err(CorpusError::InvalidUtterance {
                    id: u.id,
                    msg: format!("sample rate {} Hz, expected {SPEECH_RATE}", u.sample_rate),
                }
                .into());
            }
            Ok(u)
        })
        .collect()
}

fn features_for(
    config: &ExperimentConfig,
    mfcc: &Mfcc<f64>,
    condition: Condition,
    utterances: &[Utterance<f64>],
) -> Result<Vec<Sample<f64>>, HarnessError> {
    let noise = match condition {
        Condition::Clean => None,
        Condition::Noisy(kind) => {
            let dir = config.noise_dir.as_ref().ok_or_else(|| HarnessError::Config("noise_dir is not set".into()))?;
            Some(noise_at_speech_rate(NoiseRecording::load(dir, kind)?)?)
        }
    };
    let spec = SnrSpec {
        mode: config.snr,
        segment_seed: seed::derive(config.seed, &["mix", condition.name()]),
    };
    utterances
        .par_iter()
        .map(|u| {
            let samples = match &noise {
                None => u.samples.clone(),
                Some(n) => mix(u, n, &spec)?.utterance.samples,
            };
            let mut f = mfcc.compute(&samples, &u.id)?;
            if config.normalize == Normalization::Utterance {
                f.z_score();
            }
            Ok(Sample::new(f, u.label.index()))
        })
        .collect()
}

/// Split, mix and extract features for each requested condition. Runs on
/// the worker pool.
pub fn prepare_features(config: &ExperimentConfig) -> Result<Vec<ConditionData>, HarnessError> {
    config.validate()?;
    pool()?.install(|| prepare_in_pool(config, &config.conditions))
}

fn prepare_in_pool(config: &ExperimentConfig, conditions: &[Condition]) -> Result<Vec<ConditionData>, HarnessError> {
    let (train_m, val_m) = load_split(config)?;
    log::info!("split: {} train / {} validation", train_m.len(), val_m.len());
    let train_u = load_utterances(&train_m)?;
    let val_u = load_utterances(&val_m)?;
    let mfcc = Mfcc::new(config.mfcc.clone())?;
    conditions
        .par_iter()
        .map(|&condition| {
            log::info!("features: {condition}");
            let mut train = features_for(config, &mfcc, condition, &train_u)?;
            let mut validation = features_for(config, &mfcc, condition, &val_u)?;
            if config.normalize == Normalization::Global {
                let stats = FeatureStats::fit(train.iter().map(|s| &s.features))?;
                for s in train.iter_mut().chain(validation.iter_mut()) {
                    stats.apply(&mut s.features)?;
                }
            }
            Ok(ConditionData {
                condition,
                train,
                validation,
            })
        })
        .collect()
}

struct Cell {
    condition: Condition,
    model: CellKind,
    point: SweepPoint,
    seed: u64,
}

impl Cell {
    fn name(&self) -> String {
        format!("{}__{}__{}", self.condition, self.model, self.point.slug())
    }

    fn row(&self, config: &ExperimentConfig, val_error: f64, median_seconds: f64, diverged: bool) -> ResultRow {
        ResultRow {
            noise: self.condition,
            model: self.model,
            learning_rate: self.point.learning_rate,
            use_bias: self.point.use_bias,
            cells: self.point.cells,
            snr: (self.condition != Condition::Clean).then_some(config.snr),
            val_error,
            median_seconds,
            diverged,
            seed: self.seed,
        }
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(|e| HarnessError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

fn read_cell(path: &Path) -> Option<ResultRow> {
    let text = std::fs::read_to_string(path).ok()?;
    let r = ExperimentResult::from_csv(&text).ok()?;
    (r.rows.len() == 1).then(|| r.rows.into_iter().next()).flatten()
}

/// Runs every (noise, model, sweep point) cell: train and evaluate on the
/// worker pool, then benchmark serially. Cells whose output file already
/// exists are read back instead of recomputed. Writes `results.csv` and
/// per-cell files under `cells/` in the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let cells_dir = config.output.join("cells");
    std::fs::create_dir_all(&cells_dir).map_err(|e| HarnessError::io(&cells_dir, e))?;
    write_atomic(&config.output.join("config.txt"), &config.to_text())?;

    let points = sweep_points(config);
    let mut cells = Vec::new();
    for &condition in &config.conditions {
        for &model in &config.models {
            for &point in &points {
                cells.push(Cell {
                    condition,
                    model,
                    point,
                    seed: seed::derive(config.seed, &["cell", condition.name(), model.name(), &point.slug()]),
                });
            }
        }
    }
    let cell_path = |c: &Cell| cells_dir.join(format!("{}.csv", c.name()));

    let mut done: BTreeMap<usize, ResultRow> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        if let Some(row) = read_cell(&cell_path(c)) {
            log::info!("resume: {} already done", c.name());
            done.insert(i, row);
        }
    }
    let pending: Vec<usize> = (0..cells.len()).filter(|i| !done.contains_key(i)).collect();

    if !pending.is_empty() {
        let pool = pool()?;
        let mut needed: Vec<Condition> = pending.iter().map(|&i| cells[i].condition).collect();
        needed.sort();
        needed.dedup();
        let data = pool.install(|| prepare_in_pool(config, &needed))?;
        let by_cond: BTreeMap<Condition, &ConditionData> = data.iter().map(|d| (d.condition, d)).collect();

        type Trained = Result<Option<TrainReport>, HarnessError>;
        let trained: Vec<(usize, Trained)> = pool.install(|| {
            pending
                .par_iter()
                .map(|&i| {
                    let c = &cells[i];
                    let d = by_cond[&c.condition];
                    let cfg = c.point.apply(&config.train, c.seed);
                    log::info!("train: {}", c.name());
                    let r = match train(c.model, &d.train, &d.validation, &cfg) {
                        Ok((_, report)) => Ok(Some(report)),
                        Err(TrainError::Diverged { epoch }) => {
                            log::warn!("{} diverged in epoch {epoch}", c.name());
                            Ok(None)
                        }
                        Err(e) => Err(e.into()),
                    };
                    (i, r)
                })
                .collect()
        });

        // timings run one at a time, outside the pool
        for (i, outcome) in trained {
            let c = &cells[i];
            let row = match outcome? {
                None => c.row(config, f64::NAN, f64::NAN, true),
                Some(report) => {
                    let median = if config.bench_repeats > 0 {
                        let d = by_cond[&c.condition];
                        let cfg = c.point.apply(&config.train, c.seed);
                        log::info!("bench: {} × {}", c.name(), config.bench_repeats);
                        benchmark(c.model, &d.train, &cfg, config.bench_repeats)?.median_seconds
                    } else {
                        f64::NAN
                    };
                    let base = cells_dir.join(c.name());
                    write_atomic(&base.with_extension("losses.csv"), &report.losses_csv())?;
                    write_atomic(&base.with_extension("summary.txt"), &report.summary())?;
                    c.row(config, report.validation_error.unwrap_or(f64::NAN), median, false)
                }
            };
            let single = ExperimentResult { rows: vec![row.clone()] };
            write_atomic(&cell_path(c), &single.to_csv())?;
            done.insert(i, row);
        }
    }

    let result = ExperimentResult {
        rows: done.into_values().collect(),
    };
    result.write_csv(&config.output.join("results.csv"))?;
    Ok(result)
}

pub fn sweep_learning_rate(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    run_experiment(&ExperimentConfig {
        sweep: SweepAxis::LearningRate,
        ..config.clone()
    })
}

pub fn sweep_cells(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    run_experiment(&ExperimentConfig {
        sweep: SweepAxis::Cells,
        ..config.clone()
    })
}
