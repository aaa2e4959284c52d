//! Seeded per-sequence SGD with global-norm clipping, evaluation, gradient
//! norm probes and wall-clock benchmarks.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::cells::{CellError, CellKind, CellOptions, Network, ParamTensors, Pooling};
use crate::dsp::FeatureSequence;
use crate::scalar::Scalar;
use crate::seed;
use crate::NUM_CLASSES;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training diverged in epoch {epoch} (non-finite loss or parameters)")]
    Diverged { epoch: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("sample {id}: {msg}")]
    Sample { id: String, msg: String },
    #[error("gradient probe needs at least 2 frames, got {0}")]
    ProbeTooShort(usize),
    #[error(transparent)]
    Cell(#[from] CellError),
}

/// One labeled feature sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub features: FeatureSequence<T>,
    /// Class index in `0..7`.
    pub label: usize,
}

impl<T> Sample<T> {
    pub fn new(features: FeatureSequence<T>, label: usize) -> Self {
        Self { features, label }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig<T> {
    pub learning_rate: T,
    pub use_bias: bool,
    /// Hidden dimension `p`.
    pub hidden_cells: usize,
    pub epochs: usize,
    pub seed: u64,
    /// `None` disables clipping.
    pub clip_norm: Option<T>,
    pub readout: Pooling,
    /// LSTM only.
    pub peepholes: bool,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::one(),
            use_bias: false,
            hidden_cells: 1,
            epochs: 50,
            seed: 0,
            clip_norm: Some(T::lit(5.0)),
            readout: Pooling::Last,
            peepholes: true,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > T::zero() && self.learning_rate.is_finite()) {
            return Err(TrainError::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.hidden_cells == 0 {
            return Err(TrainError::Config("hidden_cells must be at least 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if c.is_nan() || c <= T::zero() {
                return Err(TrainError::Config(format!("clip norm must be positive, got {c}")));
            }
        }
        Ok(())
    }

    pub fn cell_options(&self) -> CellOptions {
        CellOptions {
            use_bias: self.use_bias,
            peepholes: self.peepholes,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradNormSummary {
    pub steps: usize,
    /// Steps whose norm exceeded the clip threshold.
    pub clipped: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Mean training loss of each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
    /// `None` when no validation set was given.
    pub validation_error: Option<f64>,
    /// Wall-clock time of initialization plus the epochs.
    pub seconds: f64,
    /// Pre-clip global gradient norms.
    pub grad_norms: GradNormSummary,
}

impl TrainReport {
    /// `epoch,mean_loss` rows.
    pub fn losses_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss\n");
        for (e, l) in self.epoch_losses.iter().enumerate() {
            let _ = writeln!(out, "{},{}", e + 1, l);
        }
        out
    }

    /// `key = value` summary block.
    pub fn summary(&self) -> String {
        let g = &self.grad_norms;
        let fmt_opt = |v: Option<f64>| v.map_or("none".to_string(), |v| v.to_string());
        format!(
            "final_error = {}\nfinal_loss = {}\nseconds = {}\ndiverged = false\nepochs = {}\ngrad_steps = {}\ngrad_clipped = {}\ngrad_norm_min = {}\ngrad_norm_max = {}\ngrad_norm_mean = {}\n",
            fmt_opt(self.validation_error),
            fmt_opt(self.epoch_losses.last().copied()),
            self.seconds,
            self.epoch_losses.len(),
            g.steps,
            g.clipped,
            g.min,
            g.max,
            g.mean
        )
    }
}

fn check_samples<T: Scalar>(samples: &[Sample<T>], width: usize) -> Result<(), TrainError> {
    for s in samples {
        if s.features.width() != width {
            return Err(TrainError::Sample {
                id: s.features.utterance_id.clone(),
                msg: format!("{} coefficients per frame, expected {width}", s.features.width()),
            });
        }
        if s.label >= NUM_CLASSES {
            return Err(TrainError::Sample {
                id: s.features.utterance_id.clone(),
                msg: format!("label {} out of range", s.label),
            });
        }
    }
    Ok(())
}

/// Rescales `grads` so its global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm<T: Scalar, P: ParamTensors<T>>(grads: &mut P, max_norm: T) -> T {
    let g = grads.global_norm();
    if g > max_norm {
        grads.scale_all(max_norm / g);
    }
    g
}

/// Freshly initialized network for `config`, seeded from `config.seed`.
pub fn init_network<T: Scalar>(kind: CellKind, input: usize, config: &TrainConfig<T>) -> Network<T> {
    let mut rng = seed::rng(seed::derive(config.seed, &["init", kind.name()]));
    Network::init(
        kind,
        input,
        config.hidden_cells,
        NUM_CLASSES,
        config.cell_options(),
        config.readout,
        &mut rng,
    )
}

/// Trains a fresh network on `train_set` and reports its error on
/// `validation` (skipped when empty). Deterministic in its inputs.
pub fn train<T: Scalar>(
    kind: CellKind,
    train_set: &[Sample<T>],
    validation: &[Sample<T>],
    config: &TrainConfig<T>,
) -> Result<(Network<T>, TrainReport), TrainError> {
    config.validate()?;
    let first = train_set.first().ok_or(TrainError::EmptyTrainingSet)?;
    let width = first.features.width();
    check_samples(train_set, width)?;
    check_samples(validation, width)?;

    let start = Instant::now();
    let mut net = init_network(kind, width, config);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut rng = seed::rng(seed::derive(config.seed, &["shuffle", kind.name()]));
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut norms = GradNormSummary {
        min: f64::INFINITY,
        ..Default::default()
    };
    let mut norm_sum = 0.0;
    let step = -config.learning_rate;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = T::zero();
        for &i in &order {
            let s = &train_set[i];
            let mut out = net.backward(&s.features.frames, s.label)?;
            if !out.loss.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            loss_sum += out.loss;
            let g = out.grads.global_norm();
            let g64 = g.to_f64_lossy();
            if !g64.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            norms.steps += 1;
            norms.min = norms.min.min(g64);
            norms.max = norms.max.max(g64);
            norm_sum += g64;
            if let Some(c) = config.clip_norm {
                if clip_global_norm(&mut out.grads, c) > c {
                    norms.clipped += 1;
                }
            }
            net.add_scaled(step, &out.grads);
        }
        if !net.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        let mean = (loss_sum / T::from_usize_lossy(train_set.len())).to_f64_lossy();
        log::trace!("{kind} epoch {epoch}: loss {mean:.6}");
        epoch_losses.push(mean);
    }
    let seconds = start.elapsed().as_secs_f64();
    if norms.steps == 0 {
        norms.min = 0.0;
    } else {
        norms.mean = norm_sum / norms.steps as f64;
    }
    let validation_error = if validation.is_empty() {
        None
    } else {
        Some(evaluate(&net, validation)?)
    };
    Ok((
        net,
        TrainReport {
            epoch_losses,
            validation_error,
            seconds,
            grad_norms: norms,
        },
    ))
}

/// Fraction of samples whose arg-max class differs from the label; ties go
/// to the lowest class index.
pub fn evaluate<T: Scalar>(net: &Network<T>, dataset: &[Sample<T>]) -> Result<f64, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut wrong = 0usize;
    for s in dataset {
        if net.predict(&s.features.frames)? != s.label {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / dataset.len() as f64)
}

/// `‖∂loss/∂h_t‖₂` for every timestep, earliest first.
pub fn gradient_norm_probe<T: Scalar>(
    net: &Network<T>,
    frames: &crate::nn::Matrix<T>,
    label: usize,
) -> Result<Vec<T>, TrainError> {
    if frames.rows() < 2 {
        return Err(TrainError::ProbeTooShort(frames.rows()));
    }
    Ok(net.backward(frames, label)?.hidden_grad_norms)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub median_seconds: f64,
    /// Every measurement, in run order.
    pub times: Vec<f64>,
}

/// Middle element of the sorted values; the mean of the two middle ones
/// for an even count.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Runs the full training loop `repeats` times on identical inputs and
/// reports the median wall time. Run it with no other trainers active.
pub fn benchmark<T: Scalar>(
    kind: CellKind,
    dataset: &[Sample<T>],
    config: &TrainConfig<T>,
    repeats: usize,
) -> Result<BenchResult, TrainError> {
    if repeats == 0 {
        return Err(TrainError::Config("benchmark needs at least one repeat".into()));
    }
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let (_, report) = train(kind, dataset, &[], config)?;
        times.push(report.seconds);
    }
    Ok(BenchResult {
        median_seconds: median(&times).unwrap_or(f64::NAN),
        times,
    })
}
