//! End-to-end experiments: config files, the noise × model grid, the
//! learning-rate and cell-count sweeps, runtime comparison and plot data.

mod config;
mod results;
mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::dsp::DspError;
use crate::mixer::MixError;
use crate::trainer::TrainError;

pub use config::{ExperimentConfig, SweepAxis, CELL_GRID, LEARNING_RATES};
pub use results::{
    compare_runtime, emit_plot_data, read_plot_data, ExperimentResult, ResultRow, RuntimeComparison, RuntimePair,
    RESULTS_HEADER,
};
pub use run::{prepare_features, run_experiment, sweep_cells, sweep_learning_rate, sweep_points, ConditionData, SweepPoint};

/// Env var capping the worker pool.
pub const THREADS_ENV: &str = "GATED_SER_THREADS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("results: {0}")]
    Results(String),
    #[error("cannot pair GRU and LSTM rows: {0}")]
    Pairing(String),
    #[error("result has no rows")]
    EmptyResult,
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for corpus
    /// problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Corpus(_) | HarnessError::Mix(MixError::NoiseTooShort { .. }) => 3,
            _ => 1,
        }
    }
}

/// Worker count from [`THREADS_ENV`], defaulting to the machine's
/// parallelism.
pub fn worker_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}
