//! `gated-ser`: corpus preparation, training runs, sweeps and reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gated_ser::cells::CellKind;
use gated_ser::corpus::{
    build_manifest_with_labels, read_label_overrides, read_manifest, stratified_split, write_manifest, write_wav,
    Condition, Manifest, NoiseKind, NoiseRecording, Utterance,
};
use gated_ser::dsp::{write_features, FeatureStats, Mfcc, MfccConfig, Normalization};
use gated_ser::harness::{
    compare_runtime, emit_plot_data, prepare_features, run_experiment, sweep_cells, sweep_learning_rate,
    ExperimentConfig, ExperimentResult, HarnessError,
};
use gated_ser::mixer::{mix, noise_at_speech_rate, SnrMode, SnrSpec};
use gated_ser::synth::{write_corpus, write_noise, SynthConfig};
use gated_ser::trainer::benchmark;

const EXIT_DIVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "gated-ser", version, about = "Emotion classification from noisy speech with RNN, LSTM and GRU cells")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// `key = value` experiment config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set epochs=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct Source {
    /// Directory of corpus WAVs.
    #[arg(long, conflicts_with = "manifest")]
    corpus: Option<PathBuf>,
    /// Manifest CSV (`id,path,label,speaker`).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// `id,label` CSV overriding file-name labels.
    #[arg(long)]
    labels: Option<PathBuf>,
}

impl Source {
    fn manifest(&self) -> Result<Manifest, HarnessError> {
        match (&self.corpus, &self.manifest) {
            (_, Some(m)) => Ok(read_manifest(m)?),
            (Some(dir), None) => {
                let overrides = match &self.labels {
                    Some(p) => read_label_overrides(p)?,
                    None => Default::default(),
                };
                Ok(build_manifest_with_labels(dir, &overrides)?)
            }
            (None, None) => Err(HarnessError::Config("give --corpus or --manifest".into())),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic stand-in corpus and noise set.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Utterances per class; omit for the reference inventory (535).
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long, default_value_t = 30.0)]
        noise_secs: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build a manifest, optionally with a stratified split.
    Manifest {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: PathBuf,
        /// Also write `<out>.train.csv` and `<out>.validation.csv`.
        #[arg(long)]
        split_seed: Option<u64>,
        #[arg(long, default_value_t = 0.75)]
        fraction: f64,
    },
    /// Superimpose one noise kind on every utterance.
    Mix {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        noise_dir: PathBuf,
        #[arg(long)]
        kind: NoiseKind,
        /// Target SNR in dB, or `raw`.
        #[arg(long, default_value = "10")]
        snr: SnrMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one MFCC CSV per utterance.
    Features {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: PathBuf,
        /// none, utterance, or global (statistics over the whole manifest).
        #[arg(long, default_value = "global")]
        normalize: Normalization,
    },
    /// Run the configured (noise × model) grid.
    Train(ConfigArgs),
    /// Learning rates 1 … 1e-9 with and without bias.
    SweepLr(ConfigArgs),
    /// Cell counts 1 … 32 with and without bias.
    SweepCells(ConfigArgs),
    /// GRU vs LSTM runtime and error from a results CSV.
    Compare {
        #[arg(long)]
        results: PathBuf,
    },
    /// Median-of-N training time for each configured model on one condition.
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "none")]
        condition: Condition,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
    /// Plot-data files from a results CSV.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn finish(result: &ExperimentResult, output: &Path) -> u8 {
    print!("{}", result.to_csv());
    eprintln!("results: {}", output.join("results.csv").display());
    if result.any_diverged() {
        log::warn!("some cells diverged");
        EXIT_DIVERGED
    } else {
        0
    }
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run(cmd: Cmd) -> Result<u8, HarnessError> {
    match cmd {
        Cmd::Synth { out, per_class, noise_secs, seed } => {
            let cfg = SynthConfig { per_class, seed, ..Default::default() };
            let m = write_corpus(&out.join("speech"), &cfg)?;
            write_noise(&out.join("noise"), &NoiseKind::ALL, noise_secs, seed)?;
            println!("{} utterances in {}", m.len(), out.join("speech").display());
            println!("noise in {}", out.join("noise").display());
            Ok(0)
        }
        Cmd::Manifest { source, out, split_seed, fraction } => {
            let m = source.manifest()?;
            write_manifest(&m, &out)?;
            println!("{} entries -> {}", m.len(), out.display());
            if let Some(s) = split_seed {
                let (tr, va) = stratified_split(&m, fraction, s)?;
                let tp = out.with_extension("train.csv");
                let vp = out.with_extension("validation.csv");
                write_manifest(&tr, &tp)?;
                write_manifest(&va, &vp)?;
                println!("{} train -> {}\n{} validation -> {}", tr.len(), tp.display(), va.len(), vp.display());
            }
            Ok(0)
        }
        Cmd::Mix { source, noise_dir, kind, snr, seed, out } => {
            let m = source.manifest()?;
            let noise = noise_at_speech_rate(NoiseRecording::<f64>::load(&noise_dir, kind)?)?;
            let spec = SnrSpec { mode: snr, segment_seed: seed };
            create_dir(&out)?;
            let mut log_lines = String::from("id,offset,noise_gain,clip_gain,achieved_snr_db\n");
            for e in &m.entries {
                let u = Utterance::<f64>::load(e)?;
                let mixed = mix(&u, &noise, &spec)?;
                write_wav(&out.join(format!("{}.wav", e.id)), &mixed.utterance.samples, u.sample_rate)?;
                log_lines.push_str(&format!(
                    "{},{},{},{},{}\n",
                    e.id, mixed.segment_offset, mixed.noise_gain, mixed.clip_gain, mixed.achieved_snr
                ));
            }
            let log_path = out.join("mix_log.csv");
            std::fs::write(&log_path, log_lines).map_err(|e| HarnessError::Io { path: log_path, source: e })?;
            println!("{} mixtures ({kind}, snr {snr}) -> {}", m.len(), out.display());
            Ok(0)
        }
        Cmd::Features { source, out, normalize } => {
            let m = source.manifest()?;
            let cfg = MfccConfig::default();
            let mfcc = Mfcc::<f64>::new(cfg.clone())?;
            create_dir(&out)?;
            let mut seqs = Vec::with_capacity(m.len());
            for e in &m.entries {
                let u = Utterance::<f64>::load(e)?;
                let mut f = mfcc.compute(&u.samples, &u.id)?;
                if normalize == Normalization::Utterance {
                    f.z_score();
                }
                seqs.push(f);
            }
            if normalize == Normalization::Global {
                let stats = FeatureStats::fit(&seqs)?;
                for f in &mut seqs {
                    stats.apply(f)?;
                }
            }
            for f in &seqs {
                write_features(f, &cfg, &out.join(format!("{}.csv", f.utterance_id)))?;
            }
            println!("{} feature files ({normalize}) -> {}", m.len(), out.display());
            Ok(0)
        }
        Cmd::Train(args) => {
            let cfg = args.load()?;
            let r = run_experiment(&cfg)?;
            Ok(finish(&r, &cfg.output))
        }
        Cmd::SweepLr(args) => {
            let cfg = args.load()?;
            let r = sweep_learning_rate(&cfg)?;
            Ok(finish(&r, &cfg.output))
        }
        Cmd::SweepCells(args) => {
            let cfg = args.load()?;
            let r = sweep_cells(&cfg)?;
            Ok(finish(&r, &cfg.output))
        }
        Cmd::Compare { results } => {
            let r = ExperimentResult::read_csv(&results)?;
            print!("{}", compare_runtime(&r)?.to_text());
            Ok(0)
        }
        Cmd::Bench { config, condition, repeats } => {
            let mut cfg = config.load()?;
            cfg.conditions = vec![condition];
            let data = prepare_features(&cfg)?;
            let train_set = &data[0].train;
            let mut medians = Vec::new();
            for &kind in &cfg.models {
                let b = benchmark(kind, train_set, &cfg.train, repeats)?;
                println!("{kind} median {:.4} s over {:?}", b.median_seconds, b.times);
                medians.push((kind, b.median_seconds));
            }
            let find = |k| medians.iter().find(|(m, _)| *m == k).map(|&(_, s)| s);
            if let (Some(l), Some(g)) = (find(CellKind::Lstm), find(CellKind::Gru)) {
                println!("gru faster by {:.2}% (reference 18.16%)", 100.0 * (l - g) / l);
            }
            Ok(0)
        }
        Cmd::Report { results, out } => {
            let r = ExperimentResult::read_csv(&results)?;
            for p in emit_plot_data(&r, &out)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
    }
}

