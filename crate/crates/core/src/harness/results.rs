use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::cells::CellKind;
use crate::corpus::Condition;
use crate::mixer::SnrMode;

pub const RESULTS_HEADER: &str = "noise,model,learning_rate,use_bias,cells,snr_db,val_error,median_seconds,diverged,seed";

/// One experiment cell. `val_error` is NaN for diverged cells and
/// `median_seconds` is NaN when no benchmark ran; `median_seconds` is the
/// only non-deterministic column.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub noise: Condition,
    pub model: CellKind,
    pub learning_rate: f64,
    pub use_bias: bool,
    pub cells: usize,
    /// `None` for the clean condition.
    pub snr: Option<SnrMode>,
    pub val_error: f64,
    pub median_seconds: f64,
    pub diverged: bool,
    pub seed: u64,
}

fn snr_field(snr: Option<SnrMode>) -> String {
    snr.map_or("none".to_string(), |m| m.to_string())
}

impl ResultRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.noise,
            self.model,
            self.learning_rate,
            self.use_bias,
            self.cells,
            snr_field(self.snr),
            self.val_error,
            self.median_seconds,
            self.diverged,
            self.seed
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<Self, HarnessError> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        let bad = |what: &str| HarnessError::Results(format!("bad {what} in row `{line}`"));
        if f.len() != 10 {
            return Err(bad("field count"));
        }
        let float = |s: &str, what: &str| -> Result<f64, HarnessError> {
            match s {
                "NaN" | "nan" => Ok(f64::NAN),
                _ => s.parse().map_err(|_| bad(what)),
            }
        };
        Ok(Self {
            noise: f[0].parse().map_err(|_| bad("noise"))?,
            model: f[1].parse().map_err(|_| bad("model"))?,
            learning_rate: float(f[2], "learning_rate")?,
            use_bias: f[3].parse().map_err(|_| bad("use_bias"))?,
            cells: f[4].parse().map_err(|_| bad("cells"))?,
            snr: if f[5] == "none" { None } else { Some(f[5].parse().map_err(|_| bad("snr_db"))?) },
            val_error: float(f[6], "val_error")?,
            median_seconds: float(f[7], "median_seconds")?,
            diverged: f[8].parse().map_err(|_| bad("diverged"))?,
            seed: f[9].parse().map_err(|_| bad("seed"))?,
        })
    }

    /// Equality ignoring the timing column (NaN-aware).
    pub fn same_outcome(&self, other: &Self) -> bool {
        let eq = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        self.noise == other.noise
            && self.model == other.model
            && eq(self.learning_rate, other.learning_rate)
            && self.use_bias == other.use_bias
            && self.cells == other.cells
            && self.snr == other.snr
            && eq(self.val_error, other.val_error)
            && self.diverged == other.diverged
            && self.seed == other.seed
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(RESULTS_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.to_csv_line());
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(RESULTS_HEADER) {
            return Err(HarnessError::Results(format!("expected header `{RESULTS_HEADER}`")));
        }
        let rows = lines
            .filter(|l| !l.trim().is_empty())
            .map(ResultRow::parse_csv_line)
            .collect::<Result<_, _>>()?;
        Ok(Self { rows })
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_csv()).map_err(|e| HarnessError::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_csv(&text)
    }

    pub fn any_diverged(&self) -> bool {
        self.rows.iter().any(|r| r.diverged)
    }

    /// Rows for one model, in order.
    pub fn for_model(&self, model: CellKind) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(move |r| r.model == model)
    }
}

/// One matched LSTM/GRU pair.
#[derive(Clone, Debug, PartialEq)]
pub struct RuntimePair {
    pub noise: Condition,
    pub learning_rate: f64,
    pub use_bias: bool,
    pub cells: usize,
    pub lstm_seconds: f64,
    pub gru_seconds: f64,
    /// `100·(lstm − gru)/lstm`.
    pub percent: f64,
    pub lstm_error: f64,
    pub gru_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuntimeComparison {
    pub pairs: Vec<RuntimePair>,
    /// `100·(mean LSTM median − mean GRU median)/mean LSTM median`.
    pub aggregate_percent: f64,
}

impl RuntimeComparison {
    pub fn to_text(&self) -> String {
        let mut s = String::from("noise lr bias cells lstm_s gru_s gru_faster_pct lstm_err gru_err\n");
        for p in &self.pairs {
            let _ = writeln!(
                s,
                "{} {} {} {} {:.4} {:.4} {:.2} {:.4} {:.4}",
                p.noise, p.learning_rate, p.use_bias, p.cells, p.lstm_seconds, p.gru_seconds, p.percent, p.lstm_error, p.gru_error
            );
        }
        let _ = writeln!(s, "aggregate gru_faster_pct {:.2} (reference 18.16)", self.aggregate_percent);
        s
    }
}

type PairKey = (Condition, u64, bool, usize, String);

fn pair_key(r: &ResultRow) -> PairKey {
    (r.noise, r.learning_rate.to_bits(), r.use_bias, r.cells, snr_field(r.snr))
}

/// Pairs every LSTM row with the GRU row of the same noise and sweep point.
pub fn compare_runtime(result: &ExperimentResult) -> Result<RuntimeComparison, HarnessError> {
    let mut lstm: BTreeMap<PairKey, &ResultRow> = BTreeMap::new();
    let mut gru: BTreeMap<PairKey, &ResultRow> = BTreeMap::new();
    for r in &result.rows {
        let side = match r.model {
            CellKind::Lstm => &mut lstm,
            CellKind::Gru => &mut gru,
            CellKind::Rnn => continue,
        };
        if side.insert(pair_key(r), r).is_some() {
            return Err(HarnessError::Pairing(format!("duplicate {} row for {}", r.model, r.noise)));
        }
    }
    if lstm.is_empty() && gru.is_empty() {
        return Err(HarnessError::Pairing("no LSTM or GRU rows".into()));
    }
    for (k, r) in &gru {
        if !lstm.contains_key(k) {
            return Err(HarnessError::Pairing(format!("GRU row for {} has no LSTM counterpart", r.noise)));
        }
    }
    let mut pairs = Vec::new();
    // keep the result's row order
    let mut seen = BTreeSet::new();
    for r in result.rows.iter().filter(|r| r.model == CellKind::Lstm) {
        let k = pair_key(r);
        if !seen.insert(k.clone()) {
            continue;
        }
        let g = gru
            .get(&k)
            .ok_or_else(|| HarnessError::Pairing(format!("LSTM row for {} has no GRU counterpart", r.noise)))?;
        if !(r.median_seconds > 0.0 && g.median_seconds > 0.0) {
            return Err(HarnessError::Pairing(format!("{}: rows carry no timing", r.noise)));
        }
        pairs.push(RuntimePair {
            noise: r.noise,
            learning_rate: r.learning_rate,
            use_bias: r.use_bias,
            cells: r.cells,
            lstm_seconds: r.median_seconds,
            gru_seconds: g.median_seconds,
            percent: 100.0 * (r.median_seconds - g.median_seconds) / r.median_seconds,
            lstm_error: r.val_error,
            gru_error: g.val_error,
        });
    }
    let n = pairs.len() as f64;
    let mean_l = pairs.iter().map(|p| p.lstm_seconds).sum::<f64>() / n;
    let mean_g = pairs.iter().map(|p| p.gru_seconds).sum::<f64>() / n;
    Ok(RuntimeComparison {
        aggregate_percent: 100.0 * (mean_l - mean_g) / mean_l,
        pairs,
    })
}

fn write_dat(path: &Path, axes: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<(), HarnessError> {
    let mut s = format!("# {axes}\n# columns: {}\n", columns.join(" "));
    for r in rows {
        s.push_str(&r.join(" "));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| HarnessError::io(path, e))
}

/// Whitespace-delimited plot data: error against learning rate and against
/// cell count when the result sweeps them, and per-noise error and runtime
/// bars when each (noise, model) pair has a single row.
pub fn emit_plot_data(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if result.rows.is_empty() {
        return Err(HarnessError::EmptyResult);
    }
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut written = Vec::new();
    let rates: BTreeSet<u64> = result.rows.iter().map(|r| r.learning_rate.to_bits()).collect();
    let cells: BTreeSet<usize> = result.rows.iter().map(|r| r.cells).collect();
    if rates.len() > 1 {
        let p = dir.join("error_vs_rate.dat");
        let rows: Vec<Vec<String>> = result
            .rows
            .iter()
            .map(|r| vec![r.noise.to_string(), r.model.to_string(), r.use_bias.to_string(), r.learning_rate.to_string(), r.val_error.to_string()])
            .collect();
        write_dat(&p, "x = learning_rate (log scale), y = validation error", &["noise", "model", "use_bias", "learning_rate", "val_error"], &rows)?;
        written.push(p);
    }
    if cells.len() > 1 {
        let p = dir.join("error_vs_cells.dat");
        let rows: Vec<Vec<String>> = result
            .rows
            .iter()
            .map(|r| vec![r.noise.to_string(), r.model.to_string(), r.use_bias.to_string(), r.cells.to_string(), r.val_error.to_string()])
            .collect();
        write_dat(&p, "x = number of cells, y = validation error", &["noise", "model", "use_bias", "cells", "val_error"], &rows)?;
        written.push(p);
    }
    let mut per_pair: BTreeMap<(Condition, CellKind), usize> = BTreeMap::new();
    for r in &result.rows {
        *per_pair.entry((r.noise, r.model)).or_default() += 1;
    }
    if per_pair.values().all(|&n| n == 1) {
        let err: Vec<Vec<String>> = result
            .rows
            .iter()
            .map(|r| vec![r.noise.to_string(), r.model.to_string(), r.val_error.to_string()])
            .collect();
        let p = dir.join("error_per_noise.dat");
        write_dat(&p, "x = noise condition, y = validation error", &["noise", "model", "val_error"], &err)?;
        written.push(p);
        let time: Vec<Vec<String>> = result
            .rows
            .iter()
            .map(|r| vec![r.noise.to_string(), r.model.to_string(), r.median_seconds.to_string()])
            .collect();
        let p = dir.join("runtime_per_noise.dat");
        write_dat(&p, "x = noise condition, y = median training seconds", &["noise", "model", "median_seconds"], &time)?;
        written.push(p);
    }
    Ok(written)
}

/// Column names and rows of a plot-data file.
pub fn read_plot_data(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut columns = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(c) = line.strip_prefix("# columns:") {
            columns = c.split_whitespace().map(String::from).collect();
        } else if !line.starts_with('#') && !line.trim().is_empty() {
            rows.push(line.split_whitespace().map(String::from).collect());
        }
    }
    Ok((columns, rows))
}
