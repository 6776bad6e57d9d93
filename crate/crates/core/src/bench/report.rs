//! CSV logs and run comparison.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::runner::{epochs_to_threshold, RunLog, TrainingRecord};

pub const CSV_HEADER: &str = "epoch,iteration,wall_ms,train_loss,test_metric";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("need at least two runs to compare, got {0}")]
    TooFewRuns(usize),
    #[error("runs use different datasets: `{0}` and `{1}`")]
    DatasetMismatch(String, String),
    #[error("run `{0}` has no records")]
    EmptyRun(String),
}

/// 17 significant digits, so every `f64` reads back exactly.
fn real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn records_to_csv(records: &[TrainingRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch,
            r.iteration,
            real(r.wall_ms),
            real(r.train_loss),
            real(r.test_metric)
        )
        .unwrap();
    }
    out
}

/// Writes `<path>` with the records and `<path>.meta` with dataset,
/// optimizer, seed and threshold.
pub fn write_run(log: &RunLog, path: impl AsRef<Path>) -> Result<(), ReportError> {
    let path = path.as_ref();
    let io = |source| ReportError::Io { path: path.to_path_buf(), source };
    fs::write(path, records_to_csv(&log.records)).map_err(io)?;
    let meta = format!(
        "dataset = {}\noptimizer = {}\nseed = {}\nloss_threshold = {:?}\nstop = {:?}\nsteps = {}\ngrad_evals = {}\n",
        log.dataset, log.optimizer, log.seed, log.loss_threshold, log.stop, log.steps, log.grad_evals
    );
    let meta_path = meta_path(path);
    fs::write(&meta_path, meta).map_err(|source| ReportError::Io { path: meta_path, source })
}

pub fn meta_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn parse_records(text: &str, path: &Path) -> Result<Vec<TrainingRecord>, ReportError> {
    let err = |line: usize, message: String| ReportError::Parse { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(err(1, format!("expected header `{CSV_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(err(i + 1, format!("expected 5 fields, found {}", f.len())));
        }
        let bad = |col: &str| err(i + 1, format!("bad {col} value"));
        out.push(TrainingRecord {
            epoch: f[0].trim().parse().map_err(|_| bad("epoch"))?,
            iteration: f[1].trim().parse().map_err(|_| bad("iteration"))?,
            wall_ms: f[2].trim().parse().map_err(|_| bad("wall_ms"))?,
            train_loss: f[3].trim().parse().map_err(|_| bad("train_loss"))?,
            test_metric: f[4].trim().parse().map_err(|_| bad("test_metric"))?,
        });
    }
    Ok(out)
}

/// A logged run as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedRun {
    pub label: String,
    pub dataset: Option<String>,
    pub records: Vec<TrainingRecord>,
}

impl LoggedRun {
    pub fn from_log(label: impl Into<String>, log: &RunLog) -> Self {
        Self { label: label.into(), dataset: Some(log.dataset.to_string()), records: log.records.clone() }
    }

    /// Reads a CSV log and, when present, its `.meta` sidecar.
    pub fn read(path: impl AsRef<Path>) -> Result<Self, ReportError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })?;
        let records = parse_records(&text, path)?;
        let dataset = fs::read_to_string(meta_path(path)).ok().and_then(|meta| {
            meta.lines()
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == "dataset")
                .map(|(_, v)| v.trim().to_string())
        });
        Ok(Self { label: path.display().to_string(), dataset, records })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub epochs_to_threshold: Option<usize>,
    pub final_test_metric: f64,
    pub total_wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub threshold: f64,
    pub rows: Vec<ComparisonRow>,
}

/// One row per run, in input order.
pub fn compare_runs(runs: &[LoggedRun], threshold: f64) -> Result<Comparison, ReportError> {
    if runs.len() < 2 {
        return Err(ReportError::TooFewRuns(runs.len()));
    }
    let mut known: Option<&str> = None;
    for run in runs {
        if let Some(d) = run.dataset.as_deref() {
            match known {
                Some(k) if k != d => return Err(ReportError::DatasetMismatch(k.into(), d.into())),
                _ => known = Some(d),
            }
        }
    }
    let rows = runs
        .iter()
        .map(|run| {
            let last = run.records.last().ok_or_else(|| ReportError::EmptyRun(run.label.clone()))?;
            Ok(ComparisonRow {
                label: run.label.clone(),
                epochs_to_threshold: epochs_to_threshold(&run.records, threshold),
                final_test_metric: last.test_metric,
                total_wall_ms: last.wall_ms,
            })
        })
        .collect::<Result<_, ReportError>>()?;
    Ok(Comparison { threshold, rows })
}

impl Comparison {
    fn cells(&self) -> Vec<[String; 4]> {
        self.rows
            .iter()
            .map(|r| {
                [
                    r.label.clone(),
                    r.epochs_to_threshold.map_or("—".to_string(), |e| e.to_string()),
                    format!("{:.6}", r.final_test_metric),
                    format!("{:.1}", r.total_wall_ms),
                ]
            })
            .collect()
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let head = [
            "run".to_string(),
            format!("epochs<{:e}", self.threshold),
            "final_test_metric".to_string(),
            "wall_ms".to_string(),
        ];
        let body = self.cells();
        let mut width = head.each_ref().map(|h| h.chars().count());
        for row in &body {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        for row in std::iter::once(&head).chain(&body) {
            let line: Vec<String> = row
                .iter()
                .zip(width)
                .enumerate()
                .map(|(i, (c, w))| {
                    let pad = w - c.chars().count();
                    if i == 0 {
                        format!("{c}{}", " ".repeat(pad))
                    } else {
                        format!("{}{c}", " ".repeat(pad))
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("run,epochs_to_threshold,final_test_metric,total_wall_ms\n");
        for r in &self.rows {
            let epochs = r.epochs_to_threshold.map_or(String::new(), |e| e.to_string());
            writeln!(out, "{},{epochs},{},{}", r.label, real(r.final_test_metric), real(r.total_wall_ms)).unwrap();
        }
        out
    }
}
