//! CSV and JSON result files.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing a
//! value back yields the same `f64`. Wall-clock time is kept out of CSV so that
//! seeded reruns produce identical files.

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ablate::{AblationReport, ScalerChoice};
use super::evaluate::RunSummary;
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::metalearners::MetaLearner;

pub const EVAL_HEADER: [&str; 3] = ["seed", "episode", "accuracy"];
pub const ABLATION_HEADER: [&str; 8] = [
    "loss",
    "scaler",
    "metalearner",
    "lambda",
    "mean",
    "std_runs",
    "std_episodes",
    "episodes",
];

/// A saved result file; `export-csv` converts either kind to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "report", rename_all = "snake_case")]
pub enum Report {
    Eval(RunSummary),
    Ablation(AblationReport),
}

impl Report {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        match self {
            Report::Eval(summary) => write_eval_csv(writer, summary),
            Report::Ablation(report) => write_ablation_csv(writer, report),
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io("<csv>", e),
        other => Error::Data(format!("csv: {other:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub episode: usize,
    pub accuracy: f64,
}

/// One row per episode of every run; an empty summary gives a header-only file.
pub fn write_eval_csv(writer: impl Write, summary: &RunSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EVAL_HEADER).map_err(csv_error)?;
    for (seed, run) in summary.seeds.iter().zip(&summary.runs) {
        for (i, acc) in run.accuracies.iter().enumerate() {
            w.write_record([seed.to_string(), i.to_string(), acc.to_string()])
                .map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn read_eval_csv(reader: impl Read) -> Result<Vec<EpisodeRecord>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(csv_error))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRecord {
    pub loss: LossKind,
    pub scaler: ScalerChoice,
    pub metalearner: String,
    pub lambda: Option<f64>,
    pub mean: f64,
    pub std_runs: f64,
    pub std_episodes: f64,
    pub episodes: usize,
}

pub fn write_ablation_csv(writer: impl Write, report: &AblationReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ABLATION_HEADER).map_err(csv_error)?;
    for row in &report.rows {
        let lambda = match row.metalearner {
            MetaLearner::Rrml { lambda } => lambda.to_string(),
            MetaLearner::Pn => String::new(),
        };
        let s = &row.summary;
        let episodes: usize = s.runs.iter().map(|m| m.episodes).sum();
        w.write_record([
            row.loss.name().to_owned(),
            row.scaler.name().to_owned(),
            row.metalearner.name().to_owned(),
            lambda,
            s.mean.to_string(),
            s.std_runs.to_string(),
            s.std_episodes.to_string(),
            episodes.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn read_ablation_csv(reader: impl Read) -> Result<Vec<AblationRecord>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(csv_error))
        .collect()
}

/// Writes `report` as CSV to `path`.
pub fn export_csv(report: &Report, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    report.write_csv(file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ablate::AblationRow;
    use crate::harness::evaluate::Metrics;

    fn summary(accs: Vec<f64>) -> RunSummary {
        RunSummary::new(vec![7], vec![Metrics::from_accuracies(accs, 1.5)])
    }

    #[test]
    fn eval_csv_has_one_line_per_episode() {
        let s = summary(vec![0.1 + 0.2, 1.0 / 3.0, 0.6]);
        let mut buf = Vec::new();
        write_eval_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        let back = read_eval_csv(&buf[..]).unwrap();
        let accs: Vec<f64> = back.iter().map(|r| r.accuracy).collect();
        assert_eq!(accs, s.runs[0].accuracies);
        assert_eq!(back[2], EpisodeRecord { seed: 7, episode: 2, accuracy: 0.6 });
    }

    #[test]
    fn empty_metrics_give_header_only() {
        let mut buf = Vec::new();
        write_eval_csv(&mut buf, &summary(vec![])).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "seed,episode,accuracy\n");
    }

    #[test]
    fn ablation_csv_round_trips() {
        let report = AblationReport {
            rows: vec![
                AblationRow {
                    loss: LossKind::LgPlusLabel,
                    scaler: ScalerChoice::Em,
                    metalearner: MetaLearner::Rrml { lambda: 0.25 },
                    summary: summary(vec![0.9, 0.8]),
                },
                AblationRow {
                    loss: LossKind::Ce,
                    scaler: ScalerChoice::None,
                    metalearner: MetaLearner::Pn,
                    summary: summary(vec![0.5]),
                },
            ],
            train_logs: vec![],
        };
        let mut buf = Vec::new();
        write_ablation_csv(&mut buf, &report).unwrap();
        let back = read_ablation_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].loss, LossKind::LgPlusLabel);
        assert_eq!(back[0].lambda, Some(0.25));
        assert_eq!(back[0].mean, report.rows[0].summary.mean);
        assert_eq!(back[0].std_episodes, report.rows[0].summary.std_episodes);
        assert_eq!(back[1].lambda, None);
        assert_eq!(back[1].metalearner, "pn");
    }

    #[test]
    fn report_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let r = Report::Eval(summary(vec![0.25, 0.75]));
        r.save(&path).unwrap();
        assert_eq!(Report::load(&path).unwrap(), r);
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let r = Report::Eval(summary(vec![0.5]));
        let err = export_csv(&r, "/nonexistent-dir/x.csv").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
