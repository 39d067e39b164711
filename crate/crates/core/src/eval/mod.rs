//! Cross-validation of the two-phase model and its reports.
//!
//! Folds split either by tweet or by user. Confusion counts are pooled across
//! folds before computing metrics. Each experiment writes, under a chosen
//! directory and with a `{mode}_` prefix:
//!
//! | file                | content                                         |
//! |---------------------|-------------------------------------------------|
//! | `metrics.txt`       | aligned per-class, micro and macro table        |
//! | `metrics.json`      | the same as JSON (undefined values are `null`)  |
//! | `bins.tsv`          | macro metrics per timeline-length bin           |
//! | `predictions.jsonl` | one line per tweet with gold and predicted class |
//! | `folds.json`        | per-fold sizes and scores                       |

mod bins;
mod experiment;
mod folds;
mod metrics;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use bins::{bin_by_timeline_length, BinReport, BinRow, PredictionRecord, TIMELINE_BINS};
pub use experiment::{
    run_experiment, run_experiment_modes, train_phase_one, ExperimentConfig, ExperimentReport,
    FoldReport,
};
pub use folds::{split, split_by_tweet, split_by_user, user_overlap, FoldPlan, SplitMode};
pub use metrics::{
    class_prf, format_metric, metrics_from_confusion, micro_macro, ClassMetrics, ConfusionMatrix,
    MetricsReport, Prf,
};

use crate::corpus::LabelScheme;
use crate::error::{Error, Result};
use crate::output::write_atomic;

/// A prediction line as stored on disk, with class names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub id: String,
    pub user_id: String,
    pub fold: usize,
    pub gold: String,
    pub pred: String,
    pub timeline_len: usize,
}

pub fn predictions_jsonl(records: &[PredictionRecord], classes: &[String]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        let line = PredictionLine {
            id: r.id.clone(),
            user_id: r.user_id.clone(),
            fold: r.fold,
            gold: classes[r.gold].clone(),
            pred: classes[r.pred].clone(),
            timeline_len: r.timeline_len,
        };
        writeln!(out, "{}", serde_json::to_string(&line)?).unwrap();
    }
    Ok(out)
}

/// Reads a predictions file, mapping class names through `scheme`.
pub fn load_predictions(path: &Path, scheme: &LabelScheme) -> Result<Vec<PredictionRecord>> {
    let contents = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (i, raw) in contents.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: PredictionLine =
            serde_json::from_str(raw).map_err(|e| parse_err(i + 1, e.to_string()))?;
        let class = |name: &str| {
            scheme
                .index_of(name)
                .ok_or_else(|| Error::Schema(format!("line {}: unknown class {name:?}", i + 1)))
        };
        out.push(PredictionRecord {
            gold: class(&line.gold)?,
            pred: class(&line.pred)?,
            id: line.id,
            user_id: line.user_id,
            fold: line.fold,
            timeline_len: line.timeline_len,
        });
    }
    Ok(out)
}

impl ExperimentReport {
    /// Writes the report files into `dir` (created if needed) and returns their paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let prefix = self.mode.as_str();
        let files = [
            ("metrics.txt", self.metrics.to_text()),
            ("metrics.json", self.metrics.to_json()?),
            ("bins.tsv", self.bins.to_tsv()),
            ("predictions.jsonl", predictions_jsonl(&self.predictions, &self.classes)?),
            ("folds.json", serde_json::to_string_pretty(&self.folds)? + "\n"),
        ];
        let mut paths = Vec::with_capacity(files.len());
        for (name, contents) in files {
            let path = dir.join(format!("{prefix}_{name}"));
            write_atomic(&path, contents.as_bytes())?;
            paths.push(path);
        }
        Ok(paths)
    }
}
