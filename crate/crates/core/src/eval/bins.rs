//! Macro metrics broken down by how much timeline each author has.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{class_prf, format_metric, ConfusionMatrix};
use crate::error::{Error, Result};

/// Inclusive timeline-length ranges reported.
pub const TIMELINE_BINS: [(usize, usize); 4] = [(0, 5), (6, 10), (11, 15), (16, 20)];

/// Outcome for one evaluated tweet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub user_id: String,
    pub fold: usize,
    pub gold: usize,
    pub pred: usize,
    pub timeline_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub lo: usize,
    pub hi: usize,
    pub count: usize,
    /// NaN when undefined.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl BinRow {
    pub fn label(&self) -> String {
        format!("{}-{}", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub rows: Vec<BinRow>,
}

fn bin_index(timeline_len: usize) -> usize {
    TIMELINE_BINS
        .iter()
        .position(|&(_, hi)| timeline_len <= hi)
        .unwrap_or(TIMELINE_BINS.len() - 1)
}

/// Mean over classes in which any undefined class value makes the mean
/// undefined.
fn strict_mean(values: impl Iterator<Item = Option<f64>>, n: usize) -> f64 {
    values.map(|v| v.unwrap_or(f64::NAN)).sum::<f64>() / n as f64
}

/// Groups `records` into the fixed timeline-length bins and reports macro
/// P/R/F1 within each. A class that is never predicted (or never gold) in a
/// bin makes that bin's macro precision (or recall) and F1 NaN; empty bins are
/// all NaN.
pub fn bin_by_timeline_length(records: &[PredictionRecord], n_classes: usize) -> Result<BinReport> {
    if let Some(r) = records.iter().find(|r| r.gold >= n_classes || r.pred >= n_classes) {
        return Err(Error::Input(format!("record {} has a label outside {n_classes} classes", r.id)));
    }
    let mut cms = vec![ConfusionMatrix::new(n_classes); TIMELINE_BINS.len()];
    for r in records {
        cms[bin_index(r.timeline_len)].add(r.gold, r.pred);
    }
    let rows = TIMELINE_BINS
        .iter()
        .zip(&cms)
        .map(|(&(lo, hi), cm)| {
            let per_class: Vec<_> = (0..n_classes)
                .map(|c| class_prf(cm.tp(c), cm.fp(c), cm.fn_(c)))
                .collect();
            BinRow {
                lo,
                hi,
                count: cm.total(),
                precision: strict_mean(per_class.iter().map(|p| p.precision), n_classes),
                recall: strict_mean(per_class.iter().map(|p| p.recall), n_classes),
                f1: strict_mean(per_class.iter().map(|p| p.f1), n_classes),
            }
        })
        .collect();
    Ok(BinReport { rows })
}

impl BinReport {
    pub fn total(&self) -> usize {
        self.rows.iter().map(|r| r.count).sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("bin\tcount\tprecision\trecall\tf1\n");
        let cell = |v: f64| format_metric((!v.is_nan()).then_some(v));
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.label(),
                r.count,
                cell(r.precision),
                cell(r.recall),
                cell(r.f1)
            )
            .unwrap();
        }
        out
    }
}
