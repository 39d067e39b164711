use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are gold classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<usize>>) -> Result<Self> {
        let n = counts.len();
        if n == 0 || counts.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("confusion matrix must be square and non-empty".into()));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn add(&mut self, gold: usize, pred: usize) {
        self.counts[gold][pred] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in row.iter_mut().zip(other_row) {
                *a += b;
            }
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn tp(&self, c: usize) -> usize {
        self.counts[c][c]
    }

    pub fn fp(&self, c: usize) -> usize {
        self.counts.iter().map(|r| r[c]).sum::<usize>() - self.tp(c)
    }

    pub fn fn_(&self, c: usize) -> usize {
        self.counts[c].iter().sum::<usize>() - self.tp(c)
    }

    pub fn support(&self, c: usize) -> usize {
        self.counts[c].iter().sum()
    }
}

/// Percentages; `None` where a denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// Per-class precision, recall and F1, each undefined when its denominator is
/// zero (for F1 that includes `P + R = 0`, i.e. `tp = 0`).
pub fn class_prf(tp: usize, fp: usize, fn_: usize) -> Prf {
    let precision = percent(tp, tp + fp);
    let recall = percent(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(_), Some(_)) if tp > 0 => percent(2 * tp, 2 * tp + fp + fn_),
        _ => None,
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

/// Micro averages from pooled counts (all three equal accuracy) and macro
/// averages as unweighted class means with undefined values counted as 0.
pub fn micro_macro(cm: &ConfusionMatrix) -> (Prf, Prf) {
    let total = cm.total();
    let trace = cm.trace();
    let errors = total - trace;
    let micro = Prf {
        precision: percent(trace, trace + errors),
        recall: percent(trace, trace + errors),
        f1: percent(2 * trace, 2 * trace + 2 * errors),
    };
    let per_class: Vec<Prf> = (0..cm.n_classes())
        .map(|c| class_prf(cm.tp(c), cm.fp(c), cm.fn_(c)))
        .collect();
    (micro, macro_mean(&per_class))
}

pub(crate) fn macro_mean(per_class: &[Prf]) -> Prf {
    let n = per_class.len() as f64;
    let mean = |get: fn(&Prf) -> Option<f64>| {
        Some(per_class.iter().map(|p| get(p).unwrap_or(0.0)).sum::<f64>() / n)
    };
    Prf {
        precision: mean(|p| p.precision),
        recall: mean(|p| p.recall),
        f1: mean(|p| p.f1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: usize,
    #[serde(flatten)]
    pub prf: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_avg: Prf,
    pub total: usize,
    pub confusion: ConfusionMatrix,
}

pub fn metrics_from_confusion(cm: &ConfusionMatrix, class_names: &[String]) -> Result<MetricsReport> {
    if class_names.len() != cm.n_classes() {
        return Err(Error::Shape(format!(
            "{} class names for a {}-class confusion matrix",
            class_names.len(),
            cm.n_classes()
        )));
    }
    let classes = class_names
        .iter()
        .enumerate()
        .map(|(c, name)| ClassMetrics {
            class: name.clone(),
            support: cm.support(c),
            prf: class_prf(cm.tp(c), cm.fp(c), cm.fn_(c)),
        })
        .collect();
    let (micro, macro_avg) = micro_macro(cm);
    Ok(MetricsReport {
        classes,
        micro,
        macro_avg,
        total: cm.total(),
        confusion: cm.clone(),
    })
}

/// One decimal place, or `NAN` for undefined values.
pub fn format_metric(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.1}"),
        _ => "NAN".into(),
    }
}

impl MetricsReport {
    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let width = self
            .classes
            .iter()
            .map(|c| c.class.len())
            .chain(["Micro Avg".len()])
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        writeln!(out, "{:<width$}  {:>6}  {:>6}  {:>6}  {:>7}", "", "P", "R", "F1", "support").unwrap();
        let mut row = |name: &str, prf: &Prf, support: usize| {
            writeln!(
                out,
                "{:<width$}  {:>6}  {:>6}  {:>6}  {:>7}",
                name,
                format_metric(prf.precision),
                format_metric(prf.recall),
                format_metric(prf.f1),
                support
            )
            .unwrap();
        };
        for c in &self.classes {
            row(&c.class, &c.prf, c.support);
        }
        row("Micro Avg", &self.micro, self.total);
        row("Macro Avg", &self.macro_avg, self.total);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let p = class_prf(3, 1, 1);
        assert_eq!((p.precision, p.recall, p.f1), (Some(75.0), Some(75.0), Some(75.0)));
    }

    #[test]
    fn never_predicted_class() {
        let p = class_prf(0, 0, 4);
        assert_eq!((p.precision, p.recall, p.f1), (None, Some(0.0), None));
        let p = class_prf(0, 2, 4);
        assert_eq!((p.precision, p.recall, p.f1), (Some(0.0), Some(0.0), None));
    }

    #[test]
    fn perfect_classifier() {
        let cm = ConfusionMatrix::from_counts(vec![vec![4, 0, 0], vec![0, 2, 0], vec![0, 0, 7]]).unwrap();
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let r = metrics_from_confusion(&cm, &names).unwrap();
        for prf in r.classes.iter().map(|c| c.prf).chain([r.micro, r.macro_avg]) {
            assert_eq!((prf.precision, prf.recall, prf.f1), (Some(100.0), Some(100.0), Some(100.0)));
        }
    }

    #[test]
    fn macro_of_two() {
        // Class F1 values are 80 and 60.
        let cm = ConfusionMatrix::from_counts(vec![vec![8, 2], vec![2, 3]]).unwrap();
        let (micro, macro_avg) = micro_macro(&cm);
        assert_eq!(micro.precision, Some(100.0 * 11.0 / 15.0));
        assert_eq!(micro.precision, micro.recall);
        assert_eq!(micro.precision, micro.f1);
        assert_eq!(macro_avg.f1, Some((80.0 + 60.0) / 2.0));
    }

    #[test]
    fn text_rendering() {
        let cm = ConfusionMatrix::from_counts(vec![vec![3, 0], vec![2, 0]]).unwrap();
        let names = vec!["none".to_string(), "hate".to_string()];
        let text = metrics_from_confusion(&cm, &names).unwrap().to_text();
        let hate = text.lines().find(|l| l.starts_with("hate")).unwrap();
        assert_eq!(hate.split_whitespace().collect::<Vec<_>>(), ["hate", "NAN", "0.0", "NAN", "2"]);
        let micro = text.lines().find(|l| l.starts_with("Micro")).unwrap();
        assert_eq!(micro.split_whitespace().collect::<Vec<_>>(), ["Micro", "Avg", "60.0", "60.0", "60.0", "5"]);
        let macro_line = text.lines().find(|l| l.starts_with("Macro")).unwrap();
        assert!(macro_line.contains("30.0"));
    }
}
