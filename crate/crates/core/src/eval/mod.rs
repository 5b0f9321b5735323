//! Scoring of traversal outcomes against gold labels.
//!
//! Any 0/0 ratio is taken as 0. Multi-class scores are macro averages over
//! the classes that occur among the golds or predictions of the slice being
//! scored; `NoAction` is a class like any other.

mod aggregate;
mod distribution;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Category, LengthCondition, Vignette};
use crate::engine::Outcome;

pub use aggregate::{aggregate_runs, format_pm, mean_std, AggregateMetric, AggregateReport, MetricVector, ShapeMismatch};
pub use distribution::{quantile, traversal_distribution, DifferenceRow, GroupStats, TraversalDistribution};
pub use report::{build_run_report, ReportError, RunReport};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn new(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn prf(c: ConfusionCounts) -> Prf {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    Prf {
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("no prediction for vignette `{0}`")]
    MissingPrediction(String),
}

/// Referral-flag confusion counts over `golds`.
pub fn binary_confusion(
    predictions: &BTreeMap<String, Outcome>,
    golds: &[Vignette],
) -> Result<ConfusionCounts, EvalError> {
    let mut c = ConfusionCounts::default();
    for v in golds {
        let p = predictions
            .get(&v.id)
            .ok_or_else(|| EvalError::MissingPrediction(v.id.clone()))?;
        match (v.gold_referral, p.referral) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences of the class.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub classes: Vec<ClassMetrics>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Macro metrics over `(gold, predicted)` label pairs.
pub fn macro_from_labels<S: AsRef<str>>(pairs: &[(S, S)]) -> MacroMetrics {
    let labels: BTreeSet<&str> = pairs
        .iter()
        .flat_map(|(g, p)| [g.as_ref(), p.as_ref()])
        .collect();
    let mut counts: BTreeMap<&str, ConfusionCounts> =
        labels.iter().map(|l| (*l, ConfusionCounts::default())).collect();
    for (g, p) in pairs {
        let (g, p) = (g.as_ref(), p.as_ref());
        if g == p {
            counts.get_mut(g).expect("label collected").tp += 1;
        } else {
            counts.get_mut(p).expect("label collected").fp += 1;
            counts.get_mut(g).expect("label collected").fn_ += 1;
        }
    }
    let classes: Vec<ClassMetrics> = counts
        .into_iter()
        .map(|(label, c)| {
            let m = prf(c);
            ClassMetrics {
                class_id: label.to_string(),
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                support: c.tp + c.fn_,
            }
        })
        .collect();
    let n = classes.len() as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if classes.is_empty() {
            0.0
        } else {
            classes.iter().map(f).sum::<f64>() / n
        }
    };
    MacroMetrics {
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        f1: mean(|c| c.f1),
        classes,
    }
}

pub fn macro_metrics(
    predictions: &BTreeMap<String, Outcome>,
    golds: &[Vignette],
) -> Result<MacroMetrics, EvalError> {
    let pairs = golds
        .iter()
        .map(|v| {
            let p = predictions
                .get(&v.id)
                .ok_or_else(|| EvalError::MissingPrediction(v.id.clone()))?;
            let gold = v.gold_action.as_deref().unwrap_or(crate::engine::NO_ACTION);
            Ok((gold.to_string(), p.label().to_string()))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(macro_from_labels(&pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    Category,
    LengthCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRow {
    pub label: String,
    pub n: usize,
    /// `None` when the stratum is empty.
    pub metrics: Option<MacroMetrics>,
}

/// Macro metrics per stratum value, every value listed.
pub fn stratify(
    predictions: &BTreeMap<String, Outcome>,
    golds: &[Vignette],
    by: Stratum,
) -> Result<Vec<StratumRow>, EvalError> {
    let labels: Vec<&str> = match by {
        Stratum::Category => Category::ALL.iter().map(|c| c.as_str()).collect(),
        Stratum::LengthCondition => LengthCondition::ALL.iter().map(|c| c.as_str()).collect(),
    };
    labels
        .into_iter()
        .map(|label| {
            let slice: Vec<Vignette> = golds
                .iter()
                .filter(|v| match by {
                    Stratum::Category => v.category.as_str() == label,
                    Stratum::LengthCondition => v.length_condition.as_str() == label,
                })
                .cloned()
                .collect();
            let metrics = if slice.is_empty() {
                None
            } else {
                Some(macro_metrics(predictions, &slice)?)
            };
            Ok(StratumRow {
                label: label.to_string(),
                n: slice.len(),
                metrics,
            })
        })
        .collect()
}
