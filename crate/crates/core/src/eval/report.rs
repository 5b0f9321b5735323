use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    binary_confusion, macro_metrics, prf, stratify, traversal_distribution, ConfusionCounts,
    EvalError, MacroMetrics, MetricVector, Prf, Stratum, StratumRow, TraversalDistribution,
};
use crate::corpus::{CorpusManifest, Vignette};
use crate::engine::{gold_trace, Outcome, Trace, TraverseError};
use crate::oracle::OracleDescriptor;
use crate::tree::GuidanceTree;

/// Everything computed from one run's traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub domain: String,
    pub run_index: usize,
    pub oracle: Option<OracleDescriptor>,
    pub vignettes: usize,
    pub scored: usize,
    pub aborted: Vec<String>,
    pub queries: usize,
    pub binary_counts: ConfusionCounts,
    pub binary: Prf,
    pub multiclass: MacroMetrics,
    pub by_category: Vec<StratumRow>,
    pub by_length: Vec<StratumRow>,
    pub traversal: TraversalDistribution,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("gold traversal of `{id}` failed: {source}")]
    Gold { id: String, source: TraverseError },
    #[error(transparent)]
    Mismatch(#[from] crate::engine::MismatchedVignette),
    #[error("trace for unknown vignette `{0}`")]
    UnknownVignette(String),
}

pub fn build_run_report(
    tree: &GuidanceTree,
    manifest: &CorpusManifest,
    traces: &[Trace],
    run_index: usize,
) -> Result<RunReport, ReportError> {
    let by_id: BTreeMap<&str, &Trace> = traces.iter().map(|t| (t.vignette_id.as_str(), t)).collect();
    for t in traces {
        if manifest.get(&t.vignette_id).is_none() {
            return Err(ReportError::UnknownVignette(t.vignette_id.clone()));
        }
    }
    let mut predictions: BTreeMap<String, Outcome> = BTreeMap::new();
    let mut scored: Vec<Vignette> = Vec::new();
    let mut aborted = Vec::new();
    let mut golds = Vec::new();
    for v in &manifest.vignettes {
        let trace = by_id
            .get(v.id.as_str())
            .ok_or_else(|| EvalError::MissingPrediction(v.id.clone()))?;
        let gold = gold_trace(tree, &v.id, &v.features).map_err(|source| ReportError::Gold {
            id: v.id.clone(),
            source,
        })?;
        golds.push(((*trace).clone(), gold));
        match (&trace.outcome, trace.aborted) {
            (Some(outcome), false) => {
                predictions.insert(v.id.clone(), outcome.clone());
                scored.push(v.clone());
            }
            _ => aborted.push(v.id.clone()),
        }
    }
    let pairs: Vec<(&Trace, &Trace)> = golds.iter().map(|(p, g)| (p, g)).collect();
    let binary_counts = binary_confusion(&predictions, &scored)?;
    Ok(RunReport {
        domain: tree.domain.clone(),
        run_index,
        oracle: traces.first().map(|t| t.oracle_descriptor.clone()),
        vignettes: manifest.vignettes.len(),
        scored: scored.len(),
        aborted,
        queries: traces.iter().map(Trace::query_count).sum(),
        binary_counts,
        binary: prf(binary_counts),
        multiclass: macro_metrics(&predictions, &scored)?,
        by_category: stratify(&predictions, &scored, Stratum::Category)?,
        by_length: stratify(&predictions, &scored, Stratum::LengthCondition)?,
        traversal: traversal_distribution(&pairs)?,
    })
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "NA".into())
}

impl RunReport {
    /// Flat metric list used for multi-run aggregation.
    pub fn metric_vector(&self) -> MetricVector {
        let mut out: MetricVector = vec![
            ("binary.precision".into(), Some(self.binary.precision)),
            ("binary.recall".into(), Some(self.binary.recall)),
            ("binary.f1".into(), Some(self.binary.f1)),
            ("multiclass.precision".into(), Some(self.multiclass.precision)),
            ("multiclass.recall".into(), Some(self.multiclass.recall)),
            ("multiclass.f1".into(), Some(self.multiclass.f1)),
        ];
        for (prefix, rows) in [("category", &self.by_category), ("length", &self.by_length)] {
            for row in rows {
                let m = row.metrics.as_ref();
                out.push((format!("{prefix}.{}.precision", row.label), m.map(|m| m.precision)));
                out.push((format!("{prefix}.{}.recall", row.label), m.map(|m| m.recall)));
                out.push((format!("{prefix}.{}.f1", row.label), m.map(|m| m.f1)));
            }
        }
        out.push(("aborted".into(), Some(self.aborted.len() as f64)));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,stratum,n,precision,recall,f1\n");
        let b = &self.binary;
        out.push_str(&format!(
            "binary,all,{},{:.4},{:.4},{:.4}\n",
            self.scored, b.precision, b.recall, b.f1
        ));
        let m = &self.multiclass;
        out.push_str(&format!(
            "multiclass,all,{},{:.4},{:.4},{:.4}\n",
            self.scored, m.precision, m.recall, m.f1
        ));
        for (prefix, rows) in [("category", &self.by_category), ("length", &self.by_length)] {
            for row in rows {
                let mm = row.metrics.as_ref();
                out.push_str(&format!(
                    "multiclass,{prefix}={},{},{},{},{}\n",
                    row.label,
                    row.n,
                    cell(mm.map(|m| m.precision)),
                    cell(mm.map(|m| m.recall)),
                    cell(mm.map(|m| m.f1))
                ));
            }
        }
        for c in &self.multiclass.classes {
            out.push_str(&format!(
                "class,{},{},{:.4},{:.4},{:.4}\n",
                c.class_id, c.support, c.precision, c.recall, c.f1
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("# Run {} ({})\n\n", self.run_index, self.domain);
        if let Some(o) = &self.oracle {
            out.push_str(&format!(
                "Oracle: {} (config {}, prompt {})\n\n",
                o.backend, o.config_hash, o.prompt_version
            ));
        }
        out.push_str(&format!(
            "Vignettes: {}, scored: {}, aborted: {}, oracle queries: {}\n\n",
            self.vignettes,
            self.scored,
            self.aborted.len(),
            self.queries
        ));
        let c = &self.binary_counts;
        out.push_str("## Referral classification\n\n| Task | Precision | Recall | F1 |\n|---|---:|---:|---:|\n");
        out.push_str(&format!(
            "| Binary | {:.2} | {:.2} | {:.2} |\n| Multi-class | {:.2} | {:.2} | {:.2} |\n\n",
            self.binary.precision,
            self.binary.recall,
            self.binary.f1,
            self.multiclass.precision,
            self.multiclass.recall,
            self.multiclass.f1
        ));
        out.push_str(&format!("Binary counts: TP {} FP {} FN {} TN {}\n\n", c.tp, c.fp, c.fn_, c.tn));
        for (title, rows) in [("category", &self.by_category), ("length condition", &self.by_length)] {
            out.push_str(&format!(
                "## Multi-class by {title}\n\n| Stratum | n | Precision | Recall | F1 |\n|---|---:|---:|---:|---:|\n"
            ));
            for row in rows {
                match &row.metrics {
                    Some(m) => out.push_str(&format!(
                        "| {} | {} | {:.2} | {:.2} | {:.2} |\n",
                        row.label, row.n, m.precision, m.recall, m.f1
                    )),
                    None => out.push_str(&format!("| {} | 0 | NA | NA | NA |\n", row.label)),
                }
            }
            out.push('\n');
        }
        out.push_str("## Traversal difference by optimal path length\n\n| Gold steps | n | Mean | Min | Q1 | Median | Q3 | Max |\n|---:|---:|---:|---:|---:|---:|---:|---:|\n");
        for (k, g) in &self.traversal.groups {
            out.push_str(&format!(
                "| {k} | {} | {:.2} | {} | {:.2} | {:.2} | {:.2} | {} |\n",
                g.n, g.mean, g.min, g.q1, g.median, g.q3, g.max
            ));
        }
        out.push_str("\nRatios with a zero denominator are taken as 0. Aborted traversals are excluded from all metrics.\n");
        out
    }
}
