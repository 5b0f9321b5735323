use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{traversal_difference, MismatchedVignette, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifferenceRow {
    pub gold_steps: usize,
    pub vignette_id: String,
    pub difference: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    pub min: i64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraversalDistribution {
    pub groups: BTreeMap<usize, GroupStats>,
    pub rows: Vec<DifferenceRow>,
    /// Pairs skipped because the predicted traversal aborted.
    pub aborted: usize,
}

/// Linear-interpolation quantile of sorted data (Hyndman and Fan type 7).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Group `predicted - gold` step differences by gold path length.
pub fn traversal_distribution(pairs: &[(&Trace, &Trace)]) -> Result<TraversalDistribution, MismatchedVignette> {
    let mut rows = Vec::new();
    let mut aborted = 0;
    for (pred, gold) in pairs {
        let difference = traversal_difference(pred, gold)?;
        if pred.aborted {
            aborted += 1;
            continue;
        }
        rows.push(DifferenceRow {
            gold_steps: gold.step_count,
            vignette_id: gold.vignette_id.clone(),
            difference,
        });
    }
    rows.sort_by(|a, b| (a.gold_steps, &a.vignette_id).cmp(&(b.gold_steps, &b.vignette_id)));
    let mut by_len: BTreeMap<usize, Vec<i64>> = BTreeMap::new();
    for r in &rows {
        by_len.entry(r.gold_steps).or_default().push(r.difference);
    }
    let groups = by_len
        .into_iter()
        .map(|(k, mut ds)| {
            ds.sort_unstable();
            let sorted: Vec<f64> = ds.iter().map(|&d| d as f64).collect();
            let stats = GroupStats {
                n: ds.len(),
                mean: sorted.iter().sum::<f64>() / ds.len() as f64,
                min: ds[0],
                q1: quantile(&sorted, 0.25),
                median: quantile(&sorted, 0.5),
                q3: quantile(&sorted, 0.75),
                max: ds[ds.len() - 1],
            };
            (k, stats)
        })
        .collect();
    Ok(TraversalDistribution { groups, rows, aborted })
}

impl TraversalDistribution {
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("gold_steps,vignette_id,difference\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.gold_steps, r.vignette_id, r.difference));
        }
        out
    }

    pub fn groups_csv(&self) -> String {
        let mut out = String::from("gold_steps,n,mean,min,q1,median,q3,max\n");
        for (k, g) in &self.groups {
            out.push_str(&format!(
                "{k},{},{:.4},{},{:.4},{:.4},{:.4},{}\n",
                g.n, g.mean, g.min, g.q1, g.median, g.q3, g.max
            ));
        }
        out
    }
}
