use serde::{Deserialize, Serialize};

/// Named metric values of one run; `None` marks a not-applicable cell.
pub type MetricVector = Vec<(String, Option<f64>)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetric {
    pub name: String,
    pub mean: Option<f64>,
    /// Sample standard deviation (divisor n - 1); 0 for a single run.
    pub std: Option<f64>,
}

impl AggregateMetric {
    pub fn rendered(&self) -> String {
        match (self.mean, self.std) {
            (Some(m), Some(s)) => format_pm(m, s),
            _ => "NA".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub run_count: usize,
    pub single_run: bool,
    pub metrics: Vec<AggregateMetric>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("run {run} does not match the shape of run 0: {detail}")]
pub struct ShapeMismatch {
    pub run: usize,
    pub detail: String,
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

pub fn format_pm(mean: f64, std: f64) -> String {
    format!("{mean:.2} ± {std:.2}")
}

pub fn aggregate_runs(runs: &[MetricVector]) -> Result<AggregateReport, ShapeMismatch> {
    let Some(first) = runs.first() else {
        return Err(ShapeMismatch {
            run: 0,
            detail: "no runs".into(),
        });
    };
    for (r, run) in runs.iter().enumerate().skip(1) {
        if run.len() != first.len() {
            return Err(ShapeMismatch {
                run: r,
                detail: format!("{} metrics instead of {}", run.len(), first.len()),
            });
        }
        for ((a, va), (b, vb)) in first.iter().zip(run) {
            if a != b || va.is_some() != vb.is_some() {
                return Err(ShapeMismatch {
                    run: r,
                    detail: format!("metric `{b}` does not line up with `{a}`"),
                });
            }
        }
    }
    let metrics = first
        .iter()
        .enumerate()
        .map(|(i, (name, v))| {
            let (mean, std) = match v {
                Some(_) => {
                    let values: Vec<f64> = runs.iter().map(|r| r[i].1.expect("shape checked")).collect();
                    let (m, s) = mean_std(&values);
                    (Some(m), Some(s))
                }
                None => (None, None),
            };
            AggregateMetric {
                name: name.clone(),
                mean,
                std,
            }
        })
        .collect();
    Ok(AggregateReport {
        run_count: runs.len(),
        single_run: runs.len() == 1,
        metrics,
    })
}

impl AggregateReport {
    pub fn get(&self, name: &str) -> Option<&AggregateMetric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,mean,std,rendered\n");
        for m in &self.metrics {
            let cell = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "NA".into());
            out.push_str(&format!("{},{},{},{}\n", m.name, cell(m.mean), cell(m.std), m.rendered()));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("# Aggregate over {} run(s)\n\n| Metric | Value |\n|---|---:|\n", self.run_count);
        for m in &self.metrics {
            out.push_str(&format!("| {} | {} |\n", m.name, m.rendered()));
        }
        out.push_str("\nValues are mean ± sample standard deviation (divisor n - 1");
        if self.single_run {
            out.push_str("; single run, reported as 0");
        }
        out.push_str("). Ratios with a zero denominator are taken as 0.\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_values() {
        let (m, s) = mean_std(&[0.70, 0.74]);
        assert!((m - 0.72).abs() < 1e-12);
        assert!((s - 0.028284271247).abs() < 1e-9);
        assert_eq!(format_pm(m, s), "0.72 ± 0.03");
    }

    #[test]
    fn shape_checked() {
        let a = vec![("x".to_string(), Some(1.0))];
        let b = vec![("y".to_string(), Some(1.0))];
        assert!(aggregate_runs(&[a, b]).is_err());
    }
}
