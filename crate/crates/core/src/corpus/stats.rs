use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{tally_categories, tally_referrals, Category, CorpusManifest};
use crate::tree::GuidanceTree;

/// Benchmark overview figures for one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub domain: String,
    pub vignettes: usize,
    /// `None` for an empty corpus.
    pub avg_word_count: Option<f64>,
    pub actions: usize,
    pub category_counts: BTreeMap<Category, usize>,
    pub referral: usize,
    pub non_referral: usize,
}

pub fn corpus_stats(manifest: &CorpusManifest, tree: &GuidanceTree) -> CorpusStats {
    let n = manifest.vignettes.len();
    let words: usize = manifest.vignettes.iter().map(|v| v.word_count).sum();
    let referrals = tally_referrals(&manifest.vignettes);
    CorpusStats {
        domain: manifest.header.domain.clone(),
        vignettes: n,
        avg_word_count: (n > 0).then(|| words as f64 / n as f64),
        actions: tree.actions.len(),
        category_counts: tally_categories(&manifest.vignettes),
        referral: referrals.referral,
        non_referral: referrals.non_referral,
    }
}

fn count_cell(n: usize) -> String {
    if n == 0 {
        "NA".into()
    } else {
        n.to_string()
    }
}

fn avg_cell(avg: Option<f64>) -> String {
    avg.map(|a| format!("{a:.1}")).unwrap_or_else(|| "NA".into())
}

/// One column per corpus. Zero counts render as `NA`.
pub fn render_stats_markdown(stats: &[CorpusStats]) -> String {
    let mut rows: Vec<(String, Vec<String>)> = vec![
        ("#Vignettes".into(), stats.iter().map(|s| s.vignettes.to_string()).collect()),
        ("Avg. Word Count".into(), stats.iter().map(|s| avg_cell(s.avg_word_count)).collect()),
        ("#Actions".into(), stats.iter().map(|s| s.actions.to_string()).collect()),
    ];
    for c in Category::ALL {
        rows.push((
            c.title().to_string(),
            stats
                .iter()
                .map(|s| count_cell(s.category_counts.get(&c).copied().unwrap_or(0)))
                .collect(),
        ));
    }
    rows.push(("Referral".into(), stats.iter().map(|s| count_cell(s.referral)).collect()));
    rows.push(("Non-Referral".into(), stats.iter().map(|s| count_cell(s.non_referral)).collect()));

    let mut out = String::from("| |");
    for s in stats {
        out.push_str(&format!(" {} |", s.domain));
    }
    out.push_str("\n|---|");
    for _ in stats {
        out.push_str("---:|");
    }
    out.push('\n');
    for (label, cells) in rows {
        out.push_str(&format!("| {label} |"));
        for cell in cells {
            out.push_str(&format!(" {cell} |"));
        }
        out.push('\n');
    }
    out
}

pub fn render_stats_csv(stats: &[CorpusStats]) -> String {
    let mut out = String::from(
        "domain,vignettes,avg_word_count,actions,single,contrastive,multi,exclusion,referral,non_referral\n",
    );
    for s in stats {
        let count = |c: Category| s.category_counts.get(&c).copied().unwrap_or(0);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            s.domain,
            s.vignettes,
            avg_cell(s.avg_word_count),
            s.actions,
            count(Category::Single),
            count(Category::Contrastive),
            count(Category::Multi),
            count(Category::Exclusion),
            s.referral,
            s.non_referral
        ));
    }
    out
}
