//! Synthetic vignette corpora: data format, loading, category contracts,
//! generation and summary statistics.

mod contract;
mod generate;
mod stats;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::tree::{tree_hash, GuidanceTree};

pub use contract::{classify, mapped_action, sub_threshold, validate_vignette, Violation};
pub use generate::{generate_specs, GenerationPlan, InfeasibleCategory};
pub use stats::{corpus_stats, render_stats_csv, render_stats_markdown, CorpusStats};
pub use text::{
    emit_generation_prompt, synthesize_text, FeatureTemplate, KeywordOracle, TemplateError,
    TemplateSet, TextError, BANNED_PHRASES,
};

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error(transparent)]
    Infeasible(#[from] InfeasibleCategory),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{vignette_id}: {source}")]
    Text { vignette_id: String, source: TextError },
}

/// Specs from [`generate_specs`] with narrative text filled in. Vignette `i`
/// uses text seed `seed::derive(plan.seed, i)`.
pub fn generate_vignettes(
    tree: &GuidanceTree,
    plan: &GenerationPlan,
    templates: &TemplateSet,
) -> Result<Vec<Vignette>, GenerateError> {
    templates.check()?;
    templates.covers(tree)?;
    let mut specs = generate_specs(tree, plan)?;
    for (i, v) in specs.iter_mut().enumerate() {
        let text = synthesize_text(v, templates, v.length_condition, crate::seed::derive(plan.seed, i as u64))
            .map_err(|source| GenerateError::Text {
                vignette_id: v.id.clone(),
                source,
            })?;
        v.word_count = word_count(&text);
        v.text = text;
    }
    Ok(specs)
}

pub const CORPUS_FORMAT: &str = "cpg-corpus/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Single,
    Multi,
    Contrastive,
    Exclusion,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Single,
        Category::Contrastive,
        Category::Multi,
        Category::Exclusion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Single => "single",
            Category::Multi => "multi",
            Category::Contrastive => "contrastive",
            Category::Exclusion => "exclusion",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Category::Single => "Single-criteria",
            Category::Multi => "Multi-criteria",
            Category::Contrastive => "Contrastive-criteria",
            Category::Exclusion => "Exclusion-criteria",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthCondition {
    Unconstrained,
    Short,
    Medium,
    Long,
}

impl LengthCondition {
    pub const ALL: [LengthCondition; 4] = [
        LengthCondition::Unconstrained,
        LengthCondition::Short,
        LengthCondition::Medium,
        LengthCondition::Long,
    ];

    /// Short is at most 100 words, Long at least 200, Medium strictly between.
    pub fn admits(self, word_count: usize) -> bool {
        match self {
            LengthCondition::Unconstrained => true,
            LengthCondition::Short => word_count <= 100,
            LengthCondition::Medium => word_count > 100 && word_count < 200,
            LengthCondition::Long => word_count >= 200,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LengthCondition::Unconstrained => "unconstrained",
            LengthCondition::Short => "short",
            LengthCondition::Medium => "medium",
            LengthCondition::Long => "long",
        }
    }
}

impl fmt::Display for LengthCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vignette {
    pub id: String,
    pub domain: String,
    pub category: Category,
    pub length_condition: LengthCondition,
    pub text: String,
    pub word_count: usize,
    /// Gold assignment. Absent features are not mentioned in the text.
    pub features: BTreeMap<String, bool>,
    pub gold_action: Option<String>,
    pub gold_referral: bool,
    pub gold_path_length: usize,
}

impl Vignette {
    pub fn positives(&self) -> BTreeSet<&str> {
        self.features
            .iter()
            .filter(|(_, &v)| v)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    pub fn negatives(&self) -> BTreeSet<&str> {
        self.features
            .iter()
            .filter(|(_, &v)| !v)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferralCounts {
    pub referral: usize,
    pub non_referral: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusHeader {
    pub format: String,
    pub domain: String,
    pub tree: String,
    pub tree_hash: String,
    pub category_counts: BTreeMap<Category, usize>,
    pub referral_counts: ReferralCounts,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    pub header: CorpusHeader,
    pub vignettes: Vec<Vignette>,
}

pub fn tally_categories(vignettes: &[Vignette]) -> BTreeMap<Category, usize> {
    let mut counts: BTreeMap<Category, usize> = Category::ALL.iter().map(|c| (*c, 0)).collect();
    for v in vignettes {
        *counts.entry(v.category).or_default() += 1;
    }
    counts
}

pub fn tally_referrals(vignettes: &[Vignette]) -> ReferralCounts {
    let referral = vignettes.iter().filter(|v| v.gold_referral).count();
    ReferralCounts {
        referral,
        non_referral: vignettes.len() - referral,
    }
}

impl CorpusManifest {
    /// Build a manifest whose header tallies match `vignettes`.
    pub fn new(tree: &GuidanceTree, tree_path: &str, vignettes: Vec<Vignette>) -> Self {
        CorpusManifest {
            header: CorpusHeader {
                format: CORPUS_FORMAT.to_string(),
                domain: tree.domain.clone(),
                tree: tree_path.to_string(),
                tree_hash: tree_hash(tree),
                category_counts: tally_categories(&vignettes),
                referral_counts: tally_referrals(&vignettes),
            },
            vignettes,
        }
    }

    /// JSONL rendering: header line, then one line per vignette.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = serde_json::to_value(&self.header).expect("header serializes");
        out.push_str(&crate::json::to_canonical_line(&header));
        out.push('\n');
        for v in &self.vignettes {
            let value = serde_json::to_value(v).expect("vignette serializes");
            out.push_str(&crate::json::to_canonical_line(&value));
            out.push('\n');
        }
        out
    }

    pub fn get(&self, id: &str) -> Option<&Vignette> {
        self.vignettes.iter().find(|v| v.id == id)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("corpus is empty: missing header line")]
    MissingHeader,
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("{} schema violation(s), first: {}", .0.len(), .0[0])]
    SchemaViolation(Vec<Violation>),
}

impl CorpusError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            CorpusError::SchemaViolation(v) => v,
            _ => &[],
        }
    }
}

pub fn load_corpus(path: impl AsRef<Path>, tree: &GuidanceTree) -> Result<CorpusManifest, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text, tree)
}

/// Parse and check a corpus document against `tree`. Every vignette is
/// checked; all violations are reported together.
pub fn parse_corpus(text: &str, tree: &GuidanceTree) -> Result<CorpusManifest, CorpusError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(CorpusError::MissingHeader)?;
    let header: CorpusHeader =
        serde_json::from_str(first).map_err(|e| CorpusError::BadHeader(e.to_string()))?;
    if header.format != CORPUS_FORMAT {
        return Err(CorpusError::BadHeader(format!(
            "unsupported format `{}`, expected `{CORPUS_FORMAT}`",
            header.format
        )));
    }
    if header.domain != tree.domain {
        return Err(CorpusError::BadHeader(format!(
            "corpus domain `{}` does not match tree domain `{}`",
            header.domain, tree.domain
        )));
    }
    let expected_hash = tree_hash(tree);
    if header.tree_hash != expected_hash {
        return Err(CorpusError::BadHeader(format!(
            "tree hash {} does not match the supplied tree ({expected_hash})",
            header.tree_hash
        )));
    }

    let mut violations = Vec::new();
    let mut vignettes = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in lines {
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                violations.push(Violation::new(&format!("line {}", i + 1), "record", e.to_string()));
                continue;
            }
        };
        let id = value
            .get("id")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .unwrap_or_else(|| format!("line {}", i + 1));
        let v: Vignette = match serde_json::from_value(value) {
            Ok(v) => v,
            Err(e) => {
                violations.push(Violation::new(&id, "record", e.to_string()));
                continue;
            }
        };
        if !seen.insert(v.id.clone()) {
            violations.push(Violation::new(&v.id, "id", "duplicate vignette id".into()));
        }
        if v.domain != tree.domain {
            violations.push(Violation::new(
                &v.id,
                "domain",
                format!("`{}` differs from corpus domain `{}`", v.domain, tree.domain),
            ));
        }
        violations.extend(validate_vignette(tree, &v));
        vignettes.push(v);
    }

    let categories = tally_categories(&vignettes);
    let mut declared = header.category_counts.clone();
    for c in Category::ALL {
        declared.entry(c).or_insert(0);
    }
    if declared != categories {
        violations.push(Violation::new(
            "header",
            "category_counts",
            format!("declared {declared:?}, recomputed {categories:?}"),
        ));
    }
    let referrals = tally_referrals(&vignettes);
    if header.referral_counts != referrals {
        violations.push(Violation::new(
            "header",
            "referral_counts",
            format!("declared {:?}, recomputed {referrals:?}", header.referral_counts),
        ));
    }
    if !violations.is_empty() {
        return Err(CorpusError::SchemaViolation(violations));
    }
    Ok(CorpusManifest { header, vignettes })
}
