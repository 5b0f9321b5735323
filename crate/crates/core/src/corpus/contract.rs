use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{word_count, Category, Vignette};
use crate::engine::gold_trace;
use crate::tree::{GuidanceTree, NodeKind};

/// One failed check on one vignette.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub vignette_id: String,
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(vignette_id: &str, field: &str, message: String) -> Self {
        Violation {
            vignette_id: vignette_id.to_string(),
            field: field.to_string(),
            message,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.vignette_id, self.field, self.message)
    }
}

/// The action a feature leads to on its own: the gold outcome of a vignette
/// where only `feature` is positive, provided that path takes at least one
/// positive branch. Features gated behind other findings, or that cannot
/// meet a threshold alone, map to nothing.
pub fn mapped_action(tree: &GuidanceTree, feature: &str) -> Option<String> {
    let features = BTreeMap::from([(feature.to_string(), true)]);
    let trace = gold_trace(tree, "", &features).ok()?;
    if !trace.steps.iter().any(|s| s.branch.is_positive()) {
        return None;
    }
    trace.outcome?.action
}

/// True when every positive feature is a multi-node criterion and no multi
/// node reaches its threshold.
pub fn sub_threshold(tree: &GuidanceTree, positives: &BTreeSet<&str>) -> bool {
    if positives.is_empty() {
        return false;
    }
    let mut in_multi = BTreeSet::new();
    for node in tree.nodes.values() {
        match &node.kind {
            NodeKind::Simple { feature, .. } => {
                if positives.contains(feature.as_str()) {
                    return false;
                }
            }
            NodeKind::Multi {
                criteria, threshold, ..
            } => {
                let hits = criteria
                    .iter()
                    .filter(|c| positives.contains(c.feature.as_str()))
                    .inspect(|c| {
                        in_multi.insert(c.feature.as_str());
                    })
                    .count();
                if hits >= *threshold as usize {
                    return false;
                }
            }
        }
    }
    positives.iter().all(|f| in_multi.contains(f))
}

fn priority_key(tree: &GuidanceTree, action: &str) -> (u32, String) {
    let p = tree.action(action).and_then(|a| a.priority).unwrap_or(u32::MAX);
    (p, action.to_string())
}

/// Check a vignette's category contract only; `None` when it holds.
fn category_problem(tree: &GuidanceTree, v: &Vignette) -> Option<String> {
    let positives = v.positives();
    let negatives = v.negatives();
    let below = sub_threshold(tree, &positives);
    let gold_referral = v
        .gold_action
        .as_deref()
        .and_then(|a| tree.action(a))
        .is_some_and(|a| a.referral);
    match v.category {
        Category::Single => {
            if positives.len() != 1 {
                return Some(format!("single needs exactly 1 positive feature, has {}", positives.len()));
            }
            if !negatives.is_empty() {
                return Some("single must not deny any feature".into());
            }
            if below {
                return Some("single positive falls below every threshold".into());
            }
        }
        Category::Multi => {
            if positives.len() < 2 {
                return Some(format!("multi needs at least 2 positive features, has {}", positives.len()));
            }
            if !negatives.is_empty() {
                return Some("multi must not deny any feature".into());
            }
            if below {
                return Some("multi positives fall below every threshold".into());
            }
            let actions: BTreeSet<String> = positives
                .iter()
                .filter_map(|f| mapped_action(tree, f))
                .collect();
            if actions.len() < 2 {
                return Some("multi positives must lead to at least 2 distinct actions".into());
            }
            let top = actions
                .iter()
                .min_by_key(|a| priority_key(tree, a))
                .expect("non-empty");
            if v.gold_action.as_deref() != Some(top.as_str()) {
                return Some(format!(
                    "multi gold action must be the highest-priority candidate `{top}`, found {:?}",
                    v.gold_action
                ));
            }
        }
        Category::Contrastive => {
            if positives.is_empty() {
                return Some("contrastive needs at least 1 positive feature".into());
            }
            if negatives.is_empty() {
                return Some("contrastive needs at least 1 explicitly denied feature".into());
            }
            if below {
                return Some("contrastive positives fall below every threshold".into());
            }
        }
        Category::Exclusion => {
            if !positives.is_empty() && !below {
                return Some("exclusion positives must stay below every threshold".into());
            }
            if gold_referral {
                return Some("exclusion gold must be no action or a non-referral action".into());
            }
        }
    }
    None
}

/// Categories whose contract `v`'s features and gold label satisfy.
pub fn classify(tree: &GuidanceTree, v: &Vignette) -> Vec<Category> {
    Category::ALL
        .into_iter()
        .filter(|&c| {
            let probe = Vignette {
                category: c,
                ..v.clone()
            };
            category_problem(tree, &probe).is_none()
        })
        .collect()
}

pub fn validate_vignette(tree: &GuidanceTree, v: &Vignette) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut fail = |field: &str, message: String| out.push(Violation::new(&v.id, field, message));

    let counted = word_count(&v.text);
    if counted != v.word_count {
        fail("word_count", format!("declared {}, text has {counted}", v.word_count));
    }
    if !v.length_condition.admits(v.word_count) {
        fail(
            "length_condition",
            format!("{} words outside the {} band", v.word_count, v.length_condition),
        );
    }
    if v.gold_action.is_none() && v.gold_referral {
        fail("gold_referral", "no-action gold cannot be a referral".into());
    }
    let known = tree.features();
    for f in v.features.keys() {
        if !known.contains(f.as_str()) {
            fail("features", format!("`{f}` is not asked anywhere in the tree"));
        }
    }
    let positives: Vec<&str> = v.positives().into_iter().collect();
    for (i, a) in positives.iter().enumerate() {
        for b in &positives[i + 1..] {
            if tree.mutually_exclusive(a, b) {
                fail("features", format!("`{a}` and `{b}` cannot both be present"));
            }
        }
    }

    match gold_trace(tree, &v.id, &v.features) {
        Ok(trace) => {
            let outcome = trace.outcome.expect("completed traces carry an outcome");
            if outcome.action != v.gold_action {
                fail(
                    "gold_action",
                    format!("declared {:?}, gold traversal gives {:?}", v.gold_action, outcome.action),
                );
            }
            if outcome.referral != v.gold_referral {
                fail(
                    "gold_referral",
                    format!("declared {}, gold traversal gives {}", v.gold_referral, outcome.referral),
                );
            }
            if trace.step_count != v.gold_path_length {
                fail(
                    "gold_path_length",
                    format!("declared {}, gold traversal takes {}", v.gold_path_length, trace.step_count),
                );
            }
        }
        Err(e) => fail("gold_action", format!("gold traversal failed: {e}")),
    }

    if let Some(problem) = category_problem(tree, v) {
        fail("category", problem);
    }
    out
}
