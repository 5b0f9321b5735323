use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::contract::{classify, mapped_action};
use super::{Category, LengthCondition, Vignette};
use crate::engine::gold_trace;
use crate::tree::{GuidanceTree, NodeKind, Target};

type Features = BTreeMap<String, bool>;

/// How many vignettes of each kind to draw from a tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationPlan {
    pub seed: u64,
    pub counts: BTreeMap<Category, usize>,
    /// Assigned round-robin in generation order.
    #[serde(default = "default_lengths")]
    pub length_conditions: Vec<LengthCondition>,
    #[serde(default = "default_multi_positives")]
    pub multi_positives: usize,
    #[serde(default = "default_one")]
    pub contrastive_negatives: usize,
    /// Clinically confusable feature pairs, used for contrastive denials.
    #[serde(default)]
    pub confusion_pairs: Vec<(String, String)>,
    /// Restrict single, multi and contrastive vignettes to referral golds.
    #[serde(default)]
    pub referral_positives: bool,
}

fn default_lengths() -> Vec<LengthCondition> {
    vec![LengthCondition::Unconstrained]
}

fn default_multi_positives() -> usize {
    2
}

fn default_one() -> usize {
    1
}

impl GenerationPlan {
    pub fn new(seed: u64, counts: &[(Category, usize)]) -> Self {
        GenerationPlan {
            seed,
            counts: counts.iter().copied().collect(),
            length_conditions: default_lengths(),
            multi_positives: 2,
            contrastive_negatives: 1,
            confusion_pairs: Vec::new(),
            referral_positives: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{category} vignettes are infeasible for this tree: {reason}")]
pub struct InfeasibleCategory {
    pub category: Category,
    pub reason: String,
}

/// Features in the order nodes are first reached, criteria in listed order.
fn feature_order(tree: &GuidanceTree) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for id in tree.preorder() {
        for (f, _) in tree.nodes[id].questions() {
            if seen.insert(f) {
                out.push(f.to_string());
            }
        }
    }
    out
}

fn positives(set: &[&str]) -> Features {
    set.iter().map(|f| (f.to_string(), true)).collect()
}

fn consistent(tree: &GuidanceTree, features: &Features) -> bool {
    let pos: Vec<&String> = features.iter().filter(|(_, &v)| v).map(|(k, _)| k).collect();
    pos.iter()
        .enumerate()
        .all(|(i, a)| pos[i + 1..].iter().all(|b| !tree.mutually_exclusive(a, b)))
}

fn combinations(items: &[String], k: usize, cap: usize) -> Vec<Vec<&str>> {
    fn go<'a>(items: &'a [String], k: usize, start: usize, cur: &mut Vec<&'a str>, out: &mut Vec<Vec<&'a str>>, cap: usize) {
        if out.len() >= cap {
            return;
        }
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(&items[i]);
            go(items, k, i + 1, cur, out, cap);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(items, k, 0, &mut Vec::new(), &mut out, cap);
    out
}

/// Threshold-sized windows of each multi node's criteria, rotated.
fn multi_windows(tree: &GuidanceTree, size_of: impl Fn(usize) -> usize) -> Vec<Vec<&str>> {
    let mut out = Vec::new();
    for id in tree.preorder() {
        if let NodeKind::Multi {
            criteria, threshold, ..
        } = &tree.nodes[id].kind
        {
            let n = criteria.len();
            let k = size_of(*threshold as usize);
            if k == 0 || k > n {
                continue;
            }
            for r in 0..n {
                out.push((0..k).map(|j| criteria[(r + j) % n].feature.as_str()).collect());
            }
        }
    }
    out
}

/// For each root-to-action path, the features that must be positive to
/// follow it (the first `threshold` criteria at met multi nodes).
fn path_positive_sets(tree: &GuidanceTree, cap: usize) -> Vec<Features> {
    fn walk(tree: &GuidanceTree, id: &str, pos: &mut Vec<String>, depth: usize, out: &mut Vec<Features>, cap: usize) {
        let Some(node) = tree.node(id) else { return };
        if out.len() >= cap || depth > tree.nodes.len() {
            return;
        }
        for (branch, target) in node.exits() {
            let added: Vec<String> = if branch.is_positive() {
                match &node.kind {
                    NodeKind::Simple { feature, .. } => vec![feature.clone()],
                    NodeKind::Multi {
                        criteria, threshold, ..
                    } => criteria.iter().take(*threshold as usize).map(|c| c.feature.clone()).collect(),
                }
            } else {
                Vec::new()
            };
            let mark = pos.len();
            pos.extend(added);
            match target {
                Target::Action(_) if !pos.is_empty() => {
                    out.push(pos.iter().map(|f| (f.clone(), true)).collect());
                }
                Target::Node(next) => walk(tree, next, pos, depth + 1, out, cap),
                _ => {}
            }
            pos.truncate(mark);
        }
    }
    let mut out = Vec::new();
    walk(tree, &tree.root, &mut Vec::new(), 0, &mut out, cap);
    out
}

/// Ordered denial candidates for a positive set.
fn denial_candidates(tree: &GuidanceTree, plan: &GenerationPlan, order: &[String], pos: &Features) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let push = |f: &str, out: &mut Vec<String>| {
        if !pos.contains_key(f) && !out.iter().any(|x| x == f) {
            out.push(f.to_string());
        }
    };
    for node in tree.nodes.values() {
        if let NodeKind::Multi { criteria, .. } = &node.kind {
            if criteria.iter().any(|c| pos.contains_key(&c.feature)) {
                for c in criteria {
                    push(&c.feature, &mut out);
                }
            }
        }
    }
    for (a, b) in &plan.confusion_pairs {
        if pos.contains_key(a) {
            push(b, &mut out);
        }
        if pos.contains_key(b) {
            push(a, &mut out);
        }
    }
    if let Ok(trace) = gold_trace(tree, "", pos) {
        for step in trace.steps.iter().rev() {
            if !step.branch.is_positive() {
                for q in &step.questions {
                    push(&q.feature_id, &mut out);
                }
            }
        }
    }
    for (i, f) in order.iter().enumerate() {
        if pos.contains_key(f) {
            if let Some(next) = order.get(i + 1) {
                push(next, &mut out);
            }
            if i > 0 {
                push(&order[i - 1], &mut out);
            }
        }
    }
    out
}

fn candidates(tree: &GuidanceTree, plan: &GenerationPlan, category: Category) -> Vec<Features> {
    let order = feature_order(tree);
    let mapped: Vec<String> = order
        .iter()
        .filter(|f| mapped_action(tree, f).is_some())
        .cloned()
        .collect();
    match category {
        Category::Single => mapped.iter().map(|f| positives(&[f.as_str()])).collect(),
        Category::Multi => combinations(&mapped, plan.multi_positives.max(2), 20_000)
            .iter()
            .map(|set| positives(set))
            .collect(),
        Category::Contrastive => {
            let mut bases: Vec<Features> = mapped.iter().map(|f| positives(&[f.as_str()])).collect();
            bases.extend(multi_windows(tree, |t| t).iter().map(|w| positives(w)));
            bases.extend(path_positive_sets(tree, 2_000));
            let mut out = Vec::new();
            for base in bases {
                let denials = denial_candidates(tree, plan, &order, &base);
                let k = plan.contrastive_negatives.max(1);
                if denials.len() < k {
                    continue;
                }
                for offset in 0..(denials.len() - k + 1).min(3) {
                    let mut f = base.clone();
                    for d in &denials[offset..offset + k] {
                        f.insert(d.clone(), false);
                    }
                    out.push(f);
                }
            }
            out
        }
        Category::Exclusion => {
            let mut out = Vec::new();
            out.push(order.iter().map(|f| (f.clone(), false)).collect());
            for i in 0..order.len() {
                let window: Features = order
                    .iter()
                    .cycle()
                    .skip(i)
                    .take(2.min(order.len()))
                    .map(|f| (f.clone(), false))
                    .collect();
                out.push(window);
            }
            for w in multi_windows(tree, |t| t.saturating_sub(1)) {
                let base = positives(&w);
                out.push(base.clone());
                let mut denied = base.clone();
                for node in tree.nodes.values() {
                    if let NodeKind::Multi { criteria, .. } = &node.kind {
                        if criteria.iter().any(|c| base.contains_key(&c.feature)) {
                            for c in criteria {
                                denied.entry(c.feature.clone()).or_insert(false);
                            }
                        }
                    }
                }
                out.push(denied);
            }
            out
        }
    }
}

fn spec(tree: &GuidanceTree, category: Category, features: Features) -> Option<Vignette> {
    let trace = gold_trace(tree, "", &features).ok()?;
    let outcome = trace.outcome?;
    Some(Vignette {
        id: String::new(),
        domain: tree.domain.clone(),
        category,
        length_condition: LengthCondition::Unconstrained,
        text: String::new(),
        word_count: 0,
        features,
        gold_action: outcome.action,
        gold_referral: outcome.referral,
        gold_path_length: trace.step_count,
    })
}

fn pool(tree: &GuidanceTree, plan: &GenerationPlan, category: Category) -> Vec<Vignette> {
    let mut seen = BTreeSet::new();
    candidates(tree, plan, category)
        .into_iter()
        .filter(|f| consistent(tree, f))
        .filter(|f| seen.insert(f.clone()))
        .filter_map(|f| spec(tree, category, f))
        .filter(|v| classify(tree, v) == [category])
        .filter(|v| category == Category::Exclusion || !plan.referral_positives || v.gold_referral)
        .collect()
}

fn infeasible_reason(category: Category, plan: &GenerationPlan) -> String {
    let referral = if plan.referral_positives && category != Category::Exclusion {
        " with a referral outcome"
    } else {
        ""
    };
    match category {
        Category::Single => format!("no feature leads to an action on its own{referral}"),
        Category::Multi => format!(
            "no {} compatible features lead to distinct actions{referral}",
            plan.multi_positives.max(2)
        ),
        Category::Contrastive => format!("no positive feature has a deniable counterpart{referral}"),
        Category::Exclusion => {
            "every vignette without a qualifying finding still reaches a referral action".into()
        }
    }
}

/// Draw gold-labelled vignette specs (text left empty) per `plan`.
/// Categories are generated in the order single, contrastive, multi,
/// exclusion; ids are `{domain}-{nnnn}` in that order.
pub fn generate_specs(tree: &GuidanceTree, plan: &GenerationPlan) -> Result<Vec<Vignette>, InfeasibleCategory> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let lengths = if plan.length_conditions.is_empty() {
        default_lengths()
    } else {
        plan.length_conditions.clone()
    };
    let mut out = Vec::new();
    for category in Category::ALL {
        let count = plan.counts.get(&category).copied().unwrap_or(0);
        if count == 0 {
            continue;
        }
        let mut candidates = pool(tree, plan, category);
        if candidates.is_empty() {
            return Err(InfeasibleCategory {
                category,
                reason: infeasible_reason(category, plan),
            });
        }
        candidates.shuffle(&mut rng);
        for i in 0..count {
            let index = out.len();
            let mut v = candidates[i % candidates.len()].clone();
            v.id = format!("{}-{:04}", tree.domain, index + 1);
            v.length_condition = lengths[index % lengths.len()];
            out.push(v);
        }
    }
    Ok(out)
}
