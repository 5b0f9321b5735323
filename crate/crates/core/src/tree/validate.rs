use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{GuidanceTree, NodeKind, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    DanglingRef,
    Cycle,
    Unreachable,
    BadThreshold,
    NoActionReachable,
    DuplicateCriterion,
    DuplicatePriority,
    // warnings
    DuplicateQuestionText,
    UnusedAction,
    UnknownExclusiveFeature,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::DanglingRef => "DANGLING_REF",
            IssueCode::Cycle => "CYCLE",
            IssueCode::Unreachable => "UNREACHABLE",
            IssueCode::BadThreshold => "BAD_THRESHOLD",
            IssueCode::NoActionReachable => "NO_ACTION_REACHABLE",
            IssueCode::DuplicateCriterion => "DUPLICATE_CRITERION",
            IssueCode::DuplicatePriority => "DUPLICATE_PRIORITY",
            IssueCode::DuplicateQuestionText => "DUPLICATE_QUESTION_TEXT",
            IssueCode::UnusedAction => "UNUSED_ACTION",
            IssueCode::UnknownExclusiveFeature => "UNKNOWN_EXCLUSIVE_FEATURE",
        }
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub code: IssueCode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_id: Option<String>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node_id {
            Some(id) => write!(f, "{} [{}]: {}", self.code, id, self.message),
            None => write!(f, "{}: {}", self.code, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn has_error(&self, code: IssueCode) -> bool {
        self.errors.iter().any(|e| e.code == code)
    }

    pub fn error_codes(&self) -> BTreeSet<IssueCode> {
        self.errors.iter().map(|e| e.code).collect()
    }
}

struct Collector {
    errors: Vec<Issue>,
    warnings: Vec<Issue>,
}

impl Collector {
    fn error(&mut self, code: IssueCode, node: Option<&str>, message: String) {
        self.errors.push(Issue {
            code,
            node_id: node.map(str::to_string),
            message,
        });
    }

    fn warn(&mut self, code: IssueCode, node: Option<&str>, message: String) {
        self.warnings.push(Issue {
            code,
            node_id: node.map(str::to_string),
            message,
        });
    }
}

/// Check references, thresholds, acyclicity and reachability.
pub fn validate_tree(tree: &GuidanceTree) -> ValidationReport {
    let mut c = Collector {
        errors: Vec::new(),
        warnings: Vec::new(),
    };

    if !tree.nodes.contains_key(&tree.root) {
        c.error(
            IssueCode::DanglingRef,
            None,
            format!("root `{}` is not a node", tree.root),
        );
    }

    for (id, node) in &tree.nodes {
        if let NodeKind::Multi {
            criteria, threshold, ..
        } = &node.kind
        {
            if criteria.is_empty() || *threshold < 1 || *threshold as usize > criteria.len() {
                c.error(
                    IssueCode::BadThreshold,
                    Some(id),
                    format!(
                        "threshold {threshold} outside 1..={} for {} criteria",
                        criteria.len(),
                        criteria.len()
                    ),
                );
            }
            let mut seen = BTreeSet::new();
            for cr in criteria {
                if !seen.insert(cr.feature.as_str()) {
                    c.error(
                        IssueCode::DuplicateCriterion,
                        Some(id),
                        format!("feature `{}` listed twice", cr.feature),
                    );
                }
            }
        }
        for (branch, target) in node.exits() {
            match target {
                Target::Node(next) if !tree.nodes.contains_key(next) => c.error(
                    IssueCode::DanglingRef,
                    Some(id),
                    format!("{branch} exit references missing node `{next}`"),
                ),
                Target::Action(a) if !tree.actions.contains_key(a) => c.error(
                    IssueCode::DanglingRef,
                    Some(id),
                    format!("{branch} exit references missing action `{a}`"),
                ),
                _ => {}
            }
        }
    }

    for cycle in find_cycles(tree) {
        c.error(
            IssueCode::Cycle,
            cycle.first().map(String::as_str),
            format!("cycle through {}", cycle.join(" -> ")),
        );
    }

    let mut used_actions = BTreeSet::new();
    if tree.nodes.contains_key(&tree.root) {
        let reachable: BTreeSet<&str> = tree.preorder().into_iter().collect();
        for id in tree.nodes.keys() {
            if !reachable.contains(id.as_str()) {
                c.error(
                    IssueCode::Unreachable,
                    Some(id),
                    "node is not reachable from the root".to_string(),
                );
            }
        }
        for id in &reachable {
            for (_, t) in tree.nodes[*id].exits() {
                if let Target::Action(a) = t {
                    if tree.actions.contains_key(a) {
                        used_actions.insert(a.as_str());
                    }
                }
            }
        }
        if used_actions.is_empty() {
            c.error(
                IssueCode::NoActionReachable,
                None,
                "no action can be reached from the root".to_string(),
            );
        }
    }
    for id in tree.actions.keys() {
        if !used_actions.contains(id.as_str()) && tree.nodes.contains_key(&tree.root) {
            c.warn(IssueCode::UnusedAction, None, format!("action `{id}` is never reached"));
        }
    }

    let mut by_priority: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for a in tree.actions.values() {
        if let Some(p) = a.priority {
            by_priority.entry(p).or_default().push(&a.id);
        }
    }
    for (p, ids) in by_priority {
        if ids.len() > 1 {
            c.error(
                IssueCode::DuplicatePriority,
                None,
                format!("priority {p} shared by {}", ids.join(", ")),
            );
        }
    }

    // The same wording for two different features makes answers ambiguous.
    let mut by_text: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    let mut first_node: BTreeMap<String, &str> = BTreeMap::new();
    for (id, node) in &tree.nodes {
        for (feature, question) in node.questions() {
            let key = question.trim().to_lowercase();
            by_text.entry(key.clone()).or_default().insert(feature);
            first_node.entry(key).or_insert(id);
        }
    }
    for (text, features) in by_text {
        if features.len() > 1 {
            let node = first_node.get(&text).copied();
            c.warn(
                IssueCode::DuplicateQuestionText,
                node,
                format!(
                    "question `{text}` used for features {}",
                    features.into_iter().collect::<Vec<_>>().join(", ")
                ),
            );
        }
    }

    let features = tree.features();
    for group in &tree.exclusive_groups {
        for f in group {
            if !features.contains(f.as_str()) {
                c.warn(
                    IssueCode::UnknownExclusiveFeature,
                    None,
                    format!("exclusive group names unknown feature `{f}`"),
                );
            }
        }
    }

    ValidationReport {
        ok: c.errors.is_empty(),
        errors: c.errors,
        warnings: c.warnings,
    }
}

/// Elementary cycles found by a colouring DFS, each rotated to start at its
/// smallest id and reported once.
fn find_cycles(tree: &GuidanceTree) -> Vec<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Colour {
        White,
        Grey,
        Black,
    }
    let mut colour: BTreeMap<&str, Colour> =
        tree.nodes.keys().map(|k| (k.as_str(), Colour::White)).collect();
    let mut found: BTreeSet<Vec<String>> = BTreeSet::new();

    for start in tree.nodes.keys() {
        if colour[start.as_str()] != Colour::White {
            continue;
        }
        // Explicit stack of (node, next exit index).
        let mut path: Vec<&str> = Vec::new();
        let mut stack: Vec<(&str, usize)> = vec![(start.as_str(), 0)];
        colour.insert(start.as_str(), Colour::Grey);
        path.push(start.as_str());
        while let Some((id, idx)) = stack.pop() {
            let exits = tree.nodes[id].exits();
            if idx < exits.len() {
                stack.push((id, idx + 1));
                if let Target::Node(next) = exits[idx].1 {
                    match colour.get(next.as_str()).copied() {
                        Some(Colour::White) => {
                            colour.insert(next.as_str(), Colour::Grey);
                            path.push(next.as_str());
                            stack.push((next.as_str(), 0));
                        }
                        Some(Colour::Grey) => {
                            let pos = path.iter().position(|p| *p == next).unwrap_or(0);
                            let mut cycle: Vec<String> =
                                path[pos..].iter().map(|s| s.to_string()).collect();
                            let min = cycle
                                .iter()
                                .enumerate()
                                .min_by(|a, b| a.1.cmp(b.1))
                                .map(|(i, _)| i)
                                .unwrap_or(0);
                            cycle.rotate_left(min);
                            found.insert(cycle);
                        }
                        _ => {}
                    }
                }
            } else {
                colour.insert(id, Colour::Black);
                path.pop();
            }
        }
    }
    found.into_iter().collect()
}
