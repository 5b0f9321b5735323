//! Guidance trees: the executable form of a guideline's referral logic.
//!
//! A tree is a rooted, acyclic graph of decision nodes. Simple nodes check a
//! single feature; multi nodes count how many of their criteria hold and
//! compare the count against a threshold. Every exit points at another node,
//! at an action, or at `end`.

mod canonical;
mod parse;
mod priority;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use canonical::{serialize_tree, tree_hash};
pub use parse::{parse_tree, parse_tree_value, ParseError, ParseIssue};
pub(crate) use parse::parse_json_strict;
pub use priority::{assign_priorities, PriorityConflict};
pub use validate::{validate_tree, Issue, IssueCode, ValidationReport};

/// Schema version written by [`serialize_tree`] and accepted by [`parse_tree`].
pub const SCHEMA_VERSION: &str = "1";

/// A terminal recommendation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionDef {
    pub id: String,
    pub label: String,
    /// Specialty referral or escalation, as opposed to routine management.
    pub referral: bool,
    /// Urgency rank, 0 is most urgent. `None` until assigned.
    pub priority: Option<u32>,
}

/// Where an exit of a node leads.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Node(String),
    Action(String),
    /// The pathway terminates without a decision.
    #[serde(with = "end_marker")]
    End,
}

mod end_marker {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_bool(true)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        if bool::deserialize(d)? {
            Ok(())
        } else {
            Err(de::Error::custom("`end` must be true"))
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Node(id) => write!(f, "node:{id}"),
            Target::Action(id) => write!(f, "action:{id}"),
            Target::End => f.write_str("end"),
        }
    }
}

/// One yes/no criterion of a multi node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Criterion {
    pub feature: String,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Simple {
        feature: String,
        question: String,
        on_yes: Target,
        on_no: Target,
    },
    Multi {
        criteria: Vec<Criterion>,
        threshold: u32,
        on_met: Target,
        on_not_met: Target,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

/// The branch taken out of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Yes,
    No,
    Met,
    NotMet,
}

impl Branch {
    pub fn is_positive(self) -> bool {
        matches!(self, Branch::Yes | Branch::Met)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Yes => "yes",
            Branch::No => "no",
            Branch::Met => "met",
            Branch::NotMet => "not_met",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Node {
    pub fn simple(
        id: impl Into<String>,
        feature: impl Into<String>,
        question: impl Into<String>,
        on_yes: Target,
        on_no: Target,
    ) -> Self {
        Node {
            id: id.into(),
            kind: NodeKind::Simple {
                feature: feature.into(),
                question: question.into(),
                on_yes,
                on_no,
            },
        }
    }

    pub fn multi(
        id: impl Into<String>,
        criteria: Vec<Criterion>,
        threshold: u32,
        on_met: Target,
        on_not_met: Target,
    ) -> Self {
        Node {
            id: id.into(),
            kind: NodeKind::Multi {
                criteria,
                threshold,
                on_met,
                on_not_met,
            },
        }
    }

    pub fn is_multi(&self) -> bool {
        matches!(self.kind, NodeKind::Multi { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            NodeKind::Simple { .. } => "simple",
            NodeKind::Multi { .. } => "multi",
        }
    }

    /// Exits in positive-first order.
    pub fn exits(&self) -> [(Branch, &Target); 2] {
        match &self.kind {
            NodeKind::Simple { on_yes, on_no, .. } => [(Branch::Yes, on_yes), (Branch::No, on_no)],
            NodeKind::Multi {
                on_met, on_not_met, ..
            } => [(Branch::Met, on_met), (Branch::NotMet, on_not_met)],
        }
    }

    pub fn exit(&self, branch: Branch) -> Option<&Target> {
        self.exits().into_iter().find(|(b, _)| *b == branch).map(|(_, t)| t)
    }

    pub fn exit_mut(&mut self, branch: Branch) -> Option<&mut Target> {
        match (&mut self.kind, branch) {
            (NodeKind::Simple { on_yes, .. }, Branch::Yes) => Some(on_yes),
            (NodeKind::Simple { on_no, .. }, Branch::No) => Some(on_no),
            (NodeKind::Multi { on_met, .. }, Branch::Met) => Some(on_met),
            (NodeKind::Multi { on_not_met, .. }, Branch::NotMet) => Some(on_not_met),
            _ => None,
        }
    }

    /// `(feature, question)` pairs asked at this node, in query order.
    pub fn questions(&self) -> Vec<(&str, &str)> {
        match &self.kind {
            NodeKind::Simple {
                feature, question, ..
            } => vec![(feature.as_str(), question.as_str())],
            NodeKind::Multi { criteria, .. } => criteria
                .iter()
                .map(|c| (c.feature.as_str(), c.question.as_str()))
                .collect(),
        }
    }
}

impl Criterion {
    pub fn new(feature: impl Into<String>, question: impl Into<String>) -> Self {
        Criterion {
            feature: feature.into(),
            question: question.into(),
        }
    }
}

/// A parsed guidance tree. Structural soundness is established separately by
/// [`validate_tree`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuidanceTree {
    pub schema_version: String,
    pub domain: String,
    pub root: String,
    pub nodes: BTreeMap<String, Node>,
    pub actions: BTreeMap<String, ActionDef>,
    /// Groups of features that can never be positive together, e.g. PSA
    /// bands. Optional in the document.
    pub exclusive_groups: Vec<Vec<String>>,
}

impl GuidanceTree {
    pub fn new(domain: impl Into<String>, root: impl Into<String>) -> Self {
        GuidanceTree {
            schema_version: SCHEMA_VERSION.to_string(),
            domain: domain.into(),
            root: root.into(),
            nodes: BTreeMap::new(),
            actions: BTreeMap::new(),
            exclusive_groups: Vec::new(),
        }
    }

    pub fn with_node(mut self, node: Node) -> Self {
        self.nodes.insert(node.id.clone(), node);
        self
    }

    pub fn with_action(mut self, id: &str, label: &str, referral: bool) -> Self {
        self.actions.insert(
            id.to_string(),
            ActionDef {
                id: id.to_string(),
                label: label.to_string(),
                referral,
                priority: None,
            },
        );
        self
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn action(&self, id: &str) -> Option<&ActionDef> {
        self.actions.get(id)
    }

    /// Every feature id asked anywhere in the tree.
    pub fn features(&self) -> BTreeSet<&str> {
        self.nodes
            .values()
            .flat_map(|n| n.questions().into_iter().map(|(f, _)| f))
            .collect()
    }

    /// True when `a` and `b` share an exclusive group.
    pub fn mutually_exclusive(&self, a: &str, b: &str) -> bool {
        a != b
            && self
                .exclusive_groups
                .iter()
                .any(|g| g.iter().any(|f| f == a) && g.iter().any(|f| f == b))
    }

    /// Node ids in depth-first preorder from the root, positive exit first.
    /// Shared subgraphs are visited once; dangling references are skipped.
    pub fn preorder(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut stack = vec![self.root.as_str()];
        while let Some(id) = stack.pop() {
            let Some(node) = self.nodes.get(id) else {
                continue;
            };
            if !seen.insert(id) {
                continue;
            }
            out.push(id);
            for (_, target) in node.exits().iter().rev() {
                if let Target::Node(next) = target {
                    stack.push(next.as_str());
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preorder_visits_positive_branch_first() {
        let tree = GuidanceTree::new("t", "a")
            .with_node(Node::simple(
                "a",
                "f1",
                "q1?",
                Target::Node("b".into()),
                Target::Node("c".into()),
            ))
            .with_node(Node::simple("b", "f2", "q2?", Target::End, Target::Node("c".into())))
            .with_node(Node::simple("c", "f3", "q3?", Target::End, Target::End));
        assert_eq!(tree.preorder(), vec!["a", "b", "c"]);
    }

    #[test]
    fn target_json_shapes() {
        let end = serde_json::to_string(&Target::End).unwrap();
        assert_eq!(end, r#"{"end":true}"#);
        let node: Target = serde_json::from_str(r#"{"node":"n2"}"#).unwrap();
        assert_eq!(node, Target::Node("n2".into()));
        assert!(serde_json::from_str::<Target>(r#"{"end":false}"#).is_err());
    }
}
