use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::BuildError;
use crate::tree::{parse_json_strict, parse_tree_value, validate_tree, Branch, GuidanceTree};

/// An exit left open for the next segment to continue from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Marker {
    pub node_id: String,
    pub branch: Branch,
}

/// A tree fragment produced from one segment. Marker exits are stored as
/// `end` in `tree` until the fragment is chained onto a successor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subtree {
    pub segment_index: usize,
    pub tree: GuidanceTree,
    pub markers: Vec<Marker>,
}

fn fenced_blocks(reply: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = reply;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let body = &after[body_start..];
        match body.find("```") {
            Some(close) => {
                out.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => break,
        }
    }
    out
}

/// The first balanced `{ ... }` object in `text`, string-literal aware.
fn balanced_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Pull the JSON document out of a model reply that may wrap it in code
/// fences or surround it with prose.
pub fn extract_json(reply: &str) -> Option<&str> {
    fenced_blocks(reply)
        .into_iter()
        .find_map(|b| balanced_object(b.trim()).filter(|o| b.trim().starts_with(o)))
        .or_else(|| balanced_object(reply))
}

const EXITS: [(&str, Branch); 4] = [
    ("on_yes", Branch::Yes),
    ("on_no", Branch::No),
    ("on_met", Branch::Met),
    ("on_not_met", Branch::NotMet),
];

/// Replace continue targets, and node references on negative exits that
/// point outside the fragment, by `end`; return the rewritten exits.
fn mark_open_exits(value: &mut Value) -> Vec<Marker> {
    let mut markers = Vec::new();
    let Some(nodes) = value.get_mut("nodes").and_then(Value::as_object_mut) else {
        return markers;
    };
    let ids: BTreeSet<String> = nodes.keys().cloned().collect();
    for (id, node) in nodes.iter_mut() {
        let Some(node) = node.as_object_mut() else { continue };
        for (key, branch) in EXITS {
            let Some(target) = node.get_mut(key) else { continue };
            let is_continue = target.get("continue") == Some(&Value::Bool(true))
                && target.as_object().is_some_and(|o| o.len() == 1);
            let dangling_negative = !branch.is_positive()
                && target
                    .get("node")
                    .and_then(Value::as_str)
                    .is_some_and(|n| !ids.contains(n));
            if is_continue || dangling_negative {
                *target = json!({"end": true});
                markers.push(Marker {
                    node_id: id.clone(),
                    branch,
                });
            }
        }
    }
    markers
}

/// Turn a raw model reply for segment `segment_index` into a subtree.
pub fn parse_model_tree(reply: &str, segment_index: usize) -> Result<Subtree, BuildError> {
    let json = extract_json(reply).ok_or_else(|| BuildError::Unparseable {
        segment_index,
        message: "reply contains no JSON object".into(),
    })?;
    let mut value = parse_json_strict(json).map_err(|e| {
        if e.issues.iter().any(|i| i.path.is_empty()) {
            BuildError::Unparseable {
                segment_index,
                message: e.to_string(),
            }
        } else {
            BuildError::SchemaViolation {
                segment_index,
                issues: e.issues,
            }
        }
    })?;
    let markers = mark_open_exits(&mut value);
    let tree = parse_tree_value(&value).map_err(|e| BuildError::SchemaViolation {
        segment_index,
        issues: e.issues,
    })?;
    let report = validate_tree(&tree);
    if !report.ok {
        return Err(BuildError::Invalid {
            segment_index,
            report,
        });
    }
    Ok(Subtree {
        segment_index,
        tree,
        markers,
    })
}
