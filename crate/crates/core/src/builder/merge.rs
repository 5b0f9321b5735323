use std::collections::{BTreeMap, BTreeSet};

use super::{BuildError, Marker, Subtree};
use crate::tree::{validate_tree, GuidanceTree, NodeKind, Target};

fn normalize_label(label: &str) -> String {
    label
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn fresh_id(id: &str, segment_index: usize, taken: &BTreeSet<String>) -> String {
    let mut candidate = format!("s{segment_index}_{id}");
    while taken.contains(&candidate) {
        candidate = format!("s{segment_index}_{candidate}");
    }
    candidate
}

fn retarget(t: &Target, nodes: &BTreeMap<String, String>, actions: &BTreeMap<String, String>) -> Target {
    match t {
        Target::Node(id) => Target::Node(nodes.get(id).cloned().unwrap_or_else(|| id.clone())),
        Target::Action(id) => Target::Action(actions.get(id).cloned().unwrap_or_else(|| id.clone())),
        Target::End => Target::End,
    }
}

/// Append `next` to `acc`: every open exit of `acc` now leads to `next`'s root.
fn join(mut acc: Subtree, next: &Subtree) -> Subtree {
    let seg = next.segment_index;
    let mut taken: BTreeSet<String> = acc.tree.nodes.keys().cloned().collect();
    taken.extend(next.tree.nodes.keys().cloned());
    let mut node_map = BTreeMap::new();
    for id in next.tree.nodes.keys() {
        if acc.tree.nodes.contains_key(id) {
            let new = fresh_id(id, seg, &taken);
            taken.insert(new.clone());
            node_map.insert(id.clone(), new);
        }
    }

    let mut taken_actions: BTreeSet<String> = acc.tree.actions.keys().cloned().collect();
    taken_actions.extend(next.tree.actions.keys().cloned());
    let existing: BTreeMap<(String, bool), String> = acc
        .tree
        .actions
        .values()
        .map(|a| ((normalize_label(&a.label), a.referral), a.id.clone()))
        .collect();
    let mut action_map = BTreeMap::new();
    for (id, a) in &next.tree.actions {
        if let Some(same) = existing.get(&(normalize_label(&a.label), a.referral)) {
            action_map.insert(id.clone(), same.clone());
        } else if acc.tree.actions.contains_key(id) {
            let new = fresh_id(id, seg, &taken_actions);
            taken_actions.insert(new.clone());
            let mut renamed = a.clone();
            renamed.id = new.clone();
            acc.tree.actions.insert(new.clone(), renamed);
            action_map.insert(id.clone(), new);
        } else {
            acc.tree.actions.insert(id.clone(), a.clone());
        }
    }

    for (id, node) in &next.tree.nodes {
        let mut node = node.clone();
        node.id = node_map.get(id).cloned().unwrap_or_else(|| id.clone());
        match &mut node.kind {
            NodeKind::Simple { on_yes, on_no, .. } => {
                *on_yes = retarget(on_yes, &node_map, &action_map);
                *on_no = retarget(on_no, &node_map, &action_map);
            }
            NodeKind::Multi {
                on_met, on_not_met, ..
            } => {
                *on_met = retarget(on_met, &node_map, &action_map);
                *on_not_met = retarget(on_not_met, &node_map, &action_map);
            }
        }
        acc.tree.nodes.insert(node.id.clone(), node);
    }

    let next_root = node_map.get(&next.tree.root).cloned().unwrap_or_else(|| next.tree.root.clone());
    for m in &acc.markers {
        let node = acc.tree.nodes.get_mut(&m.node_id).expect("marker names a fragment node");
        *node.exit_mut(m.branch).expect("marker branch matches node kind") = Target::Node(next_root.clone());
    }
    acc.markers = next
        .markers
        .iter()
        .map(|m| Marker {
            node_id: node_map.get(&m.node_id).cloned().unwrap_or_else(|| m.node_id.clone()),
            branch: m.branch,
        })
        .collect();
    for g in &next.tree.exclusive_groups {
        if !acc.tree.exclusive_groups.contains(g) {
            acc.tree.exclusive_groups.push(g.clone());
        }
    }
    acc
}

/// Chain fragments in order, leaving the last fragment's open exits open.
pub fn merge_chain(subtrees: &[Subtree]) -> Result<Subtree, BuildError> {
    let (first, rest) = subtrees.split_first().ok_or(BuildError::EmptyInput)?;
    Ok(rest.iter().fold(first.clone(), join))
}

/// Chain fragments and close the remaining open exits with `end`. The
/// result is validated; an invalid merge is an error, never a partial tree.
pub fn merge_subtrees(subtrees: &[Subtree]) -> Result<GuidanceTree, BuildError> {
    let merged = merge_chain(subtrees)?;
    let report = validate_tree(&merged.tree);
    if !report.ok {
        return Err(BuildError::MergeInvalid(report));
    }
    Ok(merged.tree)
}
