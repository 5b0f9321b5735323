use std::collections::{BTreeMap, BTreeSet};

use super::{GuidanceTree, Target};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("explicit priority {priority} is shared by actions {actions:?}")]
pub struct PriorityConflict {
    pub priority: u32,
    pub actions: Vec<String>,
}

impl GuidanceTree {
    /// Action ids in order of first occurrence in a depth-first walk from the
    /// root that explores the positive exit before the negative one.
    pub fn actions_in_walk_order(&self) -> Vec<&str> {
        let mut seen_nodes = BTreeSet::new();
        let mut seen_actions = BTreeSet::new();
        let mut order = Vec::new();
        let mut stack: Vec<&Target> = Vec::new();
        let root = Target::Node(self.root.clone());
        stack.push(&root);
        while let Some(t) = stack.pop() {
            match t {
                Target::Node(id) => {
                    let Some(node) = self.nodes.get(id) else { continue };
                    if !seen_nodes.insert(id.as_str()) {
                        continue;
                    }
                    for (_, next) in node.exits().into_iter().rev() {
                        stack.push(next);
                    }
                }
                Target::Action(a) => {
                    if let Some((key, _)) = self.actions.get_key_value(a) {
                        if seen_actions.insert(key.as_str()) {
                            order.push(key.as_str());
                        }
                    }
                }
                Target::End => {}
            }
        }
        order
    }
}

/// Fill in missing action priorities by walk order. Explicit priorities are
/// kept; new ranks take the smallest free values in walk order, and actions
/// the walk never reaches come last in id order.
pub fn assign_priorities(tree: &GuidanceTree) -> Result<GuidanceTree, PriorityConflict> {
    let mut taken: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for a in tree.actions.values() {
        if let Some(p) = a.priority {
            taken.entry(p).or_default().push(a.id.clone());
        }
    }
    if let Some((&priority, actions)) = taken.iter().find(|(_, ids)| ids.len() > 1) {
        return Err(PriorityConflict {
            priority,
            actions: actions.clone(),
        });
    }

    let walk = tree.actions_in_walk_order();
    let walked: BTreeSet<&str> = walk.iter().copied().collect();
    let pending: Vec<String> = walk
        .iter()
        .copied()
        .chain(tree.actions.keys().map(String::as_str).filter(|k| !walked.contains(k)))
        .filter(|id| tree.actions[*id].priority.is_none())
        .map(str::to_string)
        .collect();

    let mut out = tree.clone();
    let mut next = 0u32;
    for id in pending {
        while taken.contains_key(&next) {
            next += 1;
        }
        out.actions.get_mut(&id).expect("id from this tree").priority = Some(next);
        taken.insert(next, vec![id]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{Criterion, Node};
    use super::*;

    fn chain() -> GuidanceTree {
        GuidanceTree::new("t", "root")
            .with_node(Node::simple(
                "root",
                "f1",
                "f1?",
                Target::Action("A1".into()),
                Target::Node("n2".into()),
            ))
            .with_node(Node::simple("n2", "f2", "f2?", Target::Action("A2".into()), Target::End))
            .with_action("A2", "two", true)
            .with_action("A1", "one", true)
    }

    #[test]
    fn chain_ranks_by_preorder() {
        let t = assign_priorities(&chain()).unwrap();
        assert_eq!(t.actions["A1"].priority, Some(0));
        assert_eq!(t.actions["A2"].priority, Some(1));
    }

    #[test]
    fn explicit_priorities_untouched() {
        let mut t = chain();
        t.actions.get_mut("A1").unwrap().priority = Some(7);
        t.actions.get_mut("A2").unwrap().priority = Some(3);
        assert_eq!(assign_priorities(&t).unwrap(), t);
    }

    #[test]
    fn partial_explicit_fills_free_slots() {
        let mut t = chain();
        t.actions.get_mut("A2").unwrap().priority = Some(0);
        let out = assign_priorities(&t).unwrap();
        assert_eq!(out.actions["A1"].priority, Some(1));
        assert_eq!(out.actions["A2"].priority, Some(0));
    }

    #[test]
    fn multi_met_before_later_simple() {
        let t = GuidanceTree::new("t", "n1")
            .with_node(Node::simple(
                "n1",
                "f1",
                "f1?",
                Target::Action("A1".into()),
                Target::Node("n2".into()),
            ))
            .with_node(Node::multi(
                "n2",
                vec![Criterion::new("c1", "c1?"), Criterion::new("c2", "c2?")],
                2,
                Target::Action("A2".into()),
                Target::Node("n3".into()),
            ))
            .with_node(Node::simple("n3", "f3", "f3?", Target::Action("A3".into()), Target::End))
            .with_action("A3", "three", false)
            .with_action("A2", "two", true)
            .with_action("A1", "one", true);
        let out = assign_priorities(&t).unwrap();
        assert!(out.actions["A2"].priority < out.actions["A3"].priority);
    }

    #[test]
    fn conflict_reported() {
        let mut t = chain();
        t.actions.get_mut("A1").unwrap().priority = Some(2);
        t.actions.get_mut("A2").unwrap().priority = Some(2);
        let err = assign_priorities(&t).unwrap_err();
        assert_eq!(err.priority, 2);
    }
}
