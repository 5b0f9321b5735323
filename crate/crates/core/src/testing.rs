//! Seeded generators of valid trees and feature assignments for property
//! tests. Enabled by the `testing` feature.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tree::{Criterion, GuidanceTree, Node, Target};

/// A random tree that passes validation. Nodes `n0..` form a DAG in which
/// node `i` always links to node `i + 1`; other exits go to later nodes,
/// actions or `end`. Node count is in `1..=max_nodes`.
pub fn random_tree(seed: u64, max_nodes: usize) -> GuidanceTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_nodes.max(1));
    let n_actions = rng.random_range(1..=4usize);
    let mut tree = GuidanceTree::new("random", "n0");
    for a in 0..n_actions {
        let referral = rng.random_bool(0.5);
        tree = tree.with_action(&format!("A{a}"), &format!("Action {a}"), referral);
    }
    let mut feature = 0usize;
    for i in 0..n {
        let free = |rng: &mut ChaCha8Rng| -> Target {
            match rng.random_range(0..3) {
                0 if i + 2 < n => Target::Node(format!("n{}", rng.random_range(i + 2..n))),
                1 => Target::End,
                _ => Target::Action(format!("A{}", rng.random_range(0..n_actions))),
            }
        };
        let (linked, other) = if i + 1 < n {
            (Target::Node(format!("n{}", i + 1)), free(&mut rng))
        } else {
            (Target::Action(format!("A{}", rng.random_range(0..n_actions))), free(&mut rng))
        };
        let (pos, neg) = if rng.random_bool(0.5) { (linked, other) } else { (other, linked) };
        let id = format!("n{i}");
        let node = if rng.random_bool(0.3) {
            let k = rng.random_range(1..=4usize);
            let criteria = (0..k)
                .map(|_| {
                    feature += 1;
                    Criterion::new(format!("f{feature}"), format!("Is f{feature} present?"))
                })
                .collect();
            let threshold = rng.random_range(1..=k) as u32;
            Node::multi(&id, criteria, threshold, pos, neg)
        } else {
            feature += 1;
            Node::simple(&id, format!("f{feature}"), format!("Is f{feature} present?"), pos, neg)
        };
        tree = tree.with_node(node);
    }
    tree
}

/// Independent fair coin per feature of `tree`.
pub fn random_features(tree: &GuidanceTree, seed: u64) -> BTreeMap<String, bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tree.features()
        .into_iter()
        .map(|f| (f.to_string(), rng.random_bool(0.5)))
        .collect()
}
