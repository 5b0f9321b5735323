use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use super::GuidanceTree;
use crate::json::to_canonical_string;

impl GuidanceTree {
    pub fn to_value(&self) -> Value {
        let mut top = Map::new();
        top.insert("schema_version".into(), self.schema_version.as_str().into());
        top.insert("domain".into(), self.domain.as_str().into());
        top.insert("root".into(), self.root.as_str().into());
        let nodes = self
            .nodes
            .iter()
            .map(|(id, n)| (id.clone(), n.kind.to_value()))
            .collect::<Map<_, _>>();
        top.insert("nodes".into(), Value::Object(nodes));
        let actions = self
            .actions
            .iter()
            .map(|(id, a)| {
                let mut m = Map::new();
                m.insert("label".into(), a.label.as_str().into());
                m.insert("referral".into(), a.referral.into());
                if let Some(p) = a.priority {
                    m.insert("priority".into(), p.into());
                }
                (id.clone(), Value::Object(m))
            })
            .collect::<Map<_, _>>();
        top.insert("actions".into(), Value::Object(actions));
        if !self.exclusive_groups.is_empty() {
            let groups = self
                .exclusive_groups
                .iter()
                .map(|g| Value::Array(g.iter().map(|f| Value::String(f.clone())).collect()))
                .collect();
            top.insert("exclusive_groups".into(), Value::Array(groups));
        }
        Value::Object(top)
    }
}

/// Canonical document bytes: sorted keys, fixed indentation, trailing newline.
pub fn serialize_tree(tree: &GuidanceTree) -> Vec<u8> {
    to_canonical_string(&tree.to_value()).into_bytes()
}

/// Hex SHA-256 of the canonical serialization.
pub fn tree_hash(tree: &GuidanceTree) -> String {
    hex::encode(Sha256::digest(serialize_tree(tree)))
}
