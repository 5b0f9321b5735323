use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::de::{self, DeserializeSeed, MapAccess, SeqAccess, Visitor};
use serde_json::{Map, Value};

use super::{ActionDef, Criterion, GuidanceTree, Node, NodeKind, Target, SCHEMA_VERSION};

/// A single problem found while reading a tree document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseIssue {
    /// Dotted path to the offending element, e.g. `nodes.n1.threshold`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub issues: Vec<ParseIssue>,
}

impl ParseError {
    fn single(path: &str, message: impl Into<String>) -> Self {
        ParseError {
            issues: vec![ParseIssue {
                path: path.to_string(),
                message: message.into(),
            }],
        }
    }

    pub fn has_path(&self, path: &str) -> bool {
        self.issues.iter().any(|i| i.path == path)
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let joined: Vec<String> = self.issues.iter().map(ToString::to_string).collect();
        write!(f, "invalid guidance tree: {}", joined.join("; "))
    }
}

/// Parse a UTF-8 tree document. Only field-level checks happen here;
/// references and graph shape are checked by `validate_tree`.
pub fn parse_tree(bytes: &[u8]) -> Result<GuidanceTree, ParseError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| ParseError::single("", format!("document is not UTF-8: {e}")))?;
    let value = parse_json_strict(text)?;
    parse_tree_value(&value)
}

/// Parse JSON text, reporting duplicate object keys (which a plain
/// `serde_json::Value` would silently collapse).
pub(crate) fn parse_json_strict(text: &str) -> Result<Value, ParseError> {
    let mut duplicates = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    DupScan {
        path: String::new(),
        duplicates: &mut duplicates,
    }
    .deserialize(&mut de)
    .and_then(|_| de.end())
    .map_err(|e| ParseError::single("", format!("malformed document: {e}")))?;
    if !duplicates.is_empty() {
        return Err(ParseError {
            issues: duplicates
                .into_iter()
                .map(|path| {
                    let message = if path.starts_with("nodes.") && path.matches('.').count() == 1 {
                        "duplicate node id".to_string()
                    } else {
                        "duplicate key".to_string()
                    };
                    ParseIssue { path, message }
                })
                .collect(),
        });
    }
    serde_json::from_str(text).map_err(|e| ParseError::single("", format!("malformed document: {e}")))
}

struct DupScan<'a> {
    path: String,
    duplicates: &'a mut Vec<String>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl<'de> DeserializeSeed<'de> for DupScan<'_> {
    type Value = ();

    fn deserialize<D: de::Deserializer<'de>>(self, deserializer: D) -> Result<(), D::Error> {
        deserializer.deserialize_any(self)
    }
}

impl<'de> Visitor<'de> for DupScan<'_> {
    type Value = ();

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("any JSON value")
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<(), A::Error> {
        let dups = self.duplicates;
        let mut seen = HashSet::new();
        while let Some(key) = map.next_key::<String>()? {
            let child = join(&self.path, &key);
            if !seen.insert(key) {
                dups.push(child.clone());
            }
            map.next_value_seed(DupScan {
                path: child,
                duplicates: &mut *dups,
            })?;
        }
        Ok(())
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<(), A::Error> {
        let dups = self.duplicates;
        let mut i = 0usize;
        while seq
            .next_element_seed(DupScan {
                path: join(&self.path, &i.to_string()),
                duplicates: &mut *dups,
            })?
            .is_some()
        {
            i += 1;
        }
        Ok(())
    }

    fn visit_bool<E>(self, _: bool) -> Result<(), E> {
        Ok(())
    }
    fn visit_i64<E>(self, _: i64) -> Result<(), E> {
        Ok(())
    }
    fn visit_u64<E>(self, _: u64) -> Result<(), E> {
        Ok(())
    }
    fn visit_f64<E>(self, _: f64) -> Result<(), E> {
        Ok(())
    }
    fn visit_str<E>(self, _: &str) -> Result<(), E> {
        Ok(())
    }
    fn visit_unit<E>(self) -> Result<(), E> {
        Ok(())
    }
}

/// Collects issues while walking a document.
struct Reader {
    issues: Vec<ParseIssue>,
}

impl Reader {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.issues.push(ParseIssue {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn object<'v>(&mut self, v: &'v Value, path: &str) -> Option<&'v Map<String, Value>> {
        match v.as_object() {
            Some(m) => Some(m),
            None => {
                self.push(path, format!("expected object, found {}", type_name(v)));
                None
            }
        }
    }

    fn field<'v>(&mut self, obj: &'v Map<String, Value>, path: &str, key: &str) -> Option<&'v Value> {
        let v = obj.get(key);
        if v.is_none() {
            self.push(&join(path, key), "missing required field");
        }
        v
    }

    fn string(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<String> {
        let v = self.field(obj, path, key)?;
        match v.as_str() {
            Some(s) if !s.trim().is_empty() => Some(s.to_string()),
            Some(_) => {
                self.push(&join(path, key), "must be a non-empty string");
                None
            }
            None => {
                self.push(&join(path, key), format!("expected string, found {}", type_name(v)));
                None
            }
        }
    }

    fn unsigned(&mut self, v: &Value, path: &str) -> Option<u32> {
        match v.as_u64() {
            Some(n) if n <= u64::from(u32::MAX) => Some(n as u32),
            _ => {
                self.push(path, format!("expected non-negative integer, found {}", type_name(v)));
                None
            }
        }
    }

    fn unknown_keys(&mut self, obj: &Map<String, Value>, path: &str, allowed: &[&str]) {
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                self.push(&join(path, key), "unknown field");
            }
        }
    }

    fn target(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<Target> {
        let v = self.field(obj, path, key)?;
        let path = join(path, key);
        let map = self.object(v, &path)?;
        if map.len() != 1 {
            self.push(&path, "target must have exactly one of `node`, `action`, `end`");
            return None;
        }
        let (kind, inner) = map.iter().next()?;
        let inner_path = join(&path, kind);
        match (kind.as_str(), inner) {
            ("node", Value::String(id)) => Some(Target::Node(id.clone())),
            ("action", Value::String(id)) => Some(Target::Action(id.clone())),
            ("end", Value::Bool(true)) => Some(Target::End),
            ("end", _) => {
                self.push(&inner_path, "`end` must be true");
                None
            }
            ("node" | "action", other) => {
                self.push(&inner_path, format!("expected string, found {}", type_name(other)));
                None
            }
            _ => {
                self.push(&inner_path, "unknown target kind");
                None
            }
        }
    }

    fn node(&mut self, id: &str, v: &Value, path: &str) -> Option<Node> {
        let obj = self.object(v, path)?;
        let kind = self.string(obj, path, "kind")?;
        match kind.as_str() {
            "simple" => {
                self.unknown_keys(obj, path, &["kind", "feature", "question", "on_yes", "on_no"]);
                let feature = self.string(obj, path, "feature");
                let question = self.string(obj, path, "question");
                let on_yes = self.target(obj, path, "on_yes");
                let on_no = self.target(obj, path, "on_no");
                Some(Node::simple(id, feature?, question?, on_yes?, on_no?))
            }
            "multi" => {
                self.unknown_keys(obj, path, &["kind", "criteria", "threshold", "on_met", "on_not_met"]);
                let criteria = self.criteria(obj, path);
                let threshold = self
                    .field(obj, path, "threshold")
                    .and_then(|t| self.unsigned(t, &join(path, "threshold")));
                let on_met = self.target(obj, path, "on_met");
                let on_not_met = self.target(obj, path, "on_not_met");
                Some(Node::multi(id, criteria?, threshold?, on_met?, on_not_met?))
            }
            other => {
                self.push(&join(path, "kind"), format!("unknown kind `{other}`"));
                None
            }
        }
    }

    fn criteria(&mut self, obj: &Map<String, Value>, path: &str) -> Option<Vec<Criterion>> {
        let v = self.field(obj, path, "criteria")?;
        let path = join(path, "criteria");
        let Some(items) = v.as_array() else {
            self.push(&path, format!("expected array, found {}", type_name(v)));
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            let item_path = join(&path, &i.to_string());
            let Some(c) = self.object(item, &item_path) else {
                ok = false;
                continue;
            };
            self.unknown_keys(c, &item_path, &["feature", "question"]);
            match (self.string(c, &item_path, "feature"), self.string(c, &item_path, "question")) {
                (Some(feature), Some(question)) => out.push(Criterion { feature, question }),
                _ => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn action(&mut self, id: &str, v: &Value, path: &str) -> Option<ActionDef> {
        let obj = self.object(v, path)?;
        self.unknown_keys(obj, path, &["label", "referral", "priority"]);
        let label = self.string(obj, path, "label");
        let referral = self.field(obj, path, "referral").and_then(|r| match r.as_bool() {
            Some(b) => Some(b),
            None => {
                self.push(&join(path, "referral"), format!("expected boolean, found {}", type_name(r)));
                None
            }
        });
        let priority = match obj.get("priority") {
            None | Some(Value::Null) => Some(None),
            Some(p) => self.unsigned(p, &join(path, "priority")).map(Some),
        };
        Some(ActionDef {
            id: id.to_string(),
            label: label?,
            referral: referral?,
            priority: priority?,
        })
    }

    fn exclusive_groups(&mut self, v: &Value) -> Option<Vec<Vec<String>>> {
        let path = "exclusive_groups";
        let Some(groups) = v.as_array() else {
            self.push(path, format!("expected array, found {}", type_name(v)));
            return None;
        };
        let mut out = Vec::new();
        for (i, g) in groups.iter().enumerate() {
            let gp = join(path, &i.to_string());
            let members: Option<Vec<String>> = g
                .as_array()
                .and_then(|a| a.iter().map(|m| m.as_str().map(str::to_string)).collect());
            match members {
                Some(m) => out.push(m),
                None => self.push(&gp, "expected array of feature ids"),
            }
        }
        Some(out)
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Parse an already-decoded JSON value. Duplicate keys cannot be detected at
/// this level; use [`parse_tree`] for raw documents.
pub fn parse_tree_value(value: &Value) -> Result<GuidanceTree, ParseError> {
    let mut r = Reader { issues: Vec::new() };
    let Some(top) = r.object(value, "") else {
        return Err(ParseError { issues: r.issues });
    };
    r.unknown_keys(
        top,
        "",
        &["schema_version", "domain", "root", "nodes", "actions", "exclusive_groups"],
    );
    let schema_version = r.string(top, "", "schema_version");
    if let Some(v) = &schema_version {
        if v != SCHEMA_VERSION {
            r.push("schema_version", format!("unsupported schema version `{v}`"));
        }
    }
    let domain = r.string(top, "", "domain");
    let root = r.string(top, "", "root");

    let mut nodes = BTreeMap::new();
    if let Some(obj) = r.field(top, "", "nodes").and_then(|v| r.object(v, "nodes")) {
        for (id, v) in obj {
            let path = join("nodes", id);
            if let Some(node) = r.node(id, v, &path) {
                nodes.insert(id.clone(), node);
            }
        }
    }
    let mut actions = BTreeMap::new();
    if let Some(obj) = r.field(top, "", "actions").and_then(|v| r.object(v, "actions")) {
        for (id, v) in obj {
            let path = join("actions", id);
            if let Some(action) = r.action(id, v, &path) {
                actions.insert(id.clone(), action);
            }
        }
    }
    let exclusive_groups = match top.get("exclusive_groups") {
        None => Some(Vec::new()),
        Some(v) => r.exclusive_groups(v),
    };

    if !r.issues.is_empty() {
        return Err(ParseError { issues: r.issues });
    }
    match (schema_version, domain, root, exclusive_groups) {
        (Some(schema_version), Some(domain), Some(root), Some(exclusive_groups)) => Ok(GuidanceTree {
            schema_version,
            domain,
            root,
            nodes,
            actions,
            exclusive_groups,
        }),
        _ => Err(ParseError::single("", "incomplete document")),
    }
}

impl NodeKind {
    pub(crate) fn to_value(&self) -> Value {
        let mut m = Map::new();
        match self {
            NodeKind::Simple {
                feature,
                question,
                on_yes,
                on_no,
            } => {
                m.insert("kind".into(), "simple".into());
                m.insert("feature".into(), feature.as_str().into());
                m.insert("question".into(), question.as_str().into());
                m.insert("on_yes".into(), target_value(on_yes));
                m.insert("on_no".into(), target_value(on_no));
            }
            NodeKind::Multi {
                criteria,
                threshold,
                on_met,
                on_not_met,
            } => {
                m.insert("kind".into(), "multi".into());
                let cs = criteria
                    .iter()
                    .map(|c| {
                        let mut cm = Map::new();
                        cm.insert("feature".into(), c.feature.as_str().into());
                        cm.insert("question".into(), c.question.as_str().into());
                        Value::Object(cm)
                    })
                    .collect();
                m.insert("criteria".into(), Value::Array(cs));
                m.insert("threshold".into(), (*threshold).into());
                m.insert("on_met".into(), target_value(on_met));
                m.insert("on_not_met".into(), target_value(on_not_met));
            }
        }
        Value::Object(m)
    }
}

pub(crate) fn target_value(t: &Target) -> Value {
    serde_json::to_value(t).expect("targets always serialize")
}
