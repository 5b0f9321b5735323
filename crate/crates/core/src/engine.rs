//! Tree traversal against a single patient.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::oracle::{Answer, Oracle, OracleDescriptor, OracleError, Question, ScriptedOracle};
use crate::tree::{Branch, GuidanceTree, NodeKind, Target};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Limits {
    /// Defaults to the node count of the tree.
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub node_id: String,
    pub kind: String,
    pub questions: Vec<Question>,
    pub answers: Vec<Answer>,
    pub branch: Branch,
    pub target: Target,
}

/// Final decision of a traversal. `action == None` is the no-action outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub action: Option<String>,
    pub referral: bool,
}

impl Outcome {
    pub fn no_action() -> Self {
        Outcome {
            action: None,
            referral: false,
        }
    }

    /// Class label used by the metrics: the action id or `NoAction`.
    pub fn label(&self) -> &str {
        self.action.as_deref().unwrap_or(NO_ACTION)
    }
}

pub const NO_ACTION: &str = "NoAction";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub vignette_id: String,
    pub tree_domain: String,
    pub oracle_descriptor: OracleDescriptor,
    pub steps: Vec<Step>,
    /// `None` only for aborted traversals.
    pub outcome: Option<Outcome>,
    pub step_count: usize,
    pub aborted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trace {
    pub fn query_count(&self) -> usize {
        self.steps.iter().map(|s| s.questions.len()).sum()
    }

    pub fn to_json_line(&self) -> String {
        let value = serde_json::to_value(self).expect("traces serialize");
        crate::json::to_canonical_line(&value)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraverseError {
    #[error("oracle failed at node `{node_id}`: {source}")]
    Oracle {
        node_id: String,
        source: OracleError,
        trace: Box<Trace>,
    },
    #[error("step limit {limit} exceeded")]
    StepLimitExceeded { limit: usize, trace: Box<Trace> },
    #[error("traversal reached missing {target}")]
    Dangling { target: Target, trace: Box<Trace> },
}

impl TraverseError {
    /// The steps completed before the failure, with `aborted` set.
    pub fn partial_trace(&self) -> &Trace {
        match self {
            TraverseError::Oracle { trace, .. }
            | TraverseError::StepLimitExceeded { trace, .. }
            | TraverseError::Dangling { trace, .. } => trace,
        }
    }

    pub fn into_partial_trace(self) -> Trace {
        match self {
            TraverseError::Oracle { trace, .. }
            | TraverseError::StepLimitExceeded { trace, .. }
            | TraverseError::Dangling { trace, .. } => *trace,
        }
    }
}

/// Walk `tree` from its root, asking `oracle` every question on the way.
pub fn traverse(
    tree: &GuidanceTree,
    vignette_id: &str,
    oracle: &mut dyn Oracle,
    limits: Limits,
) -> Result<Trace, TraverseError> {
    let limit = limits.max_steps.unwrap_or(tree.nodes.len());
    let mut trace = Trace {
        vignette_id: vignette_id.to_string(),
        tree_domain: tree.domain.clone(),
        oracle_descriptor: oracle.descriptor(),
        steps: Vec::new(),
        outcome: None,
        step_count: 0,
        aborted: false,
        error: None,
    };
    let mut current = Target::Node(tree.root.clone());
    loop {
        let node_id = match &current {
            Target::Node(id) => id.clone(),
            Target::Action(id) => {
                let Some(action) = tree.action(id) else {
                    return Err(abort_dangling(trace, current));
                };
                trace.outcome = Some(Outcome {
                    action: Some(action.id.clone()),
                    referral: action.referral,
                });
                return Ok(trace);
            }
            Target::End => {
                trace.outcome = Some(Outcome::no_action());
                return Ok(trace);
            }
        };
        let Some(node) = tree.node(&node_id) else {
            return Err(abort_dangling(trace, current));
        };
        if trace.steps.len() >= limit {
            let err = format!("step limit {limit} exceeded");
            return Err(TraverseError::StepLimitExceeded {
                limit,
                trace: Box::new(mark_aborted(trace, err)),
            });
        }
        let multi = node.is_multi();
        let questions: Vec<Question> = node
            .questions()
            .into_iter()
            .enumerate()
            .map(|(i, (feature, text))| Question {
                feature_id: feature.to_string(),
                text: text.to_string(),
                node_id: node_id.clone(),
                criterion_index: multi.then_some(i),
            })
            .collect();
        let mut answers = Vec::with_capacity(questions.len());
        for q in &questions {
            match oracle.answer(q) {
                Ok(a) => answers.push(a),
                Err(source) => {
                    let msg = source.to_string();
                    return Err(TraverseError::Oracle {
                        node_id,
                        source,
                        trace: Box::new(mark_aborted(trace, msg)),
                    });
                }
            }
        }
        let (branch, target) = match &node.kind {
            NodeKind::Simple { on_yes, on_no, .. } => {
                if answers[0].value.is_yes() {
                    (Branch::Yes, on_yes.clone())
                } else {
                    (Branch::No, on_no.clone())
                }
            }
            NodeKind::Multi {
                threshold,
                on_met,
                on_not_met,
                ..
            } => {
                let count = answers.iter().filter(|a| a.value.is_yes()).count();
                if count >= *threshold as usize {
                    (Branch::Met, on_met.clone())
                } else {
                    (Branch::NotMet, on_not_met.clone())
                }
            }
        };
        trace.steps.push(Step {
            index: trace.steps.len(),
            node_id,
            kind: node.kind_name().to_string(),
            questions,
            answers,
            branch,
            target: target.clone(),
        });
        trace.step_count = trace.steps.len();
        current = target;
    }
}

fn mark_aborted(mut trace: Trace, error: String) -> Trace {
    trace.aborted = true;
    trace.error = Some(error);
    trace.step_count = trace.steps.len();
    trace
}

fn abort_dangling(trace: Trace, target: Target) -> TraverseError {
    let msg = format!("traversal reached missing {target}");
    TraverseError::Dangling {
        target,
        trace: Box::new(mark_aborted(trace, msg)),
    }
}

/// The guideline-defined optimal path: a perfect oracle over gold features.
pub fn gold_trace(
    tree: &GuidanceTree,
    vignette_id: &str,
    features: &BTreeMap<String, bool>,
) -> Result<Trace, TraverseError> {
    let mut oracle = ScriptedOracle::gold(features.clone());
    traverse(tree, vignette_id, &mut oracle, Limits::default())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("traces belong to different vignettes or trees: {predicted} vs {gold}")]
pub struct MismatchedVignette {
    pub predicted: String,
    pub gold: String,
}

/// Signed `predicted - gold` step difference.
pub fn traversal_difference(predicted: &Trace, gold: &Trace) -> Result<i64, MismatchedVignette> {
    if predicted.vignette_id != gold.vignette_id || predicted.tree_domain != gold.tree_domain {
        return Err(MismatchedVignette {
            predicted: format!("{}/{}", predicted.tree_domain, predicted.vignette_id),
            gold: format!("{}/{}", gold.tree_domain, gold.vignette_id),
        });
    }
    Ok(predicted.step_count as i64 - gold.step_count as i64)
}

/// Feeds back the answers recorded in a trace, in order.
#[derive(Debug, Clone)]
pub struct ReplayOracle {
    recorded: Vec<(String, Answer)>,
    next: usize,
    descriptor: OracleDescriptor,
}

impl ReplayOracle {
    pub fn from_trace(trace: &Trace) -> Self {
        let recorded = trace
            .steps
            .iter()
            .flat_map(|s| {
                s.questions
                    .iter()
                    .map(|q| q.feature_id.clone())
                    .zip(s.answers.iter().cloned())
            })
            .collect();
        ReplayOracle {
            recorded,
            next: 0,
            descriptor: trace.oracle_descriptor.clone(),
        }
    }
}

impl Oracle for ReplayOracle {
    fn answer(&mut self, question: &Question) -> Result<Answer, OracleError> {
        let Some((feature, answer)) = self.recorded.get(self.next) else {
            return Err(OracleError::ReplayExhausted(self.next));
        };
        if *feature != question.feature_id {
            return Err(OracleError::ReplayMismatch {
                expected: feature.clone(),
                actual: question.feature_id.clone(),
            });
        }
        self.next += 1;
        Ok(answer.clone())
    }

    fn descriptor(&self) -> OracleDescriptor {
        self.descriptor.clone()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
}

pub fn write_traces<W: Write>(mut out: W, traces: &[Trace]) -> std::io::Result<()> {
    for t in traces {
        writeln!(out, "{}", t.to_json_line())?;
    }
    Ok(())
}

pub fn read_traces<R: BufRead>(input: R) -> Result<Vec<Trace>, TraceIoError> {
    let mut traces = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trace = serde_json::from_str(&line).map_err(|source| TraceIoError::Json {
            line: i + 1,
            source,
        })?;
        traces.push(trace);
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ConstantOracle, YesNo};
    use crate::tree::{Criterion, Node};

    fn one_node() -> GuidanceTree {
        GuidanceTree::new("demo", "n1")
            .with_node(Node::simple("n1", "f1", "F1?", Target::Action("A1".into()), Target::End))
            .with_action("A1", "Refer", true)
    }

    fn feats(pairs: &[(&str, bool)]) -> BTreeMap<String, bool> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn single_node_yes() {
        let t = gold_trace(&one_node(), "v1", &feats(&[("f1", true)])).unwrap();
        assert_eq!(t.outcome.as_ref().unwrap().action.as_deref(), Some("A1"));
        assert!(t.outcome.unwrap().referral);
        assert_eq!(t.step_count, 1);
        assert_eq!(t.oracle_descriptor.backend, "gold");
    }

    #[test]
    fn multi_threshold() {
        let tree = GuidanceTree::new("demo", "m")
            .with_node(Node::multi(
                "m",
                vec![Criterion::new("c1", "C1?"), Criterion::new("c2", "C2?"), Criterion::new("c3", "C3?")],
                2,
                Target::Action("A".into()),
                Target::End,
            ))
            .with_action("A", "a", false);
        let met = gold_trace(&tree, "v", &feats(&[("c1", true), ("c2", true), ("c3", false)])).unwrap();
        assert_eq!(met.steps[0].branch, Branch::Met);
        assert_eq!(met.steps[0].questions.len(), 3);
        assert_eq!(met.steps[0].questions[2].criterion_index, Some(2));
        let not = gold_trace(&tree, "v", &feats(&[("c1", true)])).unwrap();
        assert_eq!(not.steps[0].branch, Branch::NotMet);
        assert_eq!(not.outcome, Some(Outcome::no_action()));
    }

    #[test]
    fn step_limit_marks_abort() {
        let mut o = ConstantOracle(YesNo::No);
        let tree = GuidanceTree::new("demo", "a")
            .with_node(Node::simple("a", "f", "F?", Target::End, Target::Node("b".into())))
            .with_node(Node::simple("b", "g", "G?", Target::End, Target::End));
        let err = traverse(&tree, "v", &mut o, Limits { max_steps: Some(1) }).unwrap_err();
        assert!(matches!(err, TraverseError::StepLimitExceeded { limit: 1, .. }));
        let t = err.partial_trace();
        assert!(t.aborted);
        assert_eq!(t.step_count, 1);
        assert!(t.outcome.is_none());
    }

    #[test]
    fn difference_requires_same_vignette() {
        let tree = one_node();
        let a = gold_trace(&tree, "v1", &feats(&[])).unwrap();
        let b = gold_trace(&tree, "v2", &feats(&[])).unwrap();
        assert_eq!(traversal_difference(&a, &a).unwrap(), 0);
        assert!(traversal_difference(&a, &b).is_err());
    }

    #[test]
    fn jsonl_roundtrip_and_replay() {
        let tree = one_node();
        let t = gold_trace(&tree, "v1", &feats(&[("f1", true)])).unwrap();
        let mut buf = Vec::new();
        write_traces(&mut buf, std::slice::from_ref(&t)).unwrap();
        let back = read_traces(&buf[..]).unwrap();
        assert_eq!(back, vec![t.clone()]);
        let mut replay = ReplayOracle::from_trace(&t);
        assert_eq!(traverse(&tree, "v1", &mut replay, Limits::default()).unwrap(), t);
    }
}
