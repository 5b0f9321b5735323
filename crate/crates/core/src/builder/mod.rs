//! Assembling a guidance tree from a guideline document: segment the text,
//! prompt a model per segment, parse the replies into fragments and chain
//! the fragments together.

mod merge;
mod parse;
mod prompt;
mod segment;

use crate::tree::{IssueCode, ParseIssue, ValidationReport};

pub use merge::{merge_chain, merge_subtrees};
pub use parse::{extract_json, parse_model_tree, Marker, Subtree};
pub use prompt::{emit_tree_prompt, PromptError, TreePromptTemplate, TREE_PROMPT_VERSION};
pub use segment::{segment_guideline, token_estimate, Segment, SegmentError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("segment {segment_index}: reply is not usable JSON: {message}")]
    Unparseable { segment_index: usize, message: String },
    #[error("segment {segment_index}: reply does not follow the tree schema: {}", join_issues(.issues))]
    SchemaViolation {
        segment_index: usize,
        issues: Vec<ParseIssue>,
    },
    #[error("segment {segment_index}: fragment fails validation: {}", join_report(.report))]
    Invalid {
        segment_index: usize,
        report: ValidationReport,
    },
    #[error("nothing to merge")]
    EmptyInput,
    #[error("merged tree fails validation: {}", join_report(.0))]
    MergeInvalid(ValidationReport),
}

fn join_issues(issues: &[ParseIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn join_report(report: &ValidationReport) -> String {
    report.errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl BuildError {
    pub fn segment_index(&self) -> Option<usize> {
        match self {
            BuildError::Unparseable { segment_index, .. }
            | BuildError::SchemaViolation { segment_index, .. }
            | BuildError::Invalid { segment_index, .. } => Some(*segment_index),
            BuildError::EmptyInput | BuildError::MergeInvalid(_) => None,
        }
    }

    pub fn has_code(&self, code: IssueCode) -> bool {
        match self {
            BuildError::Invalid { report, .. } | BuildError::MergeInvalid(report) => report.has_error(code),
            _ => false,
        }
    }
}
