//! Executable clinical guidance trees.
//!
//! Guideline logic is held in a [`tree::GuidanceTree`]; [`engine::traverse`]
//! walks a tree against one patient by asking an [`oracle::Oracle`] yes/no
//! questions and records an audit [`engine::Trace`]. The [`corpus`] module
//! builds and checks synthetic vignette corpora with gold labels, [`eval`]
//! scores traversal outcomes, and [`builder`] assembles trees from
//! model-generated fragments of a guideline document.

pub mod batch;
pub mod builder;
pub mod corpus;
pub mod engine;
pub mod eval;
pub mod json;
pub mod oracle;
pub mod samples;
pub mod seed;
#[cfg(feature = "testing")]
pub mod testing;
pub mod tree;

pub use tree::{
    assign_priorities, parse_tree, serialize_tree, validate_tree, ActionDef, Branch, Criterion,
    GuidanceTree, Node, NodeKind, Target, ValidationReport,
};
