//! Trees, templates and generation plans shipped with the crate.

use crate::corpus::{generate_vignettes, parse_corpus, CorpusManifest, GenerateError, GenerationPlan, TemplateSet};
use crate::tree::{parse_tree, GuidanceTree};

/// A bundled clinical domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Domain {
    pub name: &'static str,
    pub tree_json: &'static str,
    pub templates_json: &'static str,
    pub plan_json: &'static str,
    pub corpus_jsonl: &'static str,
}

pub const HEADACHE: Domain = Domain {
    name: "headache",
    tree_json: include_str!("../data/trees/headache.json"),
    templates_json: include_str!("../data/templates/headache.json"),
    plan_json: include_str!("../data/plans/headache.json"),
    corpus_jsonl: include_str!("../data/corpora/headache.jsonl"),
};

pub const LOWER_BACK_PAIN: Domain = Domain {
    name: "lower_back_pain",
    tree_json: include_str!("../data/trees/lower_back_pain.json"),
    templates_json: include_str!("../data/templates/lower_back_pain.json"),
    plan_json: include_str!("../data/plans/lower_back_pain.json"),
    corpus_jsonl: include_str!("../data/corpora/lower_back_pain.jsonl"),
};

pub const PROSTATE_CANCER: Domain = Domain {
    name: "prostate_cancer",
    tree_json: include_str!("../data/trees/prostate_cancer.json"),
    templates_json: include_str!("../data/templates/prostate_cancer.json"),
    plan_json: include_str!("../data/plans/prostate_cancer.json"),
    corpus_jsonl: include_str!("../data/corpora/prostate_cancer.jsonl"),
};

pub const DOMAINS: [Domain; 3] = [HEADACHE, LOWER_BACK_PAIN, PROSTATE_CANCER];

/// Five-node spine with one 2-of-3 node; every answer `no` ends without action.
pub const DEMO_SPINE_JSON: &str = include_str!("../data/trees/demo_spine.json");
/// Three nodes: a simple check, a 2-of-3 node and a final simple check.
pub const DEMO_THREE_JSON: &str = include_str!("../data/trees/demo_three.json");

pub fn domain(name: &str) -> Option<Domain> {
    DOMAINS.into_iter().find(|d| d.name == name)
}

impl Domain {
    pub fn tree(&self) -> GuidanceTree {
        parse_tree(self.tree_json.as_bytes()).expect("bundled tree parses")
    }

    pub fn templates(&self) -> TemplateSet {
        TemplateSet::from_json(self.templates_json).expect("bundled templates parse")
    }

    pub fn plan(&self) -> GenerationPlan {
        serde_json::from_str(self.plan_json).expect("bundled plan parses")
    }

    /// Path of the tree as recorded in corpus headers.
    pub fn tree_path(&self) -> String {
        format!("trees/{}.json", self.name)
    }

    /// The shipped corpus.
    pub fn corpus(&self) -> CorpusManifest {
        parse_corpus(self.corpus_jsonl, &self.tree()).expect("bundled corpus is valid")
    }

    /// Regenerate the corpus from the bundled tree, templates and plan.
    pub fn generate(&self) -> Result<CorpusManifest, GenerateError> {
        let tree = self.tree();
        let vignettes = generate_vignettes(&tree, &self.plan(), &self.templates())?;
        Ok(CorpusManifest::new(&tree, &self.tree_path(), vignettes))
    }
}

pub fn demo_spine() -> GuidanceTree {
    parse_tree(DEMO_SPINE_JSON.as_bytes()).expect("bundled tree parses")
}

pub fn demo_three() -> GuidanceTree {
    parse_tree(DEMO_THREE_JSON.as_bytes()).expect("bundled tree parses")
}
