use super::Segment;

pub const TREE_PROMPT_VERSION: &str = "tree-prompt/1";

const DEFAULT_SCHEMA: &str = r#"{
  "schema_version": "1",
  "domain": "<domain id>",
  "root": "<id of the first node>",
  "nodes": {
    "<node id>": {
      "kind": "simple",
      "feature": "<snake_case feature id>",
      "question": "<yes/no question about the patient>",
      "on_yes": {"action": "<action id>"} | {"node": "<node id>"} | {"end": true} | {"continue": true},
      "on_no": <same target forms>
    },
    "<node id>": {
      "kind": "multi",
      "criteria": [
        {"feature": "<feature id>", "question": "<yes/no question>"}
      ],
      "threshold": <how many criteria must hold, between 1 and the number of criteria>,
      "on_met": <target>,
      "on_not_met": <target>
    }
  },
  "actions": {
    "<action id>": {"label": "<recommendation>", "referral": true | false}
  }
}"#;

const EXAMPLE: &str = r#"{
  "schema_version": "1",
  "domain": "headache",
  "root": "n_thunderclap",
  "nodes": {
    "n_thunderclap": {
      "kind": "simple",
      "feature": "thunderclap_headache",
      "question": "Does the patient have a thunderclap headache?",
      "on_yes": {"action": "A_emergency"},
      "on_no": {"node": "n_gca"}
    },
    "n_gca": {
      "kind": "multi",
      "criteria": [
        {"feature": "jaw_claudication", "question": "Does the patient have jaw claudication?"},
        {"feature": "scalp_tenderness", "question": "Does the patient have scalp tenderness?"},
        {"feature": "age_over_50", "question": "Is the patient older than 50?"}
      ],
      "threshold": 2,
      "on_met": {"action": "A_same_day"},
      "on_not_met": {"continue": true}
    }
  },
  "actions": {
    "A_emergency": {"label": "Emergency referral", "referral": true},
    "A_same_day": {"label": "Same-day specialist assessment", "referral": true}
  }
}"#;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("tree prompt template has an empty schema block")]
    EmptySchema,
}

/// Instruction template for turning one guideline segment into a subtree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreePromptTemplate {
    schema: String,
    example: String,
}

impl TreePromptTemplate {
    pub fn new(schema: &str, example: &str) -> Result<Self, PromptError> {
        if schema.trim().is_empty() {
            return Err(PromptError::EmptySchema);
        }
        Ok(TreePromptTemplate {
            schema: schema.to_string(),
            example: example.to_string(),
        })
    }

    pub fn version(&self) -> &'static str {
        TREE_PROMPT_VERSION
    }

    pub fn render(&self, segment: &Segment) -> String {
        let mut p = String::new();
        p.push_str(&format!("[{TREE_PROMPT_VERSION}] segment {}\n\n", segment.index));
        p.push_str(
            "Extract the decision logic of the guideline excerpt below into a guidance tree. \
Reply with a single JSON document that follows this schema exactly:\n\n",
        );
        p.push_str(&self.schema);
        p.push_str("\n\nRules:\n");
        p.push_str("- Use a \"simple\" node for a single yes/no feature check.\n");
        p.push_str("- Use a \"multi\" node when the excerpt requires at least k of n listed criteria; set \"threshold\" to k and list every criterion.\n");
        p.push_str("- Order checks so that the most urgent referral criteria come first.\n");
        p.push_str("- When the excerpt does not decide a case, point that exit at {\"continue\": true}; the next excerpt picks up from there.\n");
        p.push_str("- Mark an action \"referral\": true when it sends the patient to a specialist or emergency service.\n");
        p.push_str("- Use snake_case ids for features, and do not invent criteria that are not in the excerpt.\n");
        if !self.example.trim().is_empty() {
            p.push_str("\nExample with both node kinds:\n\n");
            p.push_str(&self.example);
            p.push('\n');
        }
        p.push_str("\nGuideline excerpt:\n\n\"\"\"\n");
        p.push_str(&segment.text);
        if !segment.text.ends_with('\n') {
            p.push('\n');
        }
        p.push_str("\"\"\"\n");
        p
    }
}

impl Default for TreePromptTemplate {
    fn default() -> Self {
        TreePromptTemplate::new(DEFAULT_SCHEMA, EXAMPLE).expect("built-in schema is non-empty")
    }
}

/// Render the built-in tree-construction prompt for `segment`.
pub fn emit_tree_prompt(segment: &Segment) -> String {
    TreePromptTemplate::default().render(segment)
}
