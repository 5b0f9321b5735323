use std::collections::BTreeMap;

use super::{AbsentFeaturePolicy, Answer, Oracle, OracleDescriptor, OracleError, Question, YesNo};

/// Look the question's feature up in a gold feature map.
pub fn scripted_answer(
    features: &BTreeMap<String, bool>,
    question: &Question,
    policy: AbsentFeaturePolicy,
) -> Result<Answer, OracleError> {
    match (features.get(&question.feature_id), policy) {
        (Some(&present), _) => Ok(Answer::new(YesNo::from_bool(present))),
        (None, AbsentFeaturePolicy::No) => Ok(Answer::no()),
        (None, AbsentFeaturePolicy::Error) => {
            Err(OracleError::AbsentFeature(question.feature_id.clone()))
        }
    }
}

/// Answers from a vignette's gold feature assignment.
#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    features: BTreeMap<String, bool>,
    policy: AbsentFeaturePolicy,
    label: &'static str,
}

impl ScriptedOracle {
    pub fn new(features: BTreeMap<String, bool>, policy: AbsentFeaturePolicy) -> Self {
        ScriptedOracle {
            features,
            policy,
            label: "scripted",
        }
    }

    /// The perfect oracle that defines a vignette's optimal path.
    pub fn gold(features: BTreeMap<String, bool>) -> Self {
        ScriptedOracle {
            features,
            policy: AbsentFeaturePolicy::No,
            label: "gold",
        }
    }
}

impl Oracle for ScriptedOracle {
    fn answer(&mut self, question: &Question) -> Result<Answer, OracleError> {
        scripted_answer(&self.features, question, self.policy)
    }

    fn descriptor(&self) -> OracleDescriptor {
        OracleDescriptor::new(self.label, &self.policy, "none")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(feature: &str) -> Question {
        Question {
            feature_id: feature.into(),
            text: format!("{feature}?"),
            node_id: "n1".into(),
            criterion_index: None,
        }
    }

    fn features(pairs: &[(&str, bool)]) -> BTreeMap<String, bool> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn direct_lookup() {
        let yes = scripted_answer(&features(&[("thunderclap", true)]), &q("thunderclap"), AbsentFeaturePolicy::No);
        assert_eq!(yes.unwrap().value, YesNo::Yes);
        let no = scripted_answer(&features(&[("thunderclap", false)]), &q("thunderclap"), AbsentFeaturePolicy::No);
        assert_eq!(no.unwrap().value, YesNo::No);
    }

    #[test]
    fn absent_feature_policy() {
        let empty = BTreeMap::new();
        assert_eq!(
            scripted_answer(&empty, &q("fever"), AbsentFeaturePolicy::No).unwrap().value,
            YesNo::No
        );
        assert_eq!(
            scripted_answer(&empty, &q("fever"), AbsentFeaturePolicy::Error),
            Err(OracleError::AbsentFeature("fever".into()))
        );
    }
}
