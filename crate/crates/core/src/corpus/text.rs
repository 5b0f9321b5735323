use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{word_count, Category, LengthCondition, Vignette};
use crate::oracle::{Answer, Oracle, OracleDescriptor, OracleError, Question, YesNo};
use crate::tree::GuidanceTree;

/// Management language that must never appear in a vignette.
pub const BANNED_PHRASES: [&str; 8] = [
    "refer",
    "recommend",
    "should",
    "management plan",
    "prescribe",
    "admit",
    "follow-up",
    "urgent",
];

const AFFIRM: [&str; 3] = [
    "The patient reports {p}.",
    "The history is notable for {p}.",
    "On review, there is {p}.",
];

const DENY: [&str; 3] = [
    "The patient denies {p}.",
    "There is no evidence of {p}.",
    "No {p} is reported.",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureTemplate {
    /// Lower-case noun phrase without a leading article.
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSet {
    pub domain: String,
    /// Sentences with `{age}`, `{sex}` and `{complaint}` slots.
    pub openers: Vec<String>,
    /// Words substituted for `{sex}`; both are used when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sexes: Vec<String>,
    pub complaints: Vec<String>,
    /// Neutral sentences used to reach a length band.
    pub fillers: Vec<String>,
    pub features: BTreeMap<String, FeatureTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("invalid template file: {0}")]
    Parse(String),
    #[error("no template for feature `{0}`")]
    MissingTemplate(String),
    #[error("phrase of `{inner}` occurs inside the phrase of `{outer}`")]
    OverlappingPhrase { inner: String, outer: String },
    #[error("template text contains banned phrase `{phrase}`: {text:?}")]
    Banned { phrase: &'static str, text: String },
    #[error("template text mentions the phrase of `{feature}`: {text:?}")]
    Leak { feature: String, text: String },
    #[error("template set has no {0}")]
    Empty(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error("no template for feature `{0}`")]
    MissingTemplate(String),
    #[error("cannot fit {condition} band: findings alone take {base_words} words")]
    LengthInfeasible {
        condition: LengthCondition,
        base_words: usize,
    },
    #[error("generated text contains banned phrase `{0}`")]
    BannedPhrase(&'static str),
}

fn banned_in(text: &str) -> Option<&'static str> {
    let lower = text.to_lowercase();
    BANNED_PHRASES.into_iter().find(|p| lower.contains(p))
}

fn render(pattern: &str, phrase: &str) -> String {
    pattern.replace("{p}", phrase)
}

impl TemplateSet {
    pub fn from_json(text: &str) -> Result<Self, TemplateError> {
        let set: TemplateSet = serde_json::from_str(text).map_err(|e| TemplateError::Parse(e.to_string()))?;
        set.check()?;
        Ok(set)
    }

    /// Internal consistency: phrases are unique and never nested, and no
    /// free text contains a banned phrase or a feature phrase.
    pub fn check(&self) -> Result<(), TemplateError> {
        if self.openers.is_empty() {
            return Err(TemplateError::Empty("openers"));
        }
        if self.complaints.is_empty() {
            return Err(TemplateError::Empty("complaints"));
        }
        for (a, ta) in &self.features {
            for (b, tb) in &self.features {
                if a != b && tb.phrase.contains(&ta.phrase) {
                    return Err(TemplateError::OverlappingPhrase {
                        inner: a.clone(),
                        outer: b.clone(),
                    });
                }
            }
        }
        let free = self
            .openers
            .iter()
            .chain(&self.complaints)
            .chain(&self.fillers);
        for text in free.clone().chain(self.features.values().map(|t| &t.phrase)) {
            if let Some(phrase) = banned_in(text) {
                return Err(TemplateError::Banned {
                    phrase,
                    text: text.clone(),
                });
            }
        }
        for text in free {
            for (f, t) in &self.features {
                if text.contains(&t.phrase) {
                    return Err(TemplateError::Leak {
                        feature: f.clone(),
                        text: text.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Every feature of `tree` must have a template.
    pub fn covers(&self, tree: &GuidanceTree) -> Result<(), TemplateError> {
        match tree.features().into_iter().find(|f| !self.features.contains_key(*f)) {
            Some(f) => Err(TemplateError::MissingTemplate(f.to_string())),
            None => Ok(()),
        }
    }

    fn phrase(&self, feature: &str) -> Result<&str, TextError> {
        self.features
            .get(feature)
            .map(|t| t.phrase.as_str())
            .ok_or_else(|| TextError::MissingTemplate(feature.to_string()))
    }

    pub fn affirmations(&self, feature: &str) -> Option<Vec<String>> {
        let p = self.features.get(feature)?;
        Some(AFFIRM.iter().map(|pat| render(pat, &p.phrase)).collect())
    }
}

/// Deterministic narrative for a vignette spec: each positive feature is
/// affirmed, each false feature denied, and neutral filler sentences bring
/// the word count into `length`'s band.
pub fn synthesize_text(
    spec: &Vignette,
    templates: &TemplateSet,
    length: LengthCondition,
    seed: u64,
) -> Result<String, TextError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let age: u32 = rng.random_range(24..=82);
    let sex = match templates.sexes.as_slice() {
        [] => ["woman", "man"][rng.random_range(0..2)],
        list => list[rng.random_range(0..list.len())].as_str(),
    };
    let complaint = &templates.complaints[rng.random_range(0..templates.complaints.len())];
    let opener = templates.openers[rng.random_range(0..templates.openers.len())]
        .replace("{age}", &age.to_string())
        .replace("{sex}", sex)
        .replace("{complaint}", complaint);

    let mut body = Vec::new();
    for (feature, &present) in &spec.features {
        let phrase = templates.phrase(feature)?;
        let patterns = if present { &AFFIRM } else { &DENY };
        body.push(render(patterns[rng.random_range(0..patterns.len())], phrase));
    }

    let base_words = word_count(&opener) + body.iter().map(|s| word_count(s)).sum::<usize>();
    let infeasible = TextError::LengthInfeasible {
        condition: length,
        base_words,
    };
    let mut fillers: Vec<&String> = templates.fillers.iter().collect();
    fillers.shuffle(&mut rng);
    let mut words = base_words;
    let mut chosen = Vec::new();
    match length {
        LengthCondition::Unconstrained => {
            let want = rng.random_range(3..=8usize);
            chosen.extend(fillers.iter().take(want));
        }
        LengthCondition::Short => {
            if base_words > 100 {
                return Err(infeasible);
            }
            let want = rng.random_range(1..=4usize);
            for f in &fillers {
                if chosen.len() == want {
                    break;
                }
                if words + word_count(f) <= 100 {
                    words += word_count(f);
                    chosen.push(f);
                }
            }
        }
        LengthCondition::Medium | LengthCondition::Long => {
            let (floor, ceiling) = if length == LengthCondition::Medium {
                (101, 199)
            } else {
                (200, usize::MAX)
            };
            if base_words > ceiling {
                return Err(infeasible);
            }
            for f in &fillers {
                if words >= floor {
                    break;
                }
                if words + word_count(f) <= ceiling {
                    words += word_count(f);
                    chosen.push(f);
                }
            }
            if words < floor {
                return Err(infeasible);
            }
        }
    }
    body.extend(chosen.into_iter().map(|s| s.to_string()));
    body.shuffle(&mut rng);

    let mut text = opener;
    for sentence in body {
        text.push(' ');
        text.push_str(&sentence);
    }
    if let Some(p) = banned_in(&text) {
        return Err(TextError::BannedPhrase(p));
    }
    Ok(text)
}

/// Reads answers back out of synthesized text: a feature is present iff one
/// of its affirmation sentences occurs verbatim.
#[derive(Debug, Clone)]
pub struct KeywordOracle<'a> {
    text: &'a str,
    templates: &'a TemplateSet,
}

impl<'a> KeywordOracle<'a> {
    pub fn new(text: &'a str, templates: &'a TemplateSet) -> Self {
        KeywordOracle { text, templates }
    }
}

impl Oracle for KeywordOracle<'_> {
    fn answer(&mut self, q: &Question) -> Result<Answer, OracleError> {
        let forms = self
            .templates
            .affirmations(&q.feature_id)
            .ok_or_else(|| OracleError::AbsentFeature(q.feature_id.clone()))?;
        let present = forms.iter().any(|s| self.text.contains(s.as_str()));
        Ok(Answer::new(YesNo::from_bool(present)))
    }

    fn descriptor(&self) -> OracleDescriptor {
        OracleDescriptor::new("keyword", &self.templates.domain, "none")
    }
}

fn describe(templates: &TemplateSet, feature: &str) -> String {
    templates
        .features
        .get(feature)
        .map(|t| t.phrase.clone())
        .unwrap_or_else(|| feature.replace('_', " "))
}

fn length_instruction(length: LengthCondition) -> &'static str {
    match length {
        LengthCondition::Unconstrained => "Write a note of natural length for a primary care visit.",
        LengthCondition::Short => "The note must be at most 100 words long.",
        LengthCondition::Medium => "The note must be between 101 and 199 words long.",
        LengthCondition::Long => "The note must be at least 200 words long.",
    }
}

/// Self-contained prompt asking an external text model to write the
/// vignette described by `spec`.
pub fn emit_generation_prompt(spec: &Vignette, templates: &TemplateSet) -> String {
    let positives: Vec<String> = spec.positives().iter().map(|f| describe(templates, f)).collect();
    let negatives: Vec<String> = spec.negatives().iter().map(|f| describe(templates, f)).collect();
    let mut p = String::new();
    p.push_str(&format!(
        "You are writing a synthetic primary care clinical note for the {} domain.\n\n",
        spec.domain.replace('_', " ")
    ));
    p.push_str("Positive features (must be clearly present):\n");
    if positives.is_empty() {
        p.push_str("- none\n");
    }
    for f in &positives {
        p.push_str(&format!("- {f}\n"));
    }
    p.push_str("\nNegative features (must be explicitly denied or documented as absent):\n");
    if negatives.is_empty() {
        p.push_str("- none\n");
    }
    for f in &negatives {
        p.push_str(&format!("- {f}\n"));
    }
    p.push('\n');
    p.push_str(match spec.category {
        Category::Single => "Category: single-criteria. Include exactly one clear positive finding from the list above.\n",
        Category::Multi => "Category: multi-criteria. Include every positive finding above so that several conditions are present at once.\n",
        Category::Contrastive => "Category: contrastive-criteria. Include the positive findings and explicitly state that the negative findings are absent.\n",
        Category::Exclusion => "Category: exclusion-criteria. No listed condition may be present; any finding that appears must fall short of its diagnostic threshold.\n",
    });
    p.push_str(
        "Make the note realistic: include patient demographics, the presenting complaint, \
symptom description, examination findings and relevant history.\n",
    );
    p.push_str(
        "Do not provide any management recommendations, referrals, diagnoses or next steps.\n",
    );
    p.push_str(length_instruction(spec.length_condition));
    p.push('\n');
    p
}
