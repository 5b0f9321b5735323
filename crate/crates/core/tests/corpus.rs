use std::collections::BTreeMap;
use std::path::PathBuf;

use guidetree::corpus::*;
use guidetree::engine::{gold_trace, traverse, Limits};
use guidetree::samples;
use guidetree::testing::random_tree;
use guidetree::*;
use proptest::prelude::*;
use serde_json::{json, Value};

fn fixture_tree(name: &str) -> GuidanceTree {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/fixtures").join(name);
    parse_tree(&std::fs::read(path).unwrap()).unwrap()
}

fn features(pairs: &[(&str, bool)]) -> BTreeMap<String, bool> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn spec(tree: &GuidanceTree, id: &str, category: Category, feats: BTreeMap<String, bool>) -> Vignette {
    let t = gold_trace(tree, id, &feats).unwrap();
    let outcome = t.outcome.unwrap();
    Vignette {
        id: id.into(),
        domain: tree.domain.clone(),
        category,
        length_condition: LengthCondition::Unconstrained,
        text: String::new(),
        word_count: 0,
        features: feats,
        gold_action: outcome.action,
        gold_referral: outcome.referral,
        gold_path_length: t.step_count,
    }
}

/// Rewrite vignette line `index` (0-based, header excluded) of a corpus.
fn edit_corpus(jsonl: &str, index: usize, edit: impl FnOnce(&mut Value)) -> String {
    let mut lines: Vec<String> = jsonl.lines().map(str::to_string).collect();
    let mut v: Value = serde_json::from_str(&lines[index + 1]).unwrap();
    edit(&mut v);
    lines[index + 1] = v.to_string();
    lines.join("\n") + "\n"
}

#[test]
fn shipped_corpora_match_configured_counts() {
    let expected = [
        ("headache", [36, 32, 30, 30], (98, 30)),
        ("lower_back_pain", [33, 33, 33, 0], (99, 0)),
        ("prostate_cancer", [27, 64, 0, 5], (91, 5)),
    ];
    for (name, [single, contrastive, multi, exclusion], (referral, non_referral)) in expected {
        let d = samples::domain(name).unwrap();
        let m = d.corpus();
        let counts = &m.header.category_counts;
        assert_eq!(counts[&Category::Single], single, "{name}");
        assert_eq!(counts[&Category::Contrastive], contrastive, "{name}");
        assert_eq!(counts[&Category::Multi], multi, "{name}");
        assert_eq!(counts[&Category::Exclusion], exclusion, "{name}");
        assert_eq!(m.header.referral_counts.referral, referral, "{name}");
        assert_eq!(m.header.referral_counts.non_referral, non_referral, "{name}");
        assert_eq!(tally_categories(&m.vignettes), *counts);
    }
}

#[test]
fn shipped_corpora_regenerate_byte_for_byte() {
    for d in samples::DOMAINS {
        assert_eq!(d.generate().unwrap().to_jsonl(), d.corpus_jsonl, "{}", d.name);
    }
}

#[test]
fn every_shipped_vignette_passes_its_contract() {
    for d in samples::DOMAINS {
        let tree = d.tree();
        for v in d.corpus().vignettes {
            assert!(validate_vignette(&tree, &v).is_empty(), "{}", v.id);
            assert_eq!(classify(&tree, &v), vec![v.category], "{}", v.id);
            assert_eq!(v.word_count, word_count(&v.text));
            assert!(v.length_condition.admits(v.word_count), "{}", v.id);
            assert!(BANNED_PHRASES.iter().all(|p| !v.text.to_lowercase().contains(p)), "{}", v.id);
        }
    }
}

#[test]
fn length_conditions_cycle_on_lower_back_pain() {
    let m = samples::LOWER_BACK_PAIN.corpus();
    for (i, v) in m.vignettes.iter().enumerate() {
        let want = [LengthCondition::Short, LengthCondition::Medium, LengthCondition::Long][i % 3];
        assert_eq!(v.length_condition, want);
    }
}

#[test]
fn single_with_two_mapped_positives_is_rejected() {
    let d = samples::HEADACHE;
    let m = d.corpus();
    let index = m.vignettes.iter().position(|v| v.category == Category::Single).unwrap();
    let present = m.vignettes[index].positives().into_iter().next().unwrap().to_string();
    let extra = if present == "new_seizure" { "papilloedema" } else { "new_seizure" };
    let tree = d.tree();
    assert!(mapped_action(&tree, extra).is_some());
    let edited = edit_corpus(d.corpus_jsonl, index, |v| {
        v["features"][extra] = json!(true);
    });
    let err = parse_corpus(&edited, &tree).unwrap_err();
    assert!(err.violations().iter().any(|x| x.field == "category"), "{err}");
}

#[test]
fn wrong_gold_action_is_rejected() {
    let d = samples::HEADACHE;
    let edited = edit_corpus(d.corpus_jsonl, 0, |v| {
        v["gold_action"] = json!("A_self_care");
    });
    let err = parse_corpus(&edited, &d.tree()).unwrap_err();
    assert!(err.violations().iter().any(|x| x.field == "gold_action"), "{err}");
}

#[test]
fn header_counts_must_match() {
    let d = samples::PROSTATE_CANCER;
    let edited = d.corpus_jsonl.replacen("\"single\":27", "\"single\":26", 1);
    assert!(parse_corpus(&edited, &d.tree()).is_err());
    let other = d.corpus_jsonl.replacen(&guidetree::tree::tree_hash(&d.tree()), "0000", 1);
    assert!(matches!(parse_corpus(&other, &d.tree()), Err(CorpusError::BadHeader(_))));
    assert!(matches!(parse_corpus("", &d.tree()), Err(CorpusError::MissingHeader)));
}

#[test]
fn unknown_feature_is_rejected() {
    let d = samples::HEADACHE;
    let edited = edit_corpus(d.corpus_jsonl, 3, |v| {
        v["features"]["telepathy"] = json!(false);
    });
    assert!(parse_corpus(&edited, &d.tree()).is_err());
}

#[test]
fn exclusion_with_all_features_false() {
    let tree = samples::demo_spine();
    let all_false = tree.features().into_iter().map(|f| (f.to_string(), false)).collect();
    let v = spec(&tree, "x", Category::Exclusion, all_false);
    assert_eq!(v.gold_action, None);
    assert!(validate_vignette(&tree, &v).is_empty());
}

#[test]
fn multi_gold_is_the_most_urgent_action() {
    let tree = GuidanceTree::new("d", "n1")
        .with_node(Node::simple("n1", "f_b", "B?", Target::Action("A_y".into()), Target::Node("n2".into())))
        .with_node(Node::simple("n2", "f_a", "A?", Target::Action("A_x".into()), Target::End))
        .with_action("A_y", "Y", true)
        .with_action("A_x", "X", true);
    let mut tree = tree;
    tree.actions.get_mut("A_y").unwrap().priority = Some(1);
    tree.actions.get_mut("A_x").unwrap().priority = Some(3);
    let v = spec(&tree, "m", Category::Multi, features(&[("f_a", true), ("f_b", true)]));
    assert_eq!(v.gold_action.as_deref(), Some("A_y"));
    assert!(validate_vignette(&tree, &v).is_empty());
    let wrong = Vignette {
        gold_action: Some("A_x".into()),
        ..v
    };
    assert!(!validate_vignette(&tree, &wrong).is_empty());
}

#[test]
fn contrastive_needs_a_denied_feature() {
    let tree = samples::demo_spine();
    let v = spec(&tree, "c", Category::Contrastive, features(&[("chest_pain", true)]));
    assert!(validate_vignette(&tree, &v).iter().any(|x| x.field == "category"));
    let ok = spec(&tree, "c", Category::Contrastive, features(&[("chest_pain", true), ("weight_loss", false)]));
    assert!(validate_vignette(&tree, &ok).is_empty());
}

#[test]
fn no_action_vignette_cannot_claim_referral() {
    let tree = samples::demo_spine();
    let mut v = spec(&tree, "x", Category::Exclusion, features(&[("fatigue", false)]));
    v.gold_referral = true;
    assert!(!validate_vignette(&tree, &v).is_empty());
}

#[test]
fn lab_threshold_only_tree_has_no_multi_vignettes() {
    let tree = fixture_tree("lab_threshold_only.json");
    let err = generate_specs(&tree, &GenerationPlan::new(1, &[(Category::Multi, 5)])).unwrap_err();
    assert_eq!(err.category, Category::Multi);
    assert!(generate_specs(&tree, &GenerationPlan::new(1, &[(Category::Single, 3)])).is_ok());
    assert!(generate_specs(&tree, &GenerationPlan::new(1, &[(Category::Exclusion, 1)])).is_ok());
    let prostate = samples::PROSTATE_CANCER.tree();
    let err = generate_specs(&prostate, &GenerationPlan::new(1, &[(Category::Multi, 1)])).unwrap_err();
    assert_eq!(err.category, Category::Multi);
}

#[test]
fn always_action_tree_has_no_exclusion_vignettes() {
    let tree = fixture_tree("always_action.json");
    let err = generate_specs(&tree, &GenerationPlan::new(1, &[(Category::Exclusion, 5)])).unwrap_err();
    assert_eq!(err.category, Category::Exclusion);
    assert!(generate_specs(&tree, &GenerationPlan::new(1, &[(Category::Single, 2)])).is_ok());
    let lbp = samples::LOWER_BACK_PAIN.tree();
    let err = generate_specs(&lbp, &GenerationPlan::new(1, &[(Category::Exclusion, 1)])).unwrap_err();
    assert_eq!(err.category, Category::Exclusion);
}

#[test]
fn single_plan_covers_each_simple_feature_once() {
    let tree = samples::demo_spine();
    let specs = generate_specs(&tree, &GenerationPlan::new(3, &[(Category::Single, 4)])).unwrap();
    assert_eq!(specs.len(), 4);
    let mut seen: Vec<&str> = specs
        .iter()
        .map(|s| {
            assert_eq!(s.positives().len(), 1);
            assert_eq!(s.negatives().len(), 0);
            *s.positives().iter().next().unwrap()
        })
        .collect();
    seen.sort_unstable();
    assert_eq!(seen, ["chest_pain", "fatigue", "poor_sleep", "weight_loss"]);
    let ids: Vec<&str> = specs.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, ["demo-0001", "demo-0002", "demo-0003", "demo-0004"]);
}

#[test]
fn near_miss_exclusion_spec_on_demo_tree() {
    let tree = samples::demo_three();
    let specs = generate_specs(&tree, &GenerationPlan::new(5, &[(Category::Exclusion, 40)])).unwrap();
    let near = specs
        .iter()
        .find(|s| s.positives().len() == 1 && s.positives().iter().all(|f| f.starts_with('c')))
        .expect("a one-criterion exclusion spec");
    let t = gold_trace(&tree, &near.id, &near.features).unwrap();
    assert_eq!(t.steps[1].node_id, "n2");
    assert_eq!(t.steps[1].branch, Branch::NotMet);
    assert_eq!(near.gold_action, None);
}

#[test]
fn generation_is_deterministic_and_seed_sensitive() {
    let tree = samples::HEADACHE.tree();
    let plan = samples::HEADACHE.plan();
    assert_eq!(generate_specs(&tree, &plan).unwrap(), generate_specs(&tree, &plan).unwrap());
    let other = GenerationPlan { seed: plan.seed + 1, ..plan.clone() };
    assert_ne!(generate_specs(&tree, &plan).unwrap(), generate_specs(&tree, &other).unwrap());
}

fn headache_spec(pairs: &[(&str, bool)]) -> Vignette {
    let tree = samples::HEADACHE.tree();
    let category = if pairs.iter().any(|(_, v)| !v) {
        Category::Contrastive
    } else {
        Category::Single
    };
    spec(&tree, "headache-9999", category, features(pairs))
}

#[test]
fn short_text_affirms_the_positive_feature() {
    let templates = samples::HEADACHE.templates();
    let v = headache_spec(&[("thunderclap_headache", true)]);
    let text = synthesize_text(&v, &templates, LengthCondition::Short, 11).unwrap();
    assert!(word_count(&text) <= 100);
    let forms = templates.affirmations("thunderclap_headache").unwrap();
    assert!(forms.iter().any(|s| text.contains(s.as_str())), "{text}");
    assert_eq!(text, synthesize_text(&v, &templates, LengthCondition::Short, 11).unwrap());
}

#[test]
fn denied_feature_is_stated_as_absent() {
    let templates = samples::HEADACHE.templates();
    let v = headache_spec(&[("thunderclap_headache", true), ("focal_neuro_deficit", false)]);
    let text = synthesize_text(&v, &templates, LengthCondition::Unconstrained, 5).unwrap();
    let phrase = &templates.features["focal_neuro_deficit"].phrase;
    let denials = [
        format!("The patient denies {phrase}."),
        format!("There is no evidence of {phrase}."),
        format!("No {phrase} is reported."),
    ];
    assert!(denials.iter().any(|d| text.contains(d.as_str())), "{text}");
    let mut oracle = KeywordOracle::new(&text, &templates);
    let tree = samples::HEADACHE.tree();
    let t = traverse(&tree, &v.id, &mut oracle, Limits::default()).unwrap();
    assert_eq!(t.outcome.unwrap().action, v.gold_action);
}

#[test]
fn keyword_oracle_recovers_every_shipped_gold_outcome() {
    for d in samples::DOMAINS {
        let tree = d.tree();
        let templates = d.templates();
        for v in d.corpus().vignettes {
            let mut oracle = KeywordOracle::new(&v.text, &templates);
            let t = traverse(&tree, &v.id, &mut oracle, Limits::default()).unwrap();
            assert_eq!(t.outcome.unwrap().action, v.gold_action, "{}", v.id);
            assert_eq!(t.step_count, v.gold_path_length, "{}", v.id);
        }
    }
}

#[test]
fn generation_prompts_carry_the_spec() {
    let templates = samples::HEADACHE.templates();
    let single = headache_spec(&[("thunderclap_headache", true)]);
    let p = emit_generation_prompt(&single, &templates);
    assert!(p.contains(&templates.features["thunderclap_headache"].phrase));
    assert!(p.contains("Do not provide any management recommendations"));
    assert_eq!(p, emit_generation_prompt(&single, &templates));

    let contrastive = headache_spec(&[("thunderclap_headache", true), ("neck_stiffness", false)]);
    let p = emit_generation_prompt(&contrastive, &templates);
    assert!(p.contains("- sudden headache that peaked within one minute of onset"));
    assert!(p.contains("- neck stiffness"));
    assert!(p.contains("explicitly denied"));

    let tree = samples::HEADACHE.tree();
    let exclusion = spec(&tree, "x", Category::Exclusion, features(&[("fever", false), ("neck_stiffness", false)]));
    let p = emit_generation_prompt(&exclusion, &templates);
    assert!(p.contains("No listed condition may be present"));
}

#[test]
fn template_checks() {
    let mut t = samples::HEADACHE.templates();
    t.fillers.push("We recommend rest.".into());
    assert!(matches!(t.check(), Err(TemplateError::Banned { .. })));
    let mut t = samples::HEADACHE.templates();
    t.fillers.push("She has had a fever since Monday.".into());
    assert!(matches!(t.check(), Err(TemplateError::Leak { .. })));
    let mut t = samples::HEADACHE.templates();
    t.features.remove("fever");
    assert!(matches!(t.covers(&samples::HEADACHE.tree()), Err(TemplateError::MissingTemplate(_))));
}

#[test]
fn corpus_stats_average_and_empty() {
    let tree = samples::demo_spine();
    let mut a = spec(&tree, "demo-0001", Category::Single, features(&[("chest_pain", true)]));
    a.text = vec!["w"; 100].join(" ");
    a.word_count = 100;
    let mut b = spec(&tree, "demo-0002", Category::Single, features(&[("fatigue", true)]));
    b.text = vec!["w"; 181].join(" ");
    b.word_count = 181;
    let m = CorpusManifest::new(&tree, "trees/demo_spine.json", vec![a, b]);
    let s = corpus_stats(&m, &tree);
    assert_eq!(s.avg_word_count, Some(140.5));
    assert!(render_stats_markdown(&[s]).contains("140.5"));

    let empty = corpus_stats(&CorpusManifest::new(&tree, "t", vec![]), &tree);
    assert_eq!(empty.vignettes, 0);
    assert_eq!(empty.avg_word_count, None);
    assert_eq!(empty.referral + empty.non_referral, 0);
    assert!(render_stats_markdown(&[empty]).contains("NA"));
}

#[test]
fn stats_table_for_shipped_corpora() {
    let stats: Vec<CorpusStats> = samples::DOMAINS.iter().map(|d| corpus_stats(&d.corpus(), &d.tree())).collect();
    assert_eq!(stats.iter().map(|s| s.vignettes).collect::<Vec<_>>(), [128, 99, 96]);
    assert_eq!(stats.iter().map(|s| s.actions).collect::<Vec<_>>(), [24, 7, 11]);
    let md = render_stats_markdown(&stats);
    let row = |name: &str| md.lines().find(|l| l.contains(name)).unwrap().to_string();
    assert_eq!(row("Single-criteria").matches("| 36 |").count(), 1);
    assert!(row("Multi-criteria").contains("| NA |"));
    assert!(row("Exclusion-criteria").contains("| NA |"));
    assert!(row("Non-Referral").contains("| NA |"));
    assert!(render_stats_csv(&stats).lines().count() >= 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_specs_pass_validation(tree_seed in any::<u64>(), seed in any::<u64>()) {
        let tree = random_tree(tree_seed, 10);
        for category in Category::ALL {
            let plan = GenerationPlan::new(seed, &[(category, 6)]);
            if let Ok(specs) = generate_specs(&tree, &plan) {
                prop_assert_eq!(specs.len(), 6);
                for v in &specs {
                    prop_assert!(validate_vignette(&tree, v).is_empty(), "{:?}", validate_vignette(&tree, v));
                    prop_assert_eq!(classify(&tree, v), vec![category]);
                }
            }
        }
    }

    #[test]
    fn categories_are_disjoint(tree_seed in any::<u64>(), feature_seed in any::<u64>()) {
        let tree = random_tree(tree_seed, 10);
        let feats = guidetree::testing::random_features(&tree, feature_seed);
        let v = spec(&tree, "r", Category::Single, feats);
        prop_assert!(classify(&tree, &v).len() <= 1);
    }

    #[test]
    fn text_respects_length_bands(index in 0usize..128, seed in any::<u64>(), band in 0usize..3) {
        let d = samples::HEADACHE;
        let templates = d.templates();
        let v = &d.corpus().vignettes[index];
        let length = [LengthCondition::Short, LengthCondition::Medium, LengthCondition::Long][band];
        match synthesize_text(v, &templates, length, seed) {
            Ok(text) => {
                prop_assert!(length.admits(word_count(&text)));
                let mut oracle = KeywordOracle::new(&text, &templates);
                let t = traverse(&d.tree(), &v.id, &mut oracle, Limits::default()).unwrap();
                prop_assert_eq!(t.outcome.unwrap().action, v.gold_action.clone());
            }
            Err(TextError::LengthInfeasible { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

#[test]
fn band_edges() {
    assert!(LengthCondition::Short.admits(100));
    assert!(!LengthCondition::Medium.admits(100));
    assert!(LengthCondition::Medium.admits(101));
    assert!(LengthCondition::Medium.admits(199));
    assert!(!LengthCondition::Medium.admits(200));
    assert!(LengthCondition::Long.admits(200));
    assert!(!LengthCondition::Short.admits(101));
}
