use std::sync::Arc;

use guidetree::batch::{run_corpus, run_many, OracleSpec};
use guidetree::engine::{traverse, Limits, Trace};
use guidetree::oracle::*;
use guidetree::samples;
use guidetree::seed;

fn lines(traces: &[Trace]) -> Vec<String> {
    traces.iter().map(Trace::to_json_line).collect()
}

#[test]
fn output_order_does_not_depend_on_jobs() {
    let d = samples::HEADACHE;
    let (tree, corpus) = (d.tree(), d.corpus());
    let spec = OracleSpec::Noisy(NoiseConfig::new(0.3, 0.1, 0));
    let one = run_corpus(&tree, &corpus, &spec, 11, Some(1)).unwrap();
    for jobs in [Some(2), Some(8), None] {
        assert_eq!(lines(&run_corpus(&tree, &corpus, &spec, 11, jobs).unwrap()), lines(&one));
    }
    let ids: Vec<&str> = one.iter().map(|t| t.vignette_id.as_str()).collect();
    let expected: Vec<&str> = corpus.vignettes.iter().map(|v| v.id.as_str()).collect();
    assert_eq!(ids, expected);
}

#[test]
fn noisy_vignette_seed_is_derived_from_run_seed_and_index() {
    let d = samples::LOWER_BACK_PAIN;
    let (tree, corpus) = (d.tree(), d.corpus());
    let traces = run_corpus(&tree, &corpus, &OracleSpec::Noisy(NoiseConfig::new(0.3, 0.0, 0)), 5, Some(4)).unwrap();
    for (i, (t, v)) in traces.iter().zip(&corpus.vignettes).enumerate() {
        let mut o = NoisyOracle::new(
            ScriptedOracle::gold(v.features.clone()),
            NoiseConfig::new(0.3, 0.0, seed::derive(5, i as u64)),
        );
        let direct = traverse(&tree, &v.id, &mut o, Limits::default()).unwrap();
        assert_eq!(direct.to_json_line(), t.to_json_line(), "{}", v.id);
    }
}

#[test]
fn runs_use_consecutive_seeds() {
    let d = samples::PROSTATE_CANCER;
    let (tree, corpus) = (d.tree(), d.corpus());
    let spec = OracleSpec::Noisy(NoiseConfig::new(0.3, 0.0, 0));
    let many = run_many(&tree, &corpus, &spec, 100, 3, Some(2)).unwrap();
    assert_eq!(many.len(), 3);
    for (r, run) in many.iter().enumerate() {
        let single = run_corpus(&tree, &corpus, &spec, 101 + r as u64, Some(1)).unwrap();
        assert_eq!(lines(run), lines(&single));
    }
    assert_ne!(lines(&many[0]), lines(&many[1]));
}

#[test]
fn keyword_and_scripted_agree_on_shipped_corpora() {
    for d in samples::DOMAINS {
        let (tree, corpus) = (d.tree(), d.corpus());
        let kw = run_corpus(&tree, &corpus, &OracleSpec::Keyword(Arc::new(d.templates())), 0, None).unwrap();
        let gold = run_corpus(&tree, &corpus, &OracleSpec::Scripted(AbsentFeaturePolicy::No), 0, None).unwrap();
        for (a, b) in kw.iter().zip(&gold) {
            assert_eq!(a.outcome, b.outcome, "{}", a.vignette_id);
        }
    }
}

#[test]
fn unreachable_remote_yields_aborted_traces() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}/v1", listener.local_addr().unwrap());
    drop(listener);
    let config = RemoteConfig {
        endpoint,
        timeout_ms: 1_000,
        max_retries: 0,
        ..RemoteConfig::default()
    };
    let d = samples::LOWER_BACK_PAIN;
    let mut corpus = d.corpus();
    corpus.vignettes.truncate(3);
    let traces = run_corpus(&d.tree(), &corpus, &OracleSpec::Remote(config), 0, Some(2)).unwrap();
    assert_eq!(traces.len(), 3);
    assert!(traces.iter().all(|t| t.aborted && t.outcome.is_none() && t.error.is_some()));
}

#[test]
fn invalid_noise_is_a_config_error() {
    let d = samples::HEADACHE;
    let spec = OracleSpec::Noisy(NoiseConfig::new(2.0, 0.0, 0));
    assert!(run_corpus(&d.tree(), &d.corpus(), &spec, 0, Some(1)).is_err());
}
