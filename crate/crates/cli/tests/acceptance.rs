//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use guidetree::batch::{run_corpus, run_many, OracleSpec};
use guidetree::builder::parse_model_tree;
use guidetree::corpus::{
    corpus_stats, generate_specs, render_stats_markdown, validate_vignette, Category, CorpusManifest,
    GenerationPlan,
};
use guidetree::engine::{traverse, traversal_difference, gold_trace, Limits};
use guidetree::eval::{aggregate_runs, build_run_report, macro_from_labels, prf, ConfusionCounts, MetricVector};
use guidetree::oracle::{AbsentFeaturePolicy, ConstantOracle, NoiseConfig, NoisyOracle, YesNo};
use guidetree::testing::random_tree;
use guidetree::tree::IssueCode;
use guidetree::{parse_tree, samples, serialize_tree, validate_tree, GuidanceTree};
use guidetree_cli::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PERFECT_BUDGET: Duration = Duration::from_secs(5);
const SAFETY_BUDGET: Duration = Duration::from_secs(60);
const SAFETY_SEEDS: u64 = 100;
const SAFETY_RUNS: usize = 5;
const P_NO_TO_YES: f64 = 0.3;
const PRF_TOL: f64 = 5e-4;
const MACRO_TOL: f64 = 1e-12;
const MACRO_CASES: usize = 1000;
const FUZZ_TREES: u64 = 500;
const FUZZ_ORACLES: u64 = 50;
const MIN_VIGNETTES: usize = 90;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(rel)
}

fn fixture_tree(rel: &str) -> GuidanceTree {
    parse_tree(&std::fs::read(data(rel)).unwrap()).unwrap()
}

fn perfect_oracle() -> Outcome {
    let start = Instant::now();
    let mut total = 0;
    for d in samples::DOMAINS {
        let (tree, corpus) = (d.tree(), d.generate().map_err(|e| e.to_string())?);
        let traces = run_corpus(&tree, &corpus, &OracleSpec::Scripted(AbsentFeaturePolicy::No), 0, None)
            .map_err(|e| e.to_string())?;
        let r = build_run_report(&tree, &corpus, &traces, 1).map_err(|e| e.to_string())?;
        let b = (r.binary.precision, r.binary.recall, r.binary.f1);
        let m = (r.multiclass.precision, r.multiclass.recall, r.multiclass.f1);
        check(b == (1.0, 1.0, 1.0), format!("{}: binary {b:?}", d.name))?;
        check(m == (1.0, 1.0, 1.0), format!("{}: multiclass {m:?}", d.name))?;
        check(r.traversal.rows.iter().all(|row| row.difference == 0), format!("{}: nonzero difference", d.name))?;
        check(r.aborted.is_empty(), format!("{}: aborted traversals", d.name))?;
        total += corpus.vignettes.len();
    }
    let elapsed = start.elapsed();
    check(total >= MIN_VIGNETTES, format!("only {total} vignettes"))?;
    check(elapsed < PERFECT_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("{total} vignettes, P=R=F1=1.00, all differences 0, {elapsed:.2?}"))
}

fn safety() -> Outcome {
    let start = Instant::now();
    let spec = OracleSpec::Noisy(NoiseConfig::new(P_NO_TO_YES, 0.0, 0));
    let mut runs = 0;
    let mut seeds_with_fp = BTreeSet::new();
    for d in samples::DOMAINS {
        let (tree, corpus) = (d.tree(), d.corpus());
        for seed in 0..SAFETY_SEEDS {
            let all = run_many(&tree, &corpus, &spec, seed * 1000, SAFETY_RUNS, None).map_err(|e| e.to_string())?;
            for (r, traces) in all.iter().enumerate() {
                let rep = build_run_report(&tree, &corpus, traces, r + 1).map_err(|e| e.to_string())?;
                check(
                    rep.binary.recall == 1.0,
                    format!("{} seed {seed} run {}: recall {}", d.name, r + 1, rep.binary.recall),
                )?;
                if rep.binary_counts.fp > 0 {
                    seeds_with_fp.insert(seed);
                }
                runs += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(!seeds_with_fp.is_empty(), "no false positive in any run; noise inactive")?;
    check(elapsed < SAFETY_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!(
        "recall 1.0 in {runs} runs ({SAFETY_SEEDS} seeds x {SAFETY_RUNS} runs x 3 domains), fp > 0 under {} seeds, {elapsed:.2?}",
        seeds_with_fp.len()
    ))
}

fn early_termination() -> Outcome {
    let (mut n, mut strict) = (0, 0);
    for d in samples::DOMAINS {
        let tree = d.tree();
        for v in d.corpus().vignettes {
            let gold = gold_trace(&tree, &v.id, &v.features).map_err(|e| e.to_string())?;
            let yes = traverse(&tree, &v.id, &mut ConstantOracle(YesNo::Yes), Limits::default()).map_err(|e| e.to_string())?;
            let diff = traversal_difference(&yes, &gold).map_err(|e| e.to_string())?;
            check(diff <= 0, format!("{}: difference {diff}", v.id))?;
            if gold.step_count >= 2 {
                check(diff < 0, format!("{}: gold {} steps, difference {diff}", v.id, gold.step_count))?;
                strict += 1;
            }
            n += 1;
        }
    }
    Ok(format!("{n} vignettes <= 0, {strict} with gold length >= 2 all < 0"))
}

fn metric_arithmetic() -> Outcome {
    let m = prf(ConfusionCounts::new(98, 22, 0, 8));
    let expected = (0.8167, 1.0, 0.8990);
    check(
        (m.precision - expected.0).abs() <= PRF_TOL
            && (m.recall - expected.1).abs() <= PRF_TOL
            && (m.f1 - expected.2).abs() <= PRF_TOL,
        format!("prf = {m:?}"),
    )?;
    let rounded = format!("{:.2}/{:.2}/{:.2}", m.precision, m.recall, m.f1);
    check(rounded == "0.82/1.00/0.90", format!("rounded {rounded}"))?;
    let five: Vec<MetricVector> = (0..5).map(|_| vec![("f1".to_string(), Some(0.90))]).collect();
    let agg = aggregate_runs(&five).map_err(|e| e.to_string())?;
    let rendered = agg.get("f1").map(|m| m.rendered()).unwrap_or_default();
    check(rendered == "0.90 ± 0.00", format!("rendered {rendered:?}"))?;
    Ok(format!("prf(98,22,0,8) = {rounded}; five runs of 0.90 render \"{rendered}\""))
}

/// Per-class tallies straight from the definitions.
fn brute_force(pairs: &[(String, String)]) -> (f64, f64, f64) {
    let classes: BTreeSet<&String> = pairs.iter().flat_map(|(g, p)| [g, p]).collect();
    let (mut ps, mut rs, mut fs) = (0.0, 0.0, 0.0);
    for c in &classes {
        let tp = pairs.iter().filter(|(g, p)| g == *c && p == *c).count() as f64;
        let predicted = pairs.iter().filter(|(_, p)| p == *c).count() as f64;
        let actual = pairs.iter().filter(|(g, _)| g == *c).count() as f64;
        let p = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let r = if actual > 0.0 { tp / actual } else { 0.0 };
        ps += p;
        rs += r;
        fs += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    let n = classes.len() as f64;
    (ps / n, rs / n, fs / n)
}

fn matches_brute_force(pairs: &[(String, String)]) -> Result<(), String> {
    let m = macro_from_labels(pairs);
    let (p, r, f) = brute_force(pairs);
    check(
        (m.precision - p).abs() <= MACRO_TOL && (m.recall - r).abs() <= MACRO_TOL && (m.f1 - f).abs() <= MACRO_TOL,
        format!("({}, {}, {}) vs brute force ({p}, {r}, {f}) on {pairs:?}", m.precision, m.recall, m.f1),
    )
}

fn macro_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    for _ in 0..MACRO_CASES {
        let k = rng.random_range(2..=8);
        let n = rng.random_range(1..=80);
        let pairs: Vec<(String, String)> = (0..n)
            .map(|_| (format!("c{}", rng.random_range(0..k)), format!("c{}", rng.random_range(0..k))))
            .collect();
        matches_brute_force(&pairs)?;
    }
    let crafted: Vec<(String, String)> = [("a", "a"), ("a", "b"), ("b", "b"), ("b", "b"), ("b", "b")]
        .iter()
        .map(|(g, p)| (g.to_string(), p.to_string()))
        .collect();
    matches_brute_force(&crafted)?;
    let m = macro_from_labels(&crafted);
    let f1_of_means = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    check((m.f1 - f1_of_means).abs() > 1e-3, "crafted case does not separate the two averages")?;
    Ok(format!(
        "{MACRO_CASES} cases within {MACRO_TOL:e}; crafted mean-of-F1s {:.4} vs F1-of-means {f1_of_means:.4}",
        m.f1
    ))
}

fn validator_suite() -> Outcome {
    let cases = [
        ("dangling_ref", IssueCode::DanglingRef),
        ("cycle", IssueCode::Cycle),
        ("unreachable", IssueCode::Unreachable),
        ("bad_threshold", IssueCode::BadThreshold),
        ("no_action_reachable", IssueCode::NoActionReachable),
    ];
    for (name, code) in cases {
        let r = validate_tree(&fixture_tree(&format!("fixtures/invalid/{name}.json")));
        let codes: Vec<IssueCode> = r.error_codes().into_iter().collect();
        check(!r.ok && codes == [code], format!("{name}: {codes:?}"))?;
    }
    let mut walks = 0;
    for t in 0..FUZZ_TREES {
        let tree = random_tree(t, 20);
        check(validate_tree(&tree).ok, format!("fuzz tree {t} invalid"))?;
        for o in 0..FUZZ_ORACLES {
            let mut oracle = NoisyOracle::new(ConstantOracle(YesNo::No), NoiseConfig::new(0.5, 0.0, t * FUZZ_ORACLES + o));
            let trace = traverse(&tree, "v", &mut oracle, Limits::default())
                .map_err(|e| format!("fuzz tree {t} oracle {o}: {e}"))?;
            check(
                trace.outcome.is_some() && trace.step_count <= tree.nodes.len(),
                format!("fuzz tree {t} oracle {o}: {} steps", trace.step_count),
            )?;
            walks += 1;
        }
    }
    Ok(format!("5 fixtures rejected with their codes; {walks} fuzz traversals terminated within |nodes|"))
}

fn corpus_contracts() -> Outcome {
    let mut n = 0;
    for d in samples::DOMAINS {
        let tree = d.tree();
        let corpus = d.generate().map_err(|e| e.to_string())?;
        for v in &corpus.vignettes {
            let violations = validate_vignette(&tree, v);
            check(violations.is_empty(), format!("{}: {:?}", v.id, violations))?;
            n += 1;
        }
    }
    let all = [Category::Single, Category::Contrastive, Category::Multi, Category::Exclusion];
    let mut cells = Vec::new();
    for (file, infeasible) in [("lab_threshold_only.json", Category::Multi), ("always_action.json", Category::Exclusion)] {
        let tree = fixture_tree(&format!("fixtures/{file}"));
        let full: Vec<(Category, usize)> = all.iter().map(|c| (*c, 2)).collect();
        let err = generate_specs(&tree, &GenerationPlan::new(1, &full)).err();
        check(
            err.as_ref().map(|e| e.category) == Some(infeasible),
            format!("{file}: expected {infeasible} infeasible, got {err:?}"),
        )?;
        let feasible: Vec<(Category, usize)> = all.iter().filter(|c| **c != infeasible).map(|c| (*c, 2)).collect();
        let specs = generate_specs(&tree, &GenerationPlan::new(1, &feasible)).map_err(|e| format!("{file}: {e}"))?;
        let manifest = CorpusManifest::new(&tree, file, specs);
        let table = render_stats_markdown(&[corpus_stats(&manifest, &tree)]);
        let row = format!("| {} | NA |", infeasible.title());
        check(table.contains(&row), format!("{file}: table lacks `{row}`:\n{table}"))?;
        cells.push(format!("{} NA", infeasible.title()));
    }
    Ok(format!("{n} generated vignettes pass their contracts; {}", cells.join(", ")))
}

fn builder_golden() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fixtures = data("fixtures/builder");
    let args = BuildTreeArgs {
        guideline: fixtures.join("guideline.md"),
        out: dir.path().to_path_buf(),
        budget: 80,
        offline: true,
        replies: Some(fixtures.clone()),
        remote: RemoteArgs {
            remote_config: None,
            endpoint: None,
            model: None,
            temperature: None,
            timeout_ms: None,
            max_retries: None,
            rps: None,
        },
    };
    cmd_build_tree(&args, &mut Vec::new()).map_err(|e| e.to_string())?;
    let built = std::fs::read(dir.path().join("tree.json")).map_err(|e| e.to_string())?;
    let golden = std::fs::read(fixtures.join("merged_golden.json")).map_err(|e| e.to_string())?;
    check(built == golden, "merged tree differs from golden")?;
    check(serialize_tree(&parse_tree(&built).map_err(|e| e.to_string())?) == built, "golden not canonical")?;
    let bad = std::fs::read_to_string(fixtures.join("reply_bad_threshold.txt")).map_err(|e| e.to_string())?;
    let err = parse_model_tree(&bad, 1).err().ok_or("bad-threshold reply accepted")?;
    check(
        err.segment_index() == Some(1) && err.has_code(IssueCode::BadThreshold),
        format!("unexpected rejection: {err}"),
    )?;
    Ok(format!("3 segments merge byte-identical to golden; bad reply rejected: {err}"))
}

fn files(dir: &Path, suffix: &str) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(suffix))
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect()
}

fn replay_and_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for d in samples::DOMAINS {
        let tree = data(&format!("trees/{}.json", d.name));
        let corpus = data(&format!("corpora/{}.jsonl", d.name));
        for oracle in [OracleKind::Scripted, OracleKind::Noisy] {
            let run_dir = |tag: &str| dir.path().join(format!("{}-{oracle:?}-{tag}", d.name));
            let mut a = run_args(&tree, &corpus, oracle, &run_dir("a"));
            a.seed = 42;
            let mut b = run_args(&tree, &corpus, oracle, &run_dir("b"));
            b.seed = 42;
            b.jobs = Some(1);
            let ra = cmd_run(&a, &mut std::io::empty(), &mut Vec::new()).map_err(|e| e.to_string())?;
            cmd_run(&b, &mut std::io::empty(), &mut Vec::new()).map_err(|e| e.to_string())?;
            let ta = files(&a.out, ".traces.jsonl");
            check(ta.len() == 5 && ta == files(&b.out, ".traces.jsonl"), format!("{}: traces differ", d.name))?;

            let eval = EvalArgs {
                tree: tree.clone(),
                corpus: corpus.clone(),
                traces: a.out.clone(),
                out: run_dir("eval"),
                json: false,
            };
            let re = cmd_eval(&eval, &mut Vec::new()).map_err(|e| e.to_string())?;
            check(re == ra, format!("{}: eval report differs in memory", d.name))?;
            let (run_reports, eval_reports) = (report_files(&a.out).map_err(|e| e.to_string())?, report_files(&eval.out).map_err(|e| e.to_string())?);
            check(run_reports == eval_reports, format!("{}: eval report files differ", d.name))?;
            compared += run_reports.len();
        }
    }
    Ok(format!("{compared} report files byte-identical between run and eval; repeated runs give identical traces"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("perfect-oracle end-to-end", perfect_oracle),
        ("safety regime", safety),
        ("early termination", early_termination),
        ("metric arithmetic", metric_arithmetic),
        ("macro-metric oracle equivalence", macro_equivalence),
        ("validator suite", validator_suite),
        ("corpus contracts", corpus_contracts),
        ("builder golden", builder_golden),
        ("replay and determinism", replay_and_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("PASS {} {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {} {name}: panicked", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
