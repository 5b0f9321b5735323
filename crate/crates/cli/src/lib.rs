//! Command-line front end for guidance trees: validation, corpus
//! generation, traversal runs, evaluation and trace inspection.
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O or configuration
//! error, 3 one or more traversals aborted.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use guidetree::batch::{run_corpus, OracleSpec};
use guidetree::builder::{emit_tree_prompt, merge_subtrees, parse_model_tree, segment_guideline, TREE_PROMPT_VERSION};
use guidetree::corpus::{
    corpus_stats, emit_generation_prompt, generate_vignettes, load_corpus, parse_corpus, render_stats_csv,
    render_stats_markdown, CorpusManifest, GenerationPlan, TemplateSet,
};
use guidetree::engine::{read_traces, traverse, write_traces, Limits, ReplayOracle, Trace};
use guidetree::eval::{aggregate_runs, build_run_report, AggregateReport, RunReport};
use guidetree::oracle::{
    AbsentFeaturePolicy, ChatClient, ChatMessage, InteractiveOracle, NoiseConfig, RemoteConfig, YesNo,
};
use guidetree::{parse_tree, samples, serialize_tree, validate_tree, GuidanceTree};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_ABORTED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{aborted} of {total} traversals aborted")]
    Aborted { aborted: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_VALIDATION,
            CliError::Read { .. } | CliError::Write { .. } | CliError::Config(_) => EXIT_IO,
            CliError::Aborted { .. } => EXIT_ABORTED,
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "guidetree", version, about = "Executable clinical guidance trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a tree document and print its validation report.
    Validate(ValidateArgs),
    /// Traverse a corpus with an oracle and write traces and reports.
    Run(RunArgs),
    /// Recompute reports from stored traces without querying any oracle.
    Eval(EvalArgs),
    /// Print the corpus overview table.
    Stats(StatsArgs),
    /// Show one vignette's audit trail step by step.
    Trace(TraceArgs),
    /// Generate a vignette corpus from a tree, templates and a plan.
    GenCorpus(GenCorpusArgs),
    /// Build a tree from a guideline document, one model prompt per segment.
    BuildTree(BuildTreeArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Scripted,
    Noisy,
    AlwaysYes,
    AlwaysNo,
    Keyword,
    Remote,
    Interactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AbsentArg {
    No,
    Error,
}

#[derive(Debug, Args)]
pub struct RemoteArgs {
    /// JSON file with remote settings; flags below take precedence.
    #[arg(long)]
    pub remote_config: Option<PathBuf>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Requests per second across all workers.
    #[arg(long)]
    pub rps: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "scripted")]
    pub oracle: OracleKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Only this vignette. Required by the interactive oracle.
    #[arg(long)]
    pub vignette: Option<String>,
    #[arg(long, default_value_t = 0.3)]
    pub p_no_to_yes: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p_yes_to_no: f64,
    /// Scripted answer for features a vignette does not mention.
    #[arg(long, value_enum, default_value = "no")]
    pub absent: AbsentArg,
    /// Template set for the keyword oracle; bundled domains find their own.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[command(flatten)]
    pub remote: RemoteArgs,
    /// Print the aggregate report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// A `run_N.traces.jsonl` file or a directory of them.
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Trees, paired in order with `--corpus`. Bundled corpora when omitted.
    #[arg(long)]
    pub tree: Vec<PathBuf>,
    #[arg(long)]
    pub corpus: Vec<PathBuf>,
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub vignette: String,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    /// A bundled domain; replaces `--tree`, `--templates` and `--plan`.
    #[arg(long, conflicts_with_all = ["tree", "templates", "plan"])]
    pub domain: Option<String>,
    #[arg(long, requires_all = ["templates", "plan"])]
    pub tree: Option<PathBuf>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Overrides the plan's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write one text-generation prompt per vignette here.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildTreeArgs {
    #[arg(long)]
    pub guideline: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Token budget per segment.
    #[arg(long, default_value_t = 1500)]
    pub budget: usize,
    /// Read `reply_N.txt` files from `--replies` instead of calling a model.
    #[arg(long, requires = "replies")]
    pub offline: bool,
    #[arg(long)]
    pub replies: Option<PathBuf>,
    #[command(flatten)]
    pub remote: RemoteArgs,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|source| CliError::Write {
        path: "<stdout>".into(),
        source,
    })
}

fn load_tree_unchecked(path: &Path) -> Result<GuidanceTree> {
    let bytes = fs::read(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_tree(&bytes).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

/// Parse and validate a tree; an invalid tree is a validation failure.
pub fn load_tree(path: &Path) -> Result<GuidanceTree> {
    let tree = load_tree_unchecked(path)?;
    let report = validate_tree(&tree);
    if !report.ok {
        let errors: Vec<String> = report.errors.iter().map(ToString::to_string).collect();
        return Err(CliError::Invalid(format!("{}: {}", path.display(), errors.join("; "))));
    }
    Ok(tree)
}

fn load_manifest(path: &Path, tree: &GuidanceTree) -> Result<CorpusManifest> {
    let text = read_text(path)?;
    parse_corpus(&text, tree).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn json_pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

pub fn dispatch(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Validate(a) => cmd_validate(&a, out),
        Command::Run(a) => cmd_run(&a, input, out).map(drop),
        Command::Eval(a) => cmd_eval(&a, out).map(drop),
        Command::Stats(a) => cmd_stats(&a, out),
        Command::Trace(a) => cmd_trace(&a, out),
        Command::GenCorpus(a) => cmd_gen_corpus(&a, out),
        Command::BuildTree(a) => cmd_build_tree(&a, out),
    }
}

/// Parse `args` and run the command, returning the process exit code.
/// Errors are reported on `err`.
pub fn main_with<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_IO } else { EXIT_OK };
        }
    };
    match dispatch(cli, input, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<()> {
    let tree = load_tree_unchecked(&args.tree)?;
    let report = validate_tree(&tree);
    if args.json {
        say(out, &json_pretty(&report))?;
    } else {
        let status = if report.ok { "ok" } else { "invalid" };
        say(out, &format!("{}: {status}\n", args.tree.display()))?;
        for e in &report.errors {
            say(out, &format!("error   {e}\n"))?;
        }
        for w in &report.warnings {
            say(out, &format!("warning {w}\n"))?;
        }
    }
    if report.ok {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{} validation error(s)", report.errors.len())))
    }
}

fn remote_config(args: &RemoteArgs) -> Result<RemoteConfig> {
    let mut config = match &args.remote_config {
        Some(path) => serde_json::from_str(&read_text(path)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        None => RemoteConfig::default(),
    };
    if let Some(e) = &args.endpoint {
        config.endpoint = e.clone();
    }
    if let Some(m) = &args.model {
        config.model = m.clone();
    }
    if let Some(t) = args.temperature {
        config.temperature = t;
    }
    if let Some(t) = args.timeout_ms {
        config.timeout_ms = t;
    }
    if let Some(r) = args.max_retries {
        config.max_retries = r;
    }
    if args.rps.is_some() {
        config.requests_per_second = args.rps;
    }
    config.check().map_err(CliError::Config)?;
    Ok(config.with_key_from_env())
}

fn keyword_templates(args: &RunArgs, tree: &GuidanceTree) -> Result<TemplateSet> {
    let templates = match &args.templates {
        Some(path) => TemplateSet::from_json(&read_text(path)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        None => samples::domain(&tree.domain)
            .map(|d| d.templates())
            .ok_or_else(|| CliError::Config(format!("no bundled templates for domain `{}`; pass --templates", tree.domain)))?,
    };
    templates
        .covers(tree)
        .map_err(|e| CliError::Config(format!("templates do not cover the tree: {e}")))?;
    Ok(templates)
}

fn oracle_spec(args: &RunArgs, tree: &GuidanceTree) -> Result<OracleSpec> {
    let absent = match args.absent {
        AbsentArg::No => AbsentFeaturePolicy::No,
        AbsentArg::Error => AbsentFeaturePolicy::Error,
    };
    Ok(match args.oracle {
        OracleKind::Scripted => OracleSpec::Scripted(absent),
        OracleKind::Noisy => {
            let noise = NoiseConfig::new(args.p_no_to_yes, args.p_yes_to_no, args.seed);
            noise.check().map_err(CliError::Config)?;
            OracleSpec::Noisy(noise)
        }
        OracleKind::AlwaysYes => OracleSpec::Constant(YesNo::Yes),
        OracleKind::AlwaysNo => OracleSpec::Constant(YesNo::No),
        OracleKind::Keyword => OracleSpec::Keyword(Arc::new(keyword_templates(args, tree)?)),
        OracleKind::Remote => OracleSpec::Remote(remote_config(&args.remote)?),
        OracleKind::Interactive => unreachable!("handled before building a batch spec"),
    })
}

/// Reports of one run, rendered to files under `dir` as `run_N.*`.
fn write_run_outputs(dir: &Path, report: &RunReport) -> Result<()> {
    let stem = format!("run_{}", report.run_index);
    write_file(&dir.join(format!("{stem}.report.json")), json_pretty(report))?;
    write_file(&dir.join(format!("{stem}.report.csv")), report.to_csv())?;
    write_file(&dir.join(format!("{stem}.report.md")), report.to_markdown())?;
    write_file(&dir.join(format!("{stem}.traversal.csv")), report.traversal.groups_csv())
}

fn write_aggregate(dir: &Path, reports: &[RunReport], json: bool, out: &mut dyn Write) -> Result<AggregateReport> {
    let vectors: Vec<_> = reports.iter().map(RunReport::metric_vector).collect();
    let agg = aggregate_runs(&vectors).map_err(|e| CliError::Invalid(e.to_string()))?;
    write_file(&dir.join("aggregate.csv"), agg.to_csv())?;
    write_file(&dir.join("aggregate.md"), agg.to_markdown())?;
    if json {
        say(out, &json_pretty(&agg))?;
    } else {
        say(out, &agg.to_markdown())?;
    }
    Ok(agg)
}

fn write_trace_file(path: &Path, traces: &[Trace]) -> Result<()> {
    let mut buf = Vec::new();
    write_traces(&mut buf, traces).expect("writing to memory");
    write_file(path, buf)
}

fn check_aborts(reports: &[RunReport]) -> Result<()> {
    let aborted: usize = reports.iter().map(|r| r.aborted.len()).sum();
    let total: usize = reports.iter().map(|r| r.vignettes).sum();
    if aborted > 0 {
        Err(CliError::Aborted { aborted, total })
    } else {
        Ok(())
    }
}

fn report_error(e: guidetree::eval::ReportError) -> CliError {
    CliError::Invalid(e.to_string())
}

/// Traverse the corpus `runs` times. Run `r` (from 1) uses seed
/// `seed + r` and writes `run_r.traces.jsonl` plus its reports; the
/// aggregate over all runs goes to `aggregate.{csv,md}`.
pub fn cmd_run(args: &RunArgs, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<Vec<RunReport>> {
    if args.runs == 0 {
        return Err(CliError::Config("--runs must be at least 1".into()));
    }
    if args.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let tree = load_tree(&args.tree)?;
    let mut manifest = load_manifest(&args.corpus, &tree)?;
    if let Some(id) = &args.vignette {
        let v = manifest
            .get(id)
            .cloned()
            .ok_or_else(|| CliError::Config(format!("vignette `{id}` is not in the corpus")))?;
        manifest = CorpusManifest::new(&tree, &manifest.header.tree, vec![v]);
    }
    create_dir(&args.out)?;

    let mut reports = Vec::new();
    if args.oracle == OracleKind::Interactive {
        let Some(id) = &args.vignette else {
            return Err(CliError::Config("the interactive oracle needs --vignette".into()));
        };
        let v = &manifest.vignettes[0];
        say(out, &format!("{}\n\n{}\n\n", id, v.text))?;
        let trace = {
            let mut oracle = InteractiveOracle::new(&mut *input, &mut *out);
            traverse(&tree, &v.id, &mut oracle, Limits::default()).unwrap_or_else(|e| e.into_partial_trace())
        };
        write_trace_file(&args.out.join("run_1.traces.jsonl"), std::slice::from_ref(&trace))?;
        let report = build_run_report(&tree, &manifest, &[trace], 1).map_err(report_error)?;
        write_run_outputs(&args.out, &report)?;
        reports.push(report);
    } else {
        let spec = oracle_spec(args, &tree)?;
        for r in 1..=args.runs {
            let traces = run_corpus(&tree, &manifest, &spec, args.seed.wrapping_add(r as u64), args.jobs)
                .map_err(|e| CliError::Config(e.to_string()))?;
            write_trace_file(&args.out.join(format!("run_{r}.traces.jsonl")), &traces)?;
            let report = build_run_report(&tree, &manifest, &traces, r).map_err(report_error)?;
            write_run_outputs(&args.out, &report)?;
            reports.push(report);
        }
    }
    write_aggregate(&args.out, &reports, args.json, out)?;
    check_aborts(&reports)?;
    Ok(reports)
}

/// Run number encoded in a `run_N.traces.jsonl` file name.
fn run_number(path: &Path) -> Option<usize> {
    path.file_name()?
        .to_str()?
        .strip_prefix("run_")?
        .strip_suffix(".traces.jsonl")?
        .parse()
        .ok()
}

fn trace_files(path: &Path) -> Result<Vec<(usize, PathBuf)>> {
    if path.is_file() {
        return Ok(vec![(run_number(path).unwrap_or(1), path.to_path_buf())]);
    }
    let entries = fs::read_dir(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let mut files: Vec<(usize, PathBuf)> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter_map(|p| run_number(&p).map(|n| (n, p)))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Config(format!("no run_N.traces.jsonl files in {}", path.display())));
    }
    Ok(files)
}

fn load_traces(path: &Path) -> Result<Vec<Trace>> {
    let file = fs::File::open(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })?;
    read_traces(std::io::BufReader::new(file)).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

/// Re-walk each completed trace with its own recorded answers. A trace that
/// does not reproduce against `tree` is rejected.
fn replay(tree: &GuidanceTree, trace: &Trace) -> Result<Trace> {
    if trace.aborted {
        return Ok(trace.clone());
    }
    let mut oracle = ReplayOracle::from_trace(trace);
    match traverse(tree, &trace.vignette_id, &mut oracle, Limits::default()) {
        Ok(t) if t == *trace => Ok(t),
        Ok(_) => Err(CliError::Invalid(format!(
            "trace for `{}` does not match the tree on replay",
            trace.vignette_id
        ))),
        Err(e) => Err(CliError::Invalid(format!("trace for `{}` cannot be replayed: {e}", trace.vignette_id))),
    }
}

/// Rebuild every run report from stored traces. Writes the same report
/// files `run` writes, so the two outputs can be compared directly.
pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<Vec<RunReport>> {
    let tree = load_tree(&args.tree)?;
    let full = load_manifest(&args.corpus, &tree)?;
    let files = trace_files(&args.traces)?;
    create_dir(&args.out)?;
    let mut reports = Vec::new();
    for (run, path) in files {
        let stored = load_traces(&path)?;
        let traces = stored.iter().map(|t| replay(&tree, t)).collect::<Result<Vec<_>>>()?;
        let manifest = if traces.len() < full.vignettes.len() {
            let subset = traces
                .iter()
                .map(|t| {
                    full.get(&t.vignette_id)
                        .cloned()
                        .ok_or_else(|| CliError::Invalid(format!("trace for unknown vignette `{}`", t.vignette_id)))
                })
                .collect::<Result<Vec<_>>>()?;
            CorpusManifest::new(&tree, &full.header.tree, subset)
        } else {
            full.clone()
        };
        let report = build_run_report(&tree, &manifest, &traces, run).map_err(report_error)?;
        write_run_outputs(&args.out, &report)?;
        reports.push(report);
    }
    write_aggregate(&args.out, &reports, args.json, out)?;
    check_aborts(&reports)?;
    Ok(reports)
}

pub fn cmd_stats(args: &StatsArgs, out: &mut dyn Write) -> Result<()> {
    if args.tree.len() != args.corpus.len() {
        return Err(CliError::Config("pass one --tree per --corpus".into()));
    }
    let stats = if args.tree.is_empty() {
        samples::DOMAINS
            .iter()
            .map(|d| corpus_stats(&d.corpus(), &d.tree()))
            .collect::<Vec<_>>()
    } else {
        let mut stats = Vec::new();
        for (t, c) in args.tree.iter().zip(&args.corpus) {
            let tree = load_tree(t)?;
            let manifest = load_corpus(c, &tree).map_err(|e| match e {
                guidetree::corpus::CorpusError::Io { path, source } => CliError::Read { path, source },
                other => CliError::Invalid(format!("{}: {other}", c.display())),
            })?;
            stats.push(corpus_stats(&manifest, &tree));
        }
        stats
    };
    let text = if args.json {
        json_pretty(&stats)
    } else if args.csv {
        render_stats_csv(&stats)
    } else {
        render_stats_markdown(&stats)
    };
    say(out, &text)
}

/// Human-readable listing of a trace.
pub fn render_trace(trace: &Trace) -> String {
    let mut s = format!(
        "vignette {} ({}), oracle {}\n",
        trace.vignette_id, trace.tree_domain, trace.oracle_descriptor.backend
    );
    for step in &trace.steps {
        s.push_str(&format!("step {}  {} [{}]\n", step.index + 1, step.node_id, step.kind));
        for (q, a) in step.questions.iter().zip(&step.answers) {
            let mut notes = Vec::new();
            if a.flipped {
                notes.push("flipped".to_string());
            }
            if a.retries > 0 {
                notes.push(format!("{} retr{}", a.retries, if a.retries == 1 { "y" } else { "ies" }));
            }
            let notes = if notes.is_empty() {
                String::new()
            } else {
                format!(" ({})", notes.join(", "))
            };
            s.push_str(&format!("  Q {}: {} -> {}{notes}\n", q.feature_id, q.text, a.value));
        }
        s.push_str(&format!("  branch {} -> {}\n", step.branch, step.target));
    }
    match (&trace.outcome, &trace.error) {
        (Some(o), _) => {
            let referral = if o.referral { "referral" } else { "no referral" };
            s.push_str(&format!("outcome {} ({referral}) after {} step(s)\n", o.label(), trace.step_count));
        }
        (None, Some(e)) => s.push_str(&format!("aborted after {} step(s): {e}\n", trace.step_count)),
        (None, None) => s.push_str(&format!("aborted after {} step(s)\n", trace.step_count)),
    }
    s
}

pub fn cmd_trace(args: &TraceArgs, out: &mut dyn Write) -> Result<()> {
    let traces = load_traces(&args.traces)?;
    let trace = traces
        .iter()
        .find(|t| t.vignette_id == args.vignette)
        .ok_or_else(|| CliError::Config(format!("no trace for vignette `{}`", args.vignette)))?;
    if args.json {
        say(out, &json_pretty(trace))
    } else {
        say(out, &render_trace(trace))
    }
}

pub fn cmd_gen_corpus(args: &GenCorpusArgs, out: &mut dyn Write) -> Result<()> {
    let (tree, templates, mut plan, tree_path) = match (&args.domain, &args.tree) {
        (Some(name), _) => {
            let d = samples::domain(name).ok_or_else(|| {
                let names: Vec<&str> = samples::DOMAINS.iter().map(|d| d.name).collect();
                CliError::Config(format!("unknown domain `{name}`; bundled: {}", names.join(", ")))
            })?;
            (d.tree(), d.templates(), d.plan(), d.tree_path())
        }
        (None, Some(tree_path)) => {
            let tree = load_tree(tree_path)?;
            let templates_path = args.templates.as_ref().expect("clap requires --templates");
            let templates = TemplateSet::from_json(&read_text(templates_path)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", templates_path.display())))?;
            let plan_path = args.plan.as_ref().expect("clap requires --plan");
            let plan: GenerationPlan = serde_json::from_str(&read_text(plan_path)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", plan_path.display())))?;
            (tree, templates, plan, tree_path.display().to_string())
        }
        (None, None) => return Err(CliError::Config("pass --domain or --tree/--templates/--plan".into())),
    };
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    let vignettes = generate_vignettes(&tree, &plan, &templates).map_err(|e| CliError::Invalid(e.to_string()))?;
    let manifest = CorpusManifest::new(&tree, &tree_path, vignettes);
    let jsonl = manifest.to_jsonl();
    parse_corpus(&jsonl, &tree).map_err(|e| CliError::Invalid(format!("generated corpus fails its contracts: {e}")))?;
    write_file(&args.out, &jsonl)?;
    if let Some(dir) = &args.prompts {
        create_dir(dir)?;
        for v in &manifest.vignettes {
            write_file(&dir.join(format!("{}.txt", v.id)), emit_generation_prompt(v, &templates))?;
        }
    }
    let counts: Vec<String> = manifest
        .header
        .category_counts
        .iter()
        .map(|(c, n)| format!("{}={n}", c.as_str()))
        .collect();
    say(
        out,
        &format!(
            "wrote {} vignettes to {} ({}; referral {}/{})\n",
            manifest.vignettes.len(),
            args.out.display(),
            counts.join(", "),
            manifest.header.referral_counts.referral,
            manifest.header.referral_counts.non_referral
        ),
    )
}

#[derive(serde::Serialize)]
struct SegmentLint {
    index: usize,
    source_span: (usize, usize),
    token_estimate: usize,
    status: String,
    open_exits: usize,
}

#[derive(serde::Serialize)]
struct BuildLint {
    prompt_version: &'static str,
    guideline: String,
    budget: usize,
    segments: Vec<SegmentLint>,
    merge: String,
    warnings: Vec<String>,
}

/// Segment the guideline, write `prompt_N.txt`, collect `reply_N.txt`
/// (from `--replies` offline, from the model otherwise), then parse and
/// chain the fragments into `tree.json`. `lint.json` records the outcome
/// per segment; no tree is written unless every step succeeds.
pub fn cmd_build_tree(args: &BuildTreeArgs, out: &mut dyn Write) -> Result<()> {
    let text = read_text(&args.guideline)?;
    let segments = segment_guideline(&text, args.budget).map_err(|e| CliError::Invalid(e.to_string()))?;
    create_dir(&args.out)?;
    let client = if args.offline {
        None
    } else {
        Some(ChatClient::new(remote_config(&args.remote)?, None))
    };

    let mut lint = BuildLint {
        prompt_version: TREE_PROMPT_VERSION,
        guideline: args.guideline.display().to_string(),
        budget: args.budget,
        segments: Vec::new(),
        merge: "not attempted".into(),
        warnings: Vec::new(),
    };
    let mut subtrees = Vec::new();
    let mut failures = Vec::new();
    for seg in &segments {
        let prompt = emit_tree_prompt(seg);
        write_file(&args.out.join(format!("prompt_{}.txt", seg.index)), &prompt)?;
        let reply_name = format!("reply_{}.txt", seg.index);
        let reply = match (&client, &args.replies) {
            (None, Some(dir)) => read_text(&dir.join(&reply_name))?,
            (Some(client), _) => {
                client
                    .complete(&[ChatMessage::user(&prompt)])
                    .map_err(|e| CliError::Config(format!("segment {}: {e}", seg.index)))?
                    .0
            }
            (None, None) => unreachable!("clap requires --replies with --offline"),
        };
        write_file(&args.out.join(&reply_name), &reply)?;
        let (status, open_exits) = match parse_model_tree(&reply, seg.index) {
            Ok(sub) => {
                let n = sub.markers.len();
                subtrees.push(sub);
                ("ok".to_string(), n)
            }
            Err(e) => {
                failures.push(e.to_string());
                (e.to_string(), 0)
            }
        };
        lint.segments.push(SegmentLint {
            index: seg.index,
            source_span: seg.source_span,
            token_estimate: seg.token_estimate,
            status,
            open_exits,
        });
    }

    let merged = if failures.is_empty() {
        match merge_subtrees(&subtrees) {
            Ok(tree) => {
                lint.merge = "ok".into();
                lint.warnings = validate_tree(&tree).warnings.iter().map(ToString::to_string).collect();
                Some(tree)
            }
            Err(e) => {
                lint.merge = e.to_string();
                failures.push(e.to_string());
                None
            }
        }
    } else {
        None
    };
    write_file(&args.out.join("lint.json"), json_pretty(&lint))?;
    match merged {
        Some(tree) => {
            write_file(&args.out.join("tree.json"), serialize_tree(&tree))?;
            say(
                out,
                &format!(
                    "merged {} segment(s) into {} ({} nodes, {} actions)\n",
                    segments.len(),
                    args.out.join("tree.json").display(),
                    tree.nodes.len(),
                    tree.actions.len()
                ),
            )
        }
        None => Err(CliError::Invalid(failures.join("\n"))),
    }
}

/// Flags for a `run` with everything else at its default.
pub fn run_args(tree: &Path, corpus: &Path, oracle: OracleKind, out: &Path) -> RunArgs {
    let mut args: Vec<std::ffi::OsString> = vec!["guidetree".into(), "run".into()];
    args.extend(["--tree".into(), tree.as_os_str().into()]);
    args.extend(["--corpus".into(), corpus.as_os_str().into()]);
    args.extend(["--out".into(), out.as_os_str().into()]);
    let oracle = oracle.to_possible_value().expect("no skipped variants");
    args.extend(["--oracle".into(), oracle.get_name().into()]);
    match Cli::parse_from(args).command {
        Command::Run(a) => a,
        _ => unreachable!(),
    }
}

/// Per-run report files keyed by name, for comparing two output folders.
pub fn report_files(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let entries = fs::read_dir(dir).map_err(|source| CliError::Read {
        path: dir.display().to_string(),
        source,
    })?;
    let mut files = BTreeMap::new();
    for e in entries.filter_map(|e| e.ok()) {
        let name = e.file_name().to_string_lossy().into_owned();
        if name.ends_with(".traces.jsonl") {
            continue;
        }
        let bytes = fs::read(e.path()).map_err(|source| CliError::Read { path: name.clone(), source })?;
        files.insert(name, bytes);
    }
    Ok(files)
}
