//! Traversal of a whole corpus, optionally in parallel. Output order always
//! follows corpus order, so results do not depend on the thread count.

use std::sync::Arc;

use rayon::prelude::*;

use crate::corpus::{CorpusManifest, KeywordOracle, TemplateSet, Vignette};
use crate::engine::{traverse, Limits, Trace};
use crate::oracle::{
    AbsentFeaturePolicy, ChatClient, ConstantOracle, NoiseConfig, NoisyOracle, Oracle, RateLimiter,
    RemoteConfig, RemoteOracle, ScriptedOracle, YesNo,
};
use crate::seed;
use crate::tree::GuidanceTree;

/// Which oracle answers for each vignette.
#[derive(Debug, Clone)]
pub enum OracleSpec {
    Scripted(AbsentFeaturePolicy),
    /// Scripted answers with flips. The seed in the config is ignored; each
    /// vignette gets `seed::derive(run_seed, index)`.
    Noisy(NoiseConfig),
    Constant(YesNo),
    /// Reads answers from the vignette text.
    Keyword(Arc<TemplateSet>),
    Remote(RemoteConfig),
}

#[derive(Debug, thiserror::Error)]
pub enum BatchError {
    #[error("invalid oracle configuration: {0}")]
    Config(String),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

enum Shared {
    Plain,
    Remote(ChatClient),
}

fn oracle_for<'a>(spec: &'a OracleSpec, shared: &Shared, v: &'a Vignette, index: usize, run_seed: u64) -> Box<dyn Oracle + 'a> {
    match spec {
        OracleSpec::Scripted(policy) => Box::new(ScriptedOracle::new(v.features.clone(), *policy)),
        OracleSpec::Noisy(noise) => {
            let noise = NoiseConfig {
                seed: seed::derive(run_seed, index as u64),
                ..*noise
            };
            Box::new(NoisyOracle::new(ScriptedOracle::gold(v.features.clone()), noise))
        }
        OracleSpec::Constant(value) => Box::new(ConstantOracle(*value)),
        OracleSpec::Keyword(templates) => Box::new(KeywordOracle::new(&v.text, templates)),
        OracleSpec::Remote(_) => match shared {
            Shared::Remote(client) => Box::new(RemoteOracle::new(client.clone(), v.text.clone())),
            Shared::Plain => unreachable!("remote client is built before the run"),
        },
    }
}

/// Traverse every vignette once. Failed traversals come back as aborted
/// partial traces rather than errors. `jobs` of `None` uses all cores.
pub fn run_corpus(
    tree: &GuidanceTree,
    manifest: &CorpusManifest,
    spec: &OracleSpec,
    run_seed: u64,
    jobs: Option<usize>,
) -> Result<Vec<Trace>, BatchError> {
    let shared = match spec {
        OracleSpec::Noisy(noise) => {
            noise.check().map_err(BatchError::Config)?;
            Shared::Plain
        }
        OracleSpec::Remote(config) => {
            config.check().map_err(BatchError::Config)?;
            let limiter = config.requests_per_second.map(|rps| Arc::new(RateLimiter::new(rps)));
            Shared::Remote(ChatClient::new(config.clone(), limiter))
        }
        _ => Shared::Plain,
    };
    let one = |(index, v): (usize, &Vignette)| {
        let mut oracle = oracle_for(spec, &shared, v, index, run_seed);
        traverse(tree, &v.id, oracle.as_mut(), Limits::default()).unwrap_or_else(|e| e.into_partial_trace())
    };
    match jobs {
        Some(1) => Ok(manifest.vignettes.iter().enumerate().map(one).collect()),
        _ => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| BatchError::Pool(e.to_string()))?;
            Ok(pool.install(|| manifest.vignettes.par_iter().enumerate().map(one).collect()))
        }
    }
}

/// `runs` independent runs numbered from 1; run `r` uses seed
/// `base_seed + r` and lands at index `r - 1`.
pub fn run_many(
    tree: &GuidanceTree,
    manifest: &CorpusManifest,
    spec: &OracleSpec,
    base_seed: u64,
    runs: usize,
    jobs: Option<usize>,
) -> Result<Vec<Vec<Trace>>, BatchError> {
    (1..=runs as u64)
        .map(|r| run_corpus(tree, manifest, spec, base_seed.wrapping_add(r), jobs))
        .collect()
}
