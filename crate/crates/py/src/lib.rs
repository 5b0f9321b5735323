//! Python bindings for guidance trees: load and validate trees, traverse
//! them, run whole corpora and score the results.

use std::collections::BTreeMap;

use guidetree::batch::{run_corpus, OracleSpec};
use guidetree::corpus::{parse_corpus, CorpusManifest};
use guidetree::engine::{gold_trace, traverse, Limits, Trace};
use guidetree::eval::{build_run_report, macro_from_labels, prf, ConfusionCounts};
use guidetree::oracle::{AbsentFeaturePolicy, NoiseConfig, ScriptedOracle, YesNo};
use guidetree::{assign_priorities, parse_tree, samples, serialize_tree, validate_tree, GuidanceTree};
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Convert anything serializable to plain Python objects.
fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Tree", module = "pyguidetree", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyTree {
    inner: GuidanceTree,
}

#[pymethods]
impl PyTree {
    /// Parse a tree document. Raises ValueError on schema errors.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_tree(text.as_bytes()).map(|inner| PyTree { inner }).map_err(value_error)
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| pyo3::exceptions::PyOSError::new_err(format!("{path}: {e}")))?;
        parse_tree(&bytes).map(|inner| PyTree { inner }).map_err(value_error)
    }

    /// Canonical serialization.
    fn to_json(&self) -> String {
        String::from_utf8(serialize_tree(&self.inner)).expect("canonical JSON is UTF-8")
    }

    #[getter]
    fn domain(&self) -> &str {
        &self.inner.domain
    }

    #[getter]
    fn root(&self) -> &str {
        &self.inner.root
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.nodes.len()
    }

    #[getter]
    fn action_count(&self) -> usize {
        self.inner.actions.len()
    }

    #[getter]
    fn hash(&self) -> String {
        guidetree::tree::tree_hash(&self.inner)
    }

    fn features(&self) -> Vec<String> {
        self.inner.features().into_iter().map(str::to_string).collect()
    }

    /// Validation report as a dict with `ok`, `errors` and `warnings`.
    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &validate_tree(&self.inner))
    }

    /// A copy with every missing action priority filled in.
    fn with_priorities(&self) -> PyResult<Self> {
        assign_priorities(&self.inner).map(|inner| PyTree { inner }).map_err(value_error)
    }

    /// Walk the tree answering each question from `features`; features not
    /// listed answer no.
    #[pyo3(signature = (features, vignette_id = "v"))]
    fn traverse(&self, features: BTreeMap<String, bool>, vignette_id: &str) -> PyResult<PyTrace> {
        let mut oracle = ScriptedOracle::new(features, AbsentFeaturePolicy::No);
        traverse(&self.inner, vignette_id, &mut oracle, Limits::default())
            .map(|inner| PyTrace { inner })
            .map_err(value_error)
    }

    /// The guideline-defined path for `features`.
    #[pyo3(signature = (features, vignette_id = "v"))]
    fn gold_trace(&self, features: BTreeMap<String, bool>, vignette_id: &str) -> PyResult<PyTrace> {
        gold_trace(&self.inner, vignette_id, &features)
            .map(|inner| PyTrace { inner })
            .map_err(value_error)
    }

    fn __repr__(&self) -> String {
        format!(
            "Tree(domain={:?}, nodes={}, actions={})",
            self.inner.domain,
            self.inner.nodes.len(),
            self.inner.actions.len()
        )
    }
}

#[pyclass(name = "Trace", module = "pyguidetree", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyTrace {
    inner: Trace,
}

#[pymethods]
impl PyTrace {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(|inner| PyTrace { inner }).map_err(value_error)
    }

    #[getter]
    fn vignette_id(&self) -> &str {
        &self.inner.vignette_id
    }

    /// Action id, `None` for the no-action outcome or an aborted walk.
    #[getter]
    fn action(&self) -> Option<String> {
        self.inner.outcome.as_ref().and_then(|o| o.action.clone())
    }

    #[getter]
    fn referral(&self) -> Option<bool> {
        self.inner.outcome.as_ref().map(|o| o.referral)
    }

    #[getter]
    fn step_count(&self) -> usize {
        self.inner.step_count
    }

    #[getter]
    fn aborted(&self) -> bool {
        self.inner.aborted
    }

    #[getter]
    fn error(&self) -> Option<String> {
        self.inner.error.clone()
    }

    fn to_json(&self) -> String {
        self.inner.to_json_line()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        let outcome = match &self.inner.outcome {
            Some(o) => o.label().to_string(),
            None => "aborted".into(),
        };
        format!(
            "Trace(vignette_id={:?}, outcome={outcome:?}, steps={})",
            self.inner.vignette_id, self.inner.step_count
        )
    }
}

#[pyclass(name = "Corpus", module = "pyguidetree", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyCorpus {
    inner: CorpusManifest,
}

#[pymethods]
impl PyCorpus {
    /// Parse a JSONL corpus and check every vignette against `tree`.
    #[staticmethod]
    fn from_jsonl(text: &str, tree: &PyTree) -> PyResult<Self> {
        parse_corpus(text, &tree.inner).map(|inner| PyCorpus { inner }).map_err(value_error)
    }

    fn to_jsonl(&self) -> String {
        self.inner.to_jsonl()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.vignettes.iter().map(|v| v.id.clone()).collect()
    }

    fn vignette<'py>(&self, py: Python<'py>, id: &str) -> PyResult<Bound<'py, PyAny>> {
        let v = self.inner.get(id).ok_or_else(|| PyKeyError::new_err(id.to_string()))?;
        to_py(py, v)
    }

    /// Header tallies: domain, category and referral counts.
    fn header<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.header)
    }

    fn __len__(&self) -> usize {
        self.inner.vignettes.len()
    }
}

/// Names of the bundled domains.
#[pyfunction]
fn domains() -> Vec<&'static str> {
    samples::DOMAINS.iter().map(|d| d.name).collect()
}

fn bundled(name: &str) -> PyResult<samples::Domain> {
    samples::domain(name).ok_or_else(|| PyKeyError::new_err(name.to_string()))
}

#[pyfunction]
fn sample_tree(name: &str) -> PyResult<PyTree> {
    Ok(PyTree { inner: bundled(name)?.tree() })
}

#[pyfunction]
fn sample_corpus(name: &str) -> PyResult<PyCorpus> {
    Ok(PyCorpus { inner: bundled(name)?.corpus() })
}

/// Traverse every vignette. `oracle` is one of `scripted`, `noisy`,
/// `always_yes` or `always_no`. Failed walks come back aborted.
#[pyfunction]
#[pyo3(signature = (tree, corpus, oracle = "scripted", seed = 0, p_no_to_yes = 0.3, p_yes_to_no = 0.0, jobs = None))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    tree: &PyTree,
    corpus: &PyCorpus,
    oracle: &str,
    seed: u64,
    p_no_to_yes: f64,
    p_yes_to_no: f64,
    jobs: Option<usize>,
) -> PyResult<Vec<PyTrace>> {
    let spec = match oracle {
        "scripted" => OracleSpec::Scripted(AbsentFeaturePolicy::No),
        "noisy" => OracleSpec::Noisy(NoiseConfig::new(p_no_to_yes, p_yes_to_no, seed)),
        "always_yes" => OracleSpec::Constant(YesNo::Yes),
        "always_no" => OracleSpec::Constant(YesNo::No),
        other => return Err(PyValueError::new_err(format!("unknown oracle `{other}`"))),
    };
    let traces = py
        .detach(|| run_corpus(&tree.inner, &corpus.inner, &spec, seed, jobs))
        .map_err(value_error)?;
    Ok(traces.into_iter().map(|inner| PyTrace { inner }).collect())
}

/// Full run report for one set of traces, as a dict.
#[pyfunction]
#[pyo3(signature = (tree, corpus, traces, run_index = 1))]
fn evaluate<'py>(
    py: Python<'py>,
    tree: &PyTree,
    corpus: &PyCorpus,
    traces: Vec<PyTrace>,
    run_index: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let traces: Vec<Trace> = traces.into_iter().map(|t| t.inner).collect();
    let report = build_run_report(&tree.inner, &corpus.inner, &traces, run_index).map_err(value_error)?;
    to_py(py, &report)
}

/// `(precision, recall, f1)` from binary confusion counts.
#[pyfunction]
#[pyo3(name = "prf")]
fn py_prf(tp: usize, fp: usize, fn_: usize, tn: usize) -> (f64, f64, f64) {
    let m = prf(ConfusionCounts::new(tp, fp, fn_, tn));
    (m.precision, m.recall, m.f1)
}

/// Macro-averaged metrics over `(gold, predicted)` label pairs.
#[pyfunction]
fn macro_metrics<'py>(py: Python<'py>, pairs: Vec<(String, String)>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &macro_from_labels(&pairs))
}

#[pymodule]
fn pyguidetree(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyTree>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyCorpus>()?;
    m.add_function(wrap_pyfunction!(domains, m)?)?;
    m.add_function(wrap_pyfunction!(sample_tree, m)?)?;
    m.add_function(wrap_pyfunction!(sample_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(py_prf, m)?)?;
    m.add_function(wrap_pyfunction!(macro_metrics, m)?)?;
    Ok(())
}
