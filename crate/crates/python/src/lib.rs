//! Python bindings. Datasets, descriptors, scan results and null
//! distributions are wrapped as classes; everything else crosses the
//! boundary as plain dicts and lists with the same field names as the JSON
//! reports.

use std::collections::BTreeMap;

use postscan::pipeline::{self, PipelineConfig};
use postscan::relevance::RelevanceEntry;
use postscan::significance::{self, BootstrapConfig};
use postscan::substitution::{greedy_with_null, sweep_with_null, GreedyConfig};
use postscan::{Feature, RelevanceConfig, ScanConfig, Schema, SyntheticSpec};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(postscan_py, DegenerateDataError, PyValueError, "The outcome column is constant.");

fn err(e: postscan::Error) -> PyErr {
    match e {
        postscan::Error::Degenerate(_) => DegenerateDataError::new_err(e.to_string()),
        postscan::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn from_opt<T: DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    obj.map_or_else(|| Ok(T::default()), from_py)
}

/// A categorical cohort with a binary outcome.
#[pyclass(frozen, name = "Dataset")]
struct PyDataset {
    inner: postscan::Dataset,
}

#[pymethods]
impl PyDataset {
    /// `features` is a list of `(name, [category labels])`; `rows` holds
    /// category indices, one list per record.
    #[new]
    fn new(features: Vec<(String, Vec<String>)>, rows: Vec<Vec<usize>>, outcomes: Vec<bool>) -> PyResult<Self> {
        let schema = Schema::new(features.into_iter().map(|(name, cats)| Feature::new(name, cats)).collect())
            .map_err(err)?;
        let inner = postscan::Dataset::from_rows(schema, &rows, outcomes).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, outcome = "y"))]
    fn load_csv(path: &str, outcome: &str) -> PyResult<Self> {
        Ok(Self { inner: postscan::load_csv(path, outcome).map_err(err)? })
    }

    #[pyo3(signature = (path, outcome = "y"))]
    fn save_csv(&self, path: &str, outcome: &str) -> PyResult<()> {
        postscan::io::save_csv(&self.inner, outcome, path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn n_positive(&self) -> usize {
        self.inner.n_positive()
    }

    #[getter]
    fn global_mean(&self) -> f64 {
        self.inner.global_mean()
    }

    #[getter]
    fn features(&self) -> Vec<(String, Vec<String>)> {
        self.inner
            .schema()
            .features()
            .iter()
            .map(|f| (f.name.clone(), f.categories.clone()))
            .collect()
    }

    #[getter]
    fn outcomes(&self) -> Vec<bool> {
        self.inner.outcomes().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n_records={}, n_features={}, n_positive={})",
            self.inner.len(),
            self.inner.n_features(),
            self.inner.n_positive()
        )
    }
}

/// Conjunction over features of allowed value sets, keyed by feature index.
#[pyclass(frozen, eq, hash, name = "SubsetDescriptor")]
#[derive(PartialEq, Hash)]
struct PyDescriptor {
    inner: postscan::SubsetDescriptor,
}

#[pymethods]
impl PyDescriptor {
    #[new]
    #[pyo3(signature = (constraints = None))]
    fn new(constraints: Option<BTreeMap<usize, Vec<usize>>>) -> Self {
        Self { inner: postscan::SubsetDescriptor::from_constraints(constraints.unwrap_or_default()) }
    }

    /// Builds a descriptor from `{feature name: [labels]}`.
    #[staticmethod]
    fn from_labels(dataset: &PyDataset, constraints: BTreeMap<String, Vec<String>>) -> PyResult<Self> {
        let labeled: Vec<postscan::LabeledConstraint> = constraints
            .into_iter()
            .map(|(feature, values)| postscan::LabeledConstraint { feature, values })
            .collect();
        let inner = postscan::SubsetDescriptor::from_labeled(&labeled, dataset.inner.schema()).map_err(err)?;
        Ok(Self { inner })
    }

    fn constraints(&self) -> BTreeMap<usize, Vec<usize>> {
        self.inner
            .constraints()
            .iter()
            .map(|(&z, vals)| (z, vals.iter().copied().collect()))
            .collect()
    }

    fn labels(&self, dataset: &PyDataset) -> BTreeMap<String, Vec<String>> {
        self.inner
            .to_labeled(dataset.inner.schema())
            .into_iter()
            .map(|c| (c.feature, c.values))
            .collect()
    }

    fn normalized(&self, dataset: &PyDataset) -> Self {
        Self { inner: self.inner.normalized(dataset.inner.schema()) }
    }

    /// Indices of the records inside the subset.
    fn members(&self, dataset: &PyDataset) -> PyResult<Vec<usize>> {
        self.inner.membership(&dataset.inner).map_err(err)
    }

    /// `(n_subset, n_positive)`.
    fn counts(&self, dataset: &PyDataset) -> PyResult<(usize, usize)> {
        self.inner.counts(&dataset.inner).map_err(err)
    }

    fn display(&self, dataset: &PyDataset) -> String {
        self.inner.display(dataset.inner.schema()).to_string()
    }

    fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    fn __repr__(&self) -> String {
        format!("SubsetDescriptor({:?})", self.constraints())
    }
}

/// Best subset found by a scan, with its score panel and effect measures.
#[pyclass(frozen, name = "ScanResult")]
struct PyScanResult {
    inner: postscan::ScanResult,
}

#[pymethods]
impl PyScanResult {
    #[getter]
    fn descriptor(&self) -> PyDescriptor {
        PyDescriptor { inner: self.inner.descriptor.clone() }
    }

    #[getter]
    fn score(&self) -> f64 {
        self.inner.panel.score
    }

    #[getter]
    fn n_subset(&self) -> usize {
        self.inner.panel.n_subset
    }

    #[getter]
    fn n_positive(&self) -> usize {
        self.inner.panel.n_positive
    }

    #[getter]
    fn q_mle(&self) -> f64 {
        self.inner.panel.q_mle
    }

    #[getter]
    fn odds_ratio(&self) -> Option<f64> {
        self.inner.effects.map(|e| e.odds_ratio)
    }

    #[getter]
    fn restart_index(&self) -> usize {
        self.inner.restart_index
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("ScanResult(score={:.4}, n_subset={})", self.inner.panel.score, self.inner.panel.n_subset)
    }
}

/// Scores of bootstrap rescans under the null.
#[pyclass(frozen, name = "NullDistribution")]
struct PyNull {
    inner: postscan::NullDistribution,
}

#[pymethods]
impl PyNull {
    #[new]
    fn new(scores: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: postscan::NullDistribution::new(scores).map_err(err)? })
    }

    #[getter]
    fn scores(&self) -> Vec<f64> {
        self.inner.scores.clone()
    }

    fn p_value<'py>(&self, py: Python<'py>, score: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.p_value(score).map_err(err)?)
    }

    fn __len__(&self) -> usize {
        self.inner.n_replicates()
    }
}

fn scan_config(restarts: usize, seed: u64, config: Option<&Bound<'_, PyAny>>) -> PyResult<ScanConfig> {
    let mut cfg: ScanConfig = from_opt(config)?;
    cfg.n_restarts = restarts;
    cfg.seed = seed;
    Ok(cfg)
}

fn ranking_or_default(
    dataset: &PyDataset,
    result: &PyScanResult,
    ranking: Option<&Bound<'_, PyAny>>,
) -> PyResult<Vec<RelevanceEntry>> {
    match ranking {
        Some(r) => from_py(r),
        None => postscan::rank_feature_relevance(&dataset.inner, &result.inner, &RelevanceConfig::default())
            .map_err(err),
    }
}

#[pyfunction]
fn bernoulli_score(n_positive: usize, n_subset: usize, global_mean: f64) -> PyResult<f64> {
    Ok(postscan::bernoulli_score(n_positive, n_subset, global_mean).map_err(err)?.score)
}

#[pyfunction]
fn optimal_q(n_positive: usize, n_subset: usize, global_mean: f64) -> PyResult<f64> {
    postscan::optimal_q(n_positive, n_subset, global_mean).map_err(err)
}

/// Odds ratio with a 95% Woolf interval for the 2x2 table `[[a, b], [c, d]]`.
#[pyfunction]
fn odds_ratio(py: Python<'_>, a: usize, b: usize, c: usize, d: usize) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &postscan::odds_ratio(a, b, c, d).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (dataset, restarts = 10, seed = 0, config = None))]
fn scan(
    py: Python<'_>,
    dataset: &PyDataset,
    restarts: usize,
    seed: u64,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<PyScanResult> {
    let cfg = scan_config(restarts, seed, config)?;
    let inner = py.detach(|| postscan::scan(&dataset.inner, &cfg)).map_err(err)?;
    Ok(PyScanResult { inner })
}

#[pyfunction]
#[pyo3(signature = (dataset, limit = 1 << 24))]
fn exhaustive_scan(py: Python<'_>, dataset: &PyDataset, limit: u64) -> PyResult<PyScanResult> {
    let inner = py.detach(|| postscan::exhaustive_scan(&dataset.inner, limit as u128)).map_err(err)?;
    Ok(PyScanResult { inner })
}

/// Scores a given descriptor as if a scan had returned it.
#[pyfunction]
fn evaluate(dataset: &PyDataset, descriptor: &PyDescriptor) -> PyResult<PyScanResult> {
    let inner = postscan::ScanResult::evaluate(&dataset.inner, descriptor.inner.clone(), 0).map_err(err)?;
    Ok(PyScanResult { inner })
}

#[pyfunction]
#[pyo3(signature = (dataset, replicates = 50, seed = 0, restarts = 10))]
fn null_distribution(
    py: Python<'_>,
    dataset: &PyDataset,
    replicates: usize,
    seed: u64,
    restarts: usize,
) -> PyResult<PyNull> {
    let cfg = BootstrapConfig { n_replicates: replicates, seed, scan: scan_config(restarts, seed, None)? };
    let inner = py.detach(|| significance::null_distribution(&dataset.inner, &cfg)).map_err(err)?;
    Ok(PyNull { inner })
}

#[pyfunction]
#[pyo3(signature = (dataset, score, replicates = 50, seed = 0, restarts = 10))]
fn empirical_p_value<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    score: f64,
    replicates: usize,
    seed: u64,
    restarts: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = BootstrapConfig { n_replicates: replicates, seed, scan: scan_config(restarts, seed, None)? };
    let (p, _) = py.detach(|| postscan::empirical_p_value(&dataset.inner, score, &cfg)).map_err(err)?;
    to_py(py, &p)
}

/// Ranked relevance entries as dicts. `config` takes the same keys as the
/// `relevance` block of a pipeline config.
#[pyfunction]
#[pyo3(signature = (dataset, result, config = None))]
fn rank_feature_relevance<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    result: &PyScanResult,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg: RelevanceConfig = from_opt(config)?;
    to_py(py, &postscan::rank_feature_relevance(&dataset.inner, &result.inner, &cfg).map_err(err)?)
}

/// Candidate substitutions in enumeration order, each with a `label`.
#[pyfunction]
fn enumerate_substitutions<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    descriptor: &PyDescriptor,
) -> PyResult<Bound<'py, PyList>> {
    let candidates = postscan::enumerate_substitutions(&descriptor.inner, dataset.inner.schema()).map_err(err)?;
    let out = PyList::empty(py);
    for c in &candidates {
        let d = to_py(py, c)?.cast_into::<PyDict>()?;
        d.set_item("label", c.label())?;
        out.append(d)?;
    }
    Ok(out)
}

/// Every single substitution scored against one shared null distribution.
/// The ranking defaults to the standard relevance ranking of `result`.
#[pyfunction]
#[pyo3(signature = (dataset, result, null, ranking = None, alpha = 0.05))]
fn single_substitution_sweep<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    result: &PyScanResult,
    null: &PyNull,
    ranking: Option<&Bound<'py, PyAny>>,
    alpha: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let ranking = ranking_or_default(dataset, result, ranking)?;
    let outcomes = py
        .detach(|| sweep_with_null(&dataset.inner, &result.inner, &ranking, alpha, &null.inner))
        .map_err(err)?;
    to_py(py, &outcomes)
}

/// Greedy cross-substitution until the subset stops being anomalous.
/// `config` takes `stopping` and `retention` keys.
#[pyfunction]
#[pyo3(signature = (dataset, result, null, ranking = None, config = None))]
fn cross_substitute_greedy<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    result: &PyScanResult,
    null: &PyNull,
    ranking: Option<&Bound<'py, PyAny>>,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let ranking = ranking_or_default(dataset, result, ranking)?;
    let cfg: GreedyConfig = from_opt(config)?;
    let outcome = greedy_with_null(&dataset.inner, &result.inner, &ranking, &cfg, &null.inner).map_err(err)?;
    to_py(py, &outcome)
}

/// Returns `(dataset, planted descriptor)`.
#[pyfunction]
#[pyo3(signature = (n_records, cardinalities, planted, base_rate = 0.05, odds_multiplier = 3.0, seed = 0))]
fn generate_synthetic(
    n_records: usize,
    cardinalities: Vec<usize>,
    planted: &PyDescriptor,
    base_rate: f64,
    odds_multiplier: f64,
    seed: u64,
) -> PyResult<(PyDataset, PyDescriptor)> {
    let spec = SyntheticSpec { n_records, cardinalities, base_rate, planted: planted.inner.clone(), odds_multiplier, seed };
    let cohort = postscan::generate_synthetic(&spec).map_err(err)?;
    Ok((PyDataset { inner: cohort.dataset }, PyDescriptor { inner: cohort.planted }))
}

/// Scan, rank, sweep and greedy in one call; returns the report as a dict.
/// `config` takes the same keys as the CLI's TOML config.
#[pyfunction]
#[pyo3(signature = (dataset, config = None))]
fn run_pipeline<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg: PipelineConfig = from_opt(config)?;
    cfg.validate().map_err(err)?;
    let report = py
        .detach(|| pipeline::with_workers(cfg.workers, || pipeline::run_pipeline(&dataset.inner, &cfg)))
        .map_err(err)?
        .map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn postscan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyDescriptor>()?;
    m.add_class::<PyScanResult>()?;
    m.add_class::<PyNull>()?;
    m.add("DegenerateDataError", m.py().get_type::<DegenerateDataError>())?;
    m.add_function(wrap_pyfunction!(bernoulli_score, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_q, m)?)?;
    m.add_function(wrap_pyfunction!(odds_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add_function(wrap_pyfunction!(exhaustive_scan, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(null_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_p_value, m)?)?;
    m.add_function(wrap_pyfunction!(rank_feature_relevance, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_substitutions, m)?)?;
    m.add_function(wrap_pyfunction!(single_substitution_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(cross_substitute_greedy, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
