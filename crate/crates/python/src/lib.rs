//! Python bindings: `import pymatchci`.
//!
//! Results come back as plain dicts and lists, decoded from the same JSON
//! the command line prints.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use matchci::bootstrap::{bootstrap_distribution, percentile_interval, BootstrapInput, Scheme};
use matchci::synthetic::{calibrate_threshold, method_from_name, run_coverage_experiment, CalibrationConfig, Truth};
use matchci::wilson::{wilson_core as core_wilson, wilson_interval as core_interval, WilsonMode, WilsonOptions};
use matchci::{
    io, roc, CellCounts, Dissimilarity, Error, IdentityId, MatchDataset, Metric, ScoreRecord, SyntheticConfig,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Resampling(m) => PyRuntimeError::new_err(format!("resampling failed: {m}")),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_object<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn metric(name: &str) -> PyResult<Metric> {
    match name.to_ascii_lowercase().as_str() {
        "frr" => Ok(Metric::Frr),
        "far" => Ok(Metric::Far),
        other => Err(PyValueError::new_err(format!("metric must be 'frr' or 'far', got '{other}'"))),
    }
}

fn dissimilarity(name: &str) -> PyResult<Dissimilarity> {
    match name {
        "euclidean" => Ok(Dissimilarity::Euclidean),
        "normalized-euclidean" | "normalized_euclidean" => Ok(Dissimilarity::NormalizedEuclidean),
        other => Err(PyValueError::new_err(format!("unknown dissimilarity '{other}'"))),
    }
}

/// Identities, their instances and a dissimilarity score for every pair.
#[pyclass(name = "Dataset", module = "pymatchci", frozen)]
pub struct PyDataset {
    inner: MatchDataset,
}

#[pymethods]
impl PyDataset {
    /// Rows `(id_a, instance_a, id_b, instance_b, score)`; `similarity=True`
    /// negates the scores.
    #[staticmethod]
    #[pyo3(signature = (records, similarity = false))]
    fn from_scores(records: Vec<(String, String, String, String, f64)>, similarity: bool) -> PyResult<Self> {
        let recs = records.into_iter().map(|(id_a, instance_a, id_b, instance_b, s)| ScoreRecord {
            id_a,
            instance_a,
            id_b,
            instance_b,
            score: if similarity { -s } else { s },
        });
        Ok(PyDataset {
            inner: MatchDataset::from_score_records(recs).map_err(to_py)?,
        })
    }

    /// `embeddings[k]` belongs to identity `ids[k]`; instances keep their order.
    #[staticmethod]
    #[pyo3(signature = (ids, embeddings, dissimilarity = "euclidean"))]
    fn from_embeddings(ids: Vec<String>, embeddings: Vec<Vec<f64>>, dissimilarity: &str) -> PyResult<Self> {
        if ids.len() != embeddings.len() {
            return Err(PyValueError::new_err("ids and embeddings differ in length"));
        }
        let mut seen = std::collections::HashMap::<String, usize>::new();
        let instances = ids
            .into_iter()
            .zip(embeddings)
            .map(|(id, e)| {
                let k = seen.entry(id.clone()).or_insert(0);
                *k += 1;
                matchci::Instance {
                    identity: IdentityId(id),
                    index: *k,
                    embedding: Some(e),
                }
            })
            .collect();
        Ok(PyDataset {
            inner: MatchDataset::from_instances(instances, self::dissimilarity(dissimilarity)?).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, similarity = false))]
    fn load_scores(path: PathBuf, similarity: bool) -> PyResult<Self> {
        Ok(PyDataset {
            inner: io::load_scores(&path, similarity).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, dissimilarity = "euclidean"))]
    fn load_embeddings(path: PathBuf, dissimilarity: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: io::load_embeddings(&path, self::dissimilarity(dissimilarity)?).map_err(to_py)?,
        })
    }

    /// Synthetic data: exponential identity effects plus Gaussian noise.
    #[staticmethod]
    #[pyo3(signature = (g = 50, m = 5, dim = 128, noise = 5.0, seed = 0))]
    fn synthetic(g: usize, m: usize, dim: usize, noise: f64, seed: u64) -> PyResult<Self> {
        let cfg = SyntheticConfig {
            g,
            m,
            dim,
            noise_param: noise,
            seed,
            ..Default::default()
        };
        Ok(PyDataset {
            inner: matchci::generate_synthetic(&cfg).map_err(to_py)?,
        })
    }

    #[getter]
    fn identities(&self) -> Vec<String> {
        self.inner.identities().iter().map(|i| i.0.clone()).collect()
    }

    #[getter]
    fn instance_counts(&self) -> Vec<usize> {
        self.inner.instance_counts()
    }

    fn __len__(&self) -> usize {
        self.inner.g()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(identities={}, instances={})", self.inner.g(), self.inner.total_instances())
    }
}

/// `{"frr": ..., "far": ...}` point estimates at `threshold`.
#[pyfunction]
fn estimate(py: Python<'_>, dataset: &PyDataset, threshold: f64) -> PyResult<Py<PyAny>> {
    let agg = CellCounts::at_threshold(&dataset.inner, threshold).map_err(to_py)?.aggregates();
    let out = PyDict::new(py);
    for m in [Metric::Frr, Metric::Far] {
        let est = matchci::estimate(&agg, m).map_err(to_py)?;
        out.set_item(m.to_string(), to_object(py, &est)?)?;
    }
    Ok(out.into_any().unbind())
}

/// Adjusted (`naive=False`) or naive Wilson interval.
#[pyfunction]
#[pyo3(signature = (dataset, threshold, metric, alpha = 0.05, naive = false))]
fn wilson_interval(
    py: Python<'_>,
    dataset: &PyDataset,
    threshold: f64,
    metric: &str,
    alpha: f64,
    naive: bool,
) -> PyResult<Py<PyAny>> {
    let agg = CellCounts::at_threshold(&dataset.inner, threshold).map_err(to_py)?.aggregates();
    let mode = if naive { WilsonMode::Naive } else { WilsonMode::Adjusted };
    let r = core_interval(self::metric(metric)?, &agg, mode, alpha, WilsonOptions::default()).map_err(to_py)?;
    to_object(py, &r)
}

/// Wilson bounds for a proportion `p` with effective size `n`.
#[pyfunction]
#[pyo3(signature = (p, n, alpha = 0.05))]
fn wilson_bounds(p: f64, n: f64, alpha: f64) -> PyResult<(f64, f64)> {
    core_wilson(p, n, alpha).map_err(to_py)
}

/// Percentile bootstrap interval; `scheme` is subsets, two-level, vertex or don.
#[pyfunction]
#[pyo3(signature = (dataset, threshold, metric, scheme = "vertex", b = 1000, alpha = 0.05, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn bootstrap_interval(
    py: Python<'_>,
    dataset: &PyDataset,
    threshold: f64,
    metric: &str,
    scheme: &str,
    b: usize,
    alpha: f64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let counts = CellCounts::at_threshold(&dataset.inner, threshold).map_err(to_py)?;
    let (agg, store) = (counts.aggregates(), counts.outcome_store());
    let scheme: Scheme = scheme.parse().map_err(to_py)?;
    let m = self::metric(metric)?;
    let dist = bootstrap_distribution(BootstrapInput::with_store(&agg, &store), scheme, m, b, seed).map_err(to_py)?;
    let mut r = percentile_interval(&dist, alpha).map_err(to_py)?;
    r.point = matchci::estimate(&agg, m).map_err(to_py)?.value;
    to_object(py, &r)
}

/// FRR interval at a target FAR: `method="parametric"` or `"bootstrap"`.
#[pyfunction]
#[pyo3(signature = (dataset, target_far, alpha = 0.05, method = "parametric", alpha_far = None, scheme = "vertex", b = 1000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn roc_interval(
    py: Python<'_>,
    dataset: &PyDataset,
    target_far: f64,
    alpha: f64,
    method: &str,
    alpha_far: Option<f64>,
    scheme: &str,
    b: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let r = match method {
        "parametric" => roc::roc_interval_parametric(
            &dataset.inner,
            target_far,
            alpha,
            alpha_far.unwrap_or(alpha),
            WilsonOptions::default(),
        ),
        "bootstrap" => roc::roc_interval_bootstrap(
            &dataset.inner,
            target_far,
            alpha,
            scheme.parse().map_err(to_py)?,
            b,
            seed,
        ),
        other => return Err(PyValueError::new_err(format!("unknown ROC method '{other}'"))),
    }
    .map_err(to_py)?;
    to_object(py, &r)
}

/// Empirical ROC as `(thresholds, frr, far)`.
#[pyfunction]
fn empirical_roc(dataset: &PyDataset) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let r = roc::empirical_roc(&dataset.inner).map_err(to_py)?;
    Ok((r.thresholds, r.frr_at, r.far_at))
}

/// Comparison plan; `units` is a list of `(identity, instance_count)`.
#[pyfunction]
#[pyo3(signature = (units, budget, metric = "far"))]
fn plan_protocol(py: Python<'_>, units: Vec<(String, usize)>, budget: usize, metric: &str) -> PyResult<Py<PyAny>> {
    let units: Vec<(IdentityId, usize)> = units.into_iter().map(|(id, m)| (IdentityId(id), m)).collect();
    let plan = match self::metric(metric)? {
        Metric::Far => matchci::plan_far_protocol(&units, budget),
        Metric::Frr => matchci::plan_frr_protocol(&units, budget),
    }
    .map_err(to_py)?;
    to_object(py, &plan)
}

/// Coverage study on synthetic data; `target` like `"far=1e-2"`.
#[pyfunction]
#[pyo3(signature = (target, methods, g = 50, m = 5, replications = 100, alpha = 0.05, b = 1000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    target: &str,
    methods: Vec<String>,
    g: usize,
    m: usize,
    replications: usize,
    alpha: f64,
    b: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let (name, rate) = target
        .split_once('=')
        .ok_or_else(|| PyValueError::new_err("target must look like 'far=1e-2'"))?;
    let rate: f64 = rate.trim().parse().map_err(|_| PyValueError::new_err(format!("bad rate '{rate}'")))?;
    let metric = self::metric(name.trim())?;
    let model = SyntheticConfig {
        g,
        m,
        seed,
        ..Default::default()
    };
    let calib = calibrate_threshold(&model, &CalibrationConfig::default(), metric, rate).map_err(to_py)?;
    let methods = methods
        .iter()
        .map(|name| method_from_name(name, b))
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let truth = Truth {
        metric,
        value: calib.truth,
    };
    let report = run_coverage_experiment(&model, calib.threshold, truth, &methods, alpha, replications, false)
        .map_err(to_py)?;
    to_object(py, &report)
}

#[pymodule]
fn pymatchci(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_interval, m)?)?;
    m.add_function(wrap_pyfunction!(roc_interval, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_roc, m)?)?;
    m.add_function(wrap_pyfunction!(plan_protocol, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
