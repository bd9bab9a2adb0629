//! Python bindings: datasets, simulation, sampling, posterior inference
//! and evaluation metrics.

use std::path::PathBuf;

use direct_core::metrics;
use direct_core::posterior::DirichletWeights;
use direct_core::sampler::MembershipKernel;
use direct_core::{AlphaPrior, ChainConfig, ClusterParams, Error};
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Numeric(_) => PyArithmeticError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Replicated time-course measurements, one profile per item.
#[pyclass(module = "direct_py", frozen)]
struct Dataset {
    inner: direct_core::Dataset,
}

#[pymethods]
impl Dataset {
    /// `values[i][t][r]` for item `i`, time `t`, replicate `r`.
    #[new]
    #[pyo3(signature = (times, values, items=None))]
    fn new(times: Vec<f64>, values: Vec<Vec<Vec<f64>>>, items: Option<Vec<String>>) -> PyResult<Self> {
        let n = values.len();
        let r = values.first().and_then(|v| v.first()).map_or(0, Vec::len);
        let mut flat = Vec::new();
        for (i, item) in values.iter().enumerate() {
            if item.len() != times.len() || item.iter().any(|t| t.len() != r) {
                return Err(PyValueError::new_err(format!("item {i} is not {} x {r}", times.len())));
            }
            flat.extend(item.iter().flatten());
        }
        let items = items.unwrap_or_else(|| (1..=n).map(|i| format!("item{i}")).collect());
        let reps = (1..=r).map(|x| x.to_string()).collect();
        let grid = direct_core::TimeGrid::new(times).map_err(to_py)?;
        let inner = direct_core::Dataset::new(items, reps, grid, flat).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: direct_core::Dataset::read_csv(path).map_err(to_py)? })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_csv(path).map_err(to_py)
    }

    #[getter]
    fn n_items(&self) -> usize {
        self.inner.n_items()
    }

    #[getter]
    fn n_times(&self) -> usize {
        self.inner.n_times()
    }

    #[getter]
    fn n_replicates(&self) -> usize {
        self.inner.n_replicates()
    }

    #[getter]
    fn items(&self) -> Vec<String> {
        self.inner.items().to_vec()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.grid().times().to_vec()
    }

    /// Item `i` as a `J x R` nested list.
    fn item(&self, i: usize) -> PyResult<Vec<Vec<f64>>> {
        if i >= self.inner.n_items() {
            return Err(PyValueError::new_err(format!("item index {i} out of range")));
        }
        Ok(self.inner.item(i).chunks(self.inner.n_replicates()).map(<[f64]>::to_vec).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.n_items()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n_items={}, n_times={}, n_replicates={})",
            self.inner.n_items(),
            self.inner.n_times(),
            self.inner.n_replicates()
        )
    }
}

/// Draws a dataset from a built-in scenario; returns the dataset and the
/// 0-based true labels.
#[pyfunction]
fn simulate(scenario: &str, seed: u64) -> PyResult<(Dataset, Vec<usize>)> {
    let s = direct_core::Scenario::builtin(scenario).map_err(to_py)?;
    let sim = direct_core::generate_dataset(&s, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(to_py)?;
    Ok((Dataset { inner: sim.data }, sim.truth.labels().to_vec()))
}

/// Recorded chain snapshots.
#[pyclass(module = "direct_py", frozen)]
struct Trace {
    inner: direct_core::Trace,
}

#[pymethods]
impl Trace {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: direct_core::Trace::load(path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn iterations(&self) -> Vec<usize> {
        self.inner.snapshots.iter().map(|s| s.iteration).collect()
    }

    #[getter]
    fn alphas(&self) -> Vec<f64> {
        self.inner.snapshots.iter().map(|s| s.state.alpha).collect()
    }

    #[getter]
    fn n_clusters(&self) -> Vec<usize> {
        self.inner.snapshots.iter().map(|s| s.state.k()).collect()
    }

    /// 0-based cluster labels of snapshot `h`.
    fn labels(&self, h: usize) -> PyResult<Vec<usize>> {
        self.inner
            .snapshots
            .get(h)
            .map(|s| s.state.partition.labels().to_vec())
            .ok_or_else(|| PyValueError::new_err(format!("snapshot {h} out of range")))
    }
}

fn parse_kernel(s: &str) -> PyResult<MembershipKernel> {
    match s {
        "uniform" => Ok(MembershipKernel::Uniform),
        "neal" => Ok(MembershipKernel::Neal),
        _ => Err(PyValueError::new_err(format!("unknown kernel `{s}` (uniform, neal)"))),
    }
}

/// Runs one chain and returns its trace.
#[pyfunction]
#[pyo3(signature = (data, seed, iterations=10_800, burn_in=0.2, thin=54, kernel="uniform",
                    alpha_shape=1.0, alpha_rate=1.0, lambda_upper=None, mean_prior_sd=None))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    data: &Dataset,
    seed: u64,
    iterations: usize,
    burn_in: f64,
    thin: usize,
    kernel: &str,
    alpha_shape: f64,
    alpha_rate: f64,
    lambda_upper: Option<f64>,
    mean_prior_sd: Option<f64>,
) -> PyResult<Trace> {
    let cfg = ChainConfig {
        iterations,
        burn_in,
        thin,
        seed,
        kernel: parse_kernel(kernel)?,
        alpha_prior: AlphaPrior::Gamma { shape: alpha_shape, rate: alpha_rate },
        lambda_upper,
        mean_prior_sd,
        ..Default::default()
    };
    let trace = py.detach(|| direct_core::run_chain(&data.inner, &cfg)).map_err(to_py)?;
    Ok(Trace { inner: trace })
}

/// Relabeled allocation matrix and summaries.
#[pyclass(module = "direct_py", frozen)]
struct Posterior {
    inner: direct_core::Posterior,
}

#[pymethods]
impl Posterior {
    /// Allocation probabilities as an `N x K` nested list.
    #[getter]
    fn p(&self) -> Vec<Vec<f64>> {
        self.inner.p().rows().map(<[f64]>::to_vec).collect()
    }

    /// 0-based hard assignments.
    #[getter]
    fn assignments(&self) -> Vec<usize> {
        self.inner.summary.assignments.iter().map(|a| a.cluster).collect()
    }

    #[getter]
    fn probabilities(&self) -> Vec<f64> {
        self.inner.summary.assignments.iter().map(|a| a.probability).collect()
    }

    /// Runner-up cluster and its probability for each item.
    #[getter]
    fn second_choices(&self) -> Vec<(Option<usize>, f64)> {
        self.inner.summary.assignments.iter().map(|a| (a.second_cluster, a.second_probability)).collect()
    }

    #[getter]
    fn cluster_means(&self) -> Vec<Vec<f64>> {
        self.inner.summary.clusters.iter().map(|c| c.mean_theta.clone()).collect()
    }

    /// Median (within, cond, resid) sds per cluster.
    #[getter]
    fn cluster_sds(&self) -> Vec<[f64; 3]> {
        self.inner.summary.clusters.iter().map(|c| c.median_sd).collect()
    }

    #[getter]
    fn pca_scores(&self) -> Vec<[f64; 2]> {
        self.inner.summary.pca_scores.clone()
    }

    #[getter]
    fn n_occupied(&self) -> usize {
        self.inner.summary.n_occupied()
    }

    fn write(&self, dir: PathBuf, data: &Dataset) -> PyResult<()> {
        self.inner.write_dir(dir, &data.inner).map_err(to_py)
    }
}

/// Resamples, relabels and summarizes a trace.
#[pyfunction]
#[pyo3(signature = (trace, data, seed=0, weights="literal"))]
fn posterior(py: Python<'_>, trace: &Trace, data: &Dataset, seed: u64, weights: &str) -> PyResult<Posterior> {
    let weights = match weights {
        "literal" => DirichletWeights::Literal,
        "scaled" => DirichletWeights::Scaled,
        "size_augmented" => DirichletWeights::SizeAugmented,
        _ => return Err(PyValueError::new_err(format!("unknown weights `{weights}`"))),
    };
    let opts = direct_core::PosteriorOptions { weights, seed, threads: None };
    let inner = py.detach(|| direct_core::infer(&trace.inner, &data.inner, &opts)).map_err(to_py)?;
    Ok(Posterior { inner })
}

#[pyfunction]
fn corrected_rand(a: Vec<i64>, b: Vec<i64>) -> PyResult<f64> {
    metrics::corrected_rand(&a, &b).map_err(to_py)
}

/// (nonsingleton, singleton) cluster counts.
#[pyfunction]
fn count_clusters(labels: Vec<i64>) -> (usize, usize) {
    metrics::count_clusters(&labels)
}

/// Log density of one flattened `J x R` profile (replicates fastest).
#[pyfunction]
fn log_likelihood(
    m: Vec<f64>,
    theta: Vec<f64>,
    var_within: f64,
    var_cond: f64,
    var_resid: f64,
    n_replicates: usize,
) -> PyResult<f64> {
    let p = ClusterParams::new(theta, var_within, var_cond, var_resid).map_err(to_py)?;
    direct_core::log_likelihood(&m, &p, n_replicates).map_err(to_py)
}

#[pymodule]
fn direct_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Trace>()?;
    m.add_class::<Posterior>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(posterior, m)?)?;
    m.add_function(wrap_pyfunction!(corrected_rand, m)?)?;
    m.add_function(wrap_pyfunction!(count_clusters, m)?)?;
    m.add_function(wrap_pyfunction!(log_likelihood, m)?)?;
    Ok(())
}
