//! Python bindings for the qcongest simulator.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qcongest::graphs::{self, GraphSpec};
use qcongest::harness::{self, Column, Protocol, RunConfig, Scaled};
use qcongest::protocols::{self, AgreementParams, Tuning};
use qcongest::{qprims, statevec, Error, RandomSource};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn err(e: Error) -> PyErr {
    match e {
        Error::Parameter(_) | Error::Precondition(_) | Error::Config { .. } | Error::Parse { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Undirected simple connected graph.
#[pyclass(name = "Graph", module = "qcongest", frozen)]
struct PyGraph {
    inner: qcongest::Graph,
}

fn generated(spec: GraphSpec, seed: u64) -> PyResult<PyGraph> {
    let inner = spec.generate(&mut ChaCha8Rng::seed_from_u64(seed)).map_err(err)?;
    Ok(PyGraph { inner })
}

#[pymethods]
impl PyGraph {
    #[staticmethod]
    fn complete(n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: qcongest::Graph::complete(n).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_edges(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Self {
            inner: qcongest::Graph::from_edges(n, &edges).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: qcongest::Graph::from_edge_list(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn hypercube(dim: u32) -> PyResult<Self> {
        generated(GraphSpec::Hypercube { dim }, 0)
    }

    #[staticmethod]
    fn cycle(n: usize) -> PyResult<Self> {
        generated(GraphSpec::Cycle { n }, 0)
    }

    #[staticmethod]
    fn path(n: usize) -> PyResult<Self> {
        generated(GraphSpec::Path { n }, 0)
    }

    #[staticmethod]
    fn star(n: usize) -> PyResult<Self> {
        generated(GraphSpec::Star { n }, 0)
    }

    #[staticmethod]
    #[pyo3(signature = (n, m, seed = 0))]
    fn gnm(n: usize, m: usize, seed: u64) -> PyResult<Self> {
        generated(GraphSpec::Gnm { n, m }, seed)
    }

    #[staticmethod]
    #[pyo3(signature = (n, d, seed = 0))]
    fn random_regular(n: usize, d: usize, seed: u64) -> PyResult<Self> {
        generated(GraphSpec::RandomRegular { n, d }, seed)
    }

    /// G(n, p) conditioned on diameter at most 2.
    #[staticmethod]
    #[pyo3(signature = (n, p = None, seed = 0))]
    fn diameter2(n: usize, p: Option<f64>, seed: u64) -> PyResult<Self> {
        generated(GraphSpec::Diameter2Random { n, p }, seed)
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn degree(&self, v: usize) -> PyResult<usize> {
        self.check(v)?;
        Ok(self.inner.degree(v))
    }

    fn neighbors(&self, v: usize) -> PyResult<Vec<usize>> {
        self.check(v)?;
        Ok(self.inner.neighbors(v).collect())
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().collect()
    }

    fn diameter(&self) -> PyResult<usize> {
        graphs::diameter(&self.inner).map_err(err)
    }

    /// Lazy-walk mixing time at total-variation tolerance `tol`.
    fn mixing_time(&self, py: Python<'_>, tol: f64) -> PyResult<usize> {
        let g = &self.inner;
        py.detach(|| graphs::estimate_mixing_time(g, tol)).map_err(err)
    }

    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list()
    }

    fn __len__(&self) -> usize {
        self.inner.node_count()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, m={})", self.inner.node_count(), self.inner.edge_count())
    }
}

impl PyGraph {
    fn check(&self, v: usize) -> PyResult<()> {
        if v < self.inner.node_count() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("node {v} out of range")))
        }
    }
}

/// sin²((2t+1)θ) with θ = asin(√(marked/domain)).
#[pyfunction]
fn grover_success_probability(domain: u64, marked: u64, iterations: u64) -> PyResult<f64> {
    qprims::grover_success_probability(domain, marked, iterations).map_err(err)
}

#[pyfunction]
fn phase_estimation_distribution(omega: f64, p: usize) -> PyResult<Vec<f64>> {
    if p == 0 {
        return Err(PyValueError::new_err("p must be positive"));
    }
    Ok(qprims::phase_estimation_distribution(omega, p))
}

#[pyfunction]
fn johnson_gap(universe: u64, k: u64) -> PyResult<f64> {
    qprims::johnson_gap(universe, k).map_err(err)
}

/// Success probability from an explicit state-vector run on a star.
#[pyfunction]
fn grover_star_exact(leaves: usize, marked: Vec<usize>, iterations: usize) -> PyResult<f64> {
    statevec::grover_star_exact(leaves, &marked, iterations).map_err(err)
}

/// Runs one protocol once and returns its outcome as a dict.
#[pyfunction]
#[pyo3(signature = (protocol, graph, seed = 0, k = None, tau = None, eps = None, gamma = None, inputs = None))]
#[allow(clippy::too_many_arguments)]
fn run_protocol<'py>(
    py: Python<'py>,
    protocol: &str,
    graph: &PyGraph,
    seed: u64,
    k: Option<usize>,
    tau: Option<usize>,
    eps: Option<f64>,
    gamma: Option<f64>,
    inputs: Option<Vec<bool>>,
) -> PyResult<Bound<'py, PyDict>> {
    let protocol: Protocol = protocol.parse().map_err(err)?;
    let g = &graph.inner;
    let n = g.node_count();
    let nf = n as f64;
    let tuning = Tuning::default();
    let out = PyDict::new(py);
    out.set_item("protocol", protocol.name())?;
    let missing = |name: &str| PyValueError::new_err(format!("{name} is required for {protocol}"));

    let (ledger, valid) = if protocol == Protocol::Agreement {
        let inputs = inputs.unwrap_or_else(|| harness::mixed_inputs(n));
        let defaults = AgreementParams::for_size(n);
        let params = AgreementParams {
            eps: eps.unwrap_or(defaults.eps),
            gamma: gamma.unwrap_or(defaults.gamma),
        };
        let res = py
            .detach(|| protocols::quantum_agreement(g, &inputs, &params, &tuning, &mut RandomSource::new(seed, n)))
            .map_err(err)?;
        out.set_item("decisions", res.decisions)?;
        out.set_item("candidates", res.candidates)?;
        out.set_item("estimates_accurate", res.estimates_accurate)?;
        (res.ledger, res.valid)
    } else {
        let res = py
            .detach(|| {
                let mut rng = RandomSource::new(seed, n);
                match protocol {
                    Protocol::Complete => {
                        protocols::quantum_le_complete(g, k.unwrap_or(nf.cbrt().ceil() as usize), &tuning, &mut rng)
                    }
                    Protocol::RandomWalk => {
                        let tau = tau.unwrap_or(0);
                        let k = k.unwrap_or(((tau as f64).powf(2.0 / 3.0) * nf.cbrt()).ceil() as usize);
                        protocols::quantum_rw_le(g, tau, k.min(n), &tuning, &mut rng)
                    }
                    Protocol::Diameter2 => protocols::quantum_qw_le(
                        g,
                        k.unwrap_or(nf.powf(2.0 / 3.0).ceil() as usize),
                        &tuning,
                        &mut rng,
                    ),
                    _ => protocols::quantum_general_le(g, &tuning, &mut rng),
                }
            })
            .map_err(|e| match (&e, protocol, tau) {
                (Error::Parameter(_), Protocol::RandomWalk, None) => missing("tau"),
                _ => err(e),
            })?;
        out.set_item("elected", res.elected)?;
        out.set_item("candidates", res.candidates)?;
        if !res.cluster_counts.is_empty() {
            out.set_item("cluster_counts", res.cluster_counts)?;
        }
        (res.ledger, res.valid)
    };
    out.set_item("valid", valid)?;
    out.set_item("rounds", ledger.rounds)?;
    out.set_item("classical_messages", ledger.classical_messages)?;
    out.set_item("quantum_messages", ledger.quantum_messages)?;
    out.set_item("total_messages", ledger.total_messages())?;
    Ok(out)
}

/// Runs a grid of trials; returns one dict per run in (n, trial) order.
#[pyfunction]
#[pyo3(signature = (protocol, sizes, trials, seed = 0, k = None))]
fn run_sweep<'py>(
    py: Python<'py>,
    protocol: &str,
    sizes: Vec<usize>,
    trials: u64,
    seed: u64,
    k: Option<&str>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut config = RunConfig::new(protocol.parse().map_err(err)?, sizes, trials, seed);
    if let Some(k) = k {
        config.k = k.parse::<Scaled>().map_err(err)?;
    }
    let runs = py.detach(|| harness::run_sweep(&config)).map_err(err)?;
    runs.into_iter()
        .map(|e| {
            let r = e.record;
            let d = PyDict::new(py);
            d.set_item("protocol", r.protocol.name())?;
            d.set_item("n", r.n)?;
            d.set_item("m", r.m)?;
            d.set_item("k", r.k)?;
            d.set_item("tau", r.tau)?;
            d.set_item("eps", r.eps)?;
            d.set_item("gamma", r.gamma)?;
            d.set_item("seed", r.seed)?;
            d.set_item("valid", r.valid)?;
            d.set_item("rounds", r.rounds)?;
            d.set_item("classical_msgs", r.classical_msgs)?;
            d.set_item("quantum_msgs", r.quantum_msgs)?;
            d.set_item("total_msgs", r.total_msgs)?;
            Ok(d)
        })
        .collect()
}

/// Least-squares slope of log₂ value against log₂ n.
#[pyfunction]
fn fit_scaling<'py>(py: Python<'py>, points: Vec<(usize, f64)>) -> PyResult<Bound<'py, PyDict>> {
    let fit = harness::fit_points(&points, Column::TotalMsgs).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("slope", fit.slope)?;
    d.set_item("intercept", fit.intercept)?;
    d.set_item("residual", fit.residual)?;
    d.set_item("n_min", fit.n_min)?;
    d.set_item("n_max", fit.n_max)?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "qcongest")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(grover_success_probability, m)?)?;
    m.add_function(wrap_pyfunction!(phase_estimation_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(johnson_gap, m)?)?;
    m.add_function(wrap_pyfunction!(grover_star_exact, m)?)?;
    m.add_function(wrap_pyfunction!(run_protocol, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(fit_scaling, m)?)?;
    Ok(())
}
