//! Python bindings. Documents cross the boundary as JSON text in the same
//! formats the command-line tool reads and writes.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use silentdfs_core::doc::{to_dot, GraphDocument, VerdictReport};
use silentdfs_core::experiments::config::ExperimentConfig;
use silentdfs_core::graph::{generate_with, GraphKind, PortOrder};
use silentdfs_core::registers::Configuration;
use silentdfs_core::stabilizer::{
    audit_register_width, inject as inject_registers, legal_configuration, Corruption,
};
use silentdfs_core::token::dfs_discovery_order;
use silentdfs_core::verifier::{verify_all, VerifyMode};
use silentdfs_core::PortGraph;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A connected port-ordered graph with a distinguished root.
#[pyclass(name = "Graph", module = "silentdfs", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: PortGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(root: usize, ports: Vec<Vec<usize>>) -> PyResult<Self> {
        Ok(Self {
            inner: PortGraph::new(root, ports).map_err(value_error)?,
        })
    }

    /// `kind` is path, ring, complete, random_connected or random_tree_plus_chords.
    #[staticmethod]
    #[pyo3(signature = (kind, n, seed=0, sorted_ports=false))]
    fn generate(kind: &str, n: usize, seed: u64, sorted_ports: bool) -> PyResult<Self> {
        let kind: GraphKind = kind.parse().map_err(value_error)?;
        let order = if sorted_ports {
            PortOrder::Sorted
        } else {
            PortOrder::Shuffled
        };
        Ok(Self {
            inner: generate_with(kind, n, seed, order).map_err(value_error)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc = GraphDocument::parse(text).map_err(value_error)?;
        Ok(Self {
            inner: doc.graph().map_err(value_error)?,
        })
    }

    fn to_json(&self) -> String {
        GraphDocument::from_graph(&self.inner).to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn root(&self) -> usize {
        self.inner.root()
    }

    fn ports(&self) -> Vec<Vec<usize>> {
        self.inner.ports().to_vec()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges()
    }

    /// First-DFS labeling.
    fn mark(&self) -> PyLabeling {
        PyLabeling {
            graph: self.inner.clone(),
            config: legal_configuration(&self.inner),
        }
    }

    /// Node ids in first-DFS discovery order.
    fn dfs_order(&self) -> Vec<usize> {
        dfs_discovery_order(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.node_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(n={}, edges={}, root={})",
            self.inner.node_count(),
            self.inner.edge_count(),
            self.inner.root()
        )
    }
}

/// Registers of every node of a graph.
#[pyclass(name = "Labeling", module = "silentdfs", skip_from_py_object)]
#[derive(Clone)]
struct PyLabeling {
    graph: PortGraph,
    config: Configuration,
}

#[pymethods]
impl PyLabeling {
    /// A graph document that carries registers.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc = GraphDocument::parse(text).map_err(value_error)?;
        let (graph, config) = doc.labeled().map_err(value_error)?;
        Ok(Self { graph, config })
    }

    fn to_json(&self) -> String {
        GraphDocument::with_config(&self.graph, &self.config).to_json()
    }

    #[getter]
    fn graph(&self) -> PyGraph {
        PyGraph {
            inner: self.graph.clone(),
        }
    }

    /// `(in, out)` per node, `None` where unset.
    fn intervals(&self) -> Vec<(Option<i64>, Option<i64>)> {
        self.config
            .iter()
            .map(|r| (r.in_label, r.out_label))
            .collect()
    }

    fn parent_ports(&self) -> Vec<Option<usize>> {
        self.config.iter().map(|r| r.parent_port).collect()
    }

    /// Copy with register overwrites applied, e.g. `"node=2,field=out,value=99"`.
    fn inject(&self, spec: &str) -> PyResult<Self> {
        let cs = Corruption::parse_list(spec).map_err(value_error)?;
        let config = inject_registers(&self.config, &cs).map_err(value_error)?;
        Ok(Self {
            graph: self.graph.clone(),
            config,
        })
    }

    /// `(accepted, detecting_nodes)`. `mode` is first_dfs or some_dfs.
    #[pyo3(signature = (mode="first_dfs"))]
    fn verify(&self, mode: &str) -> PyResult<(bool, Vec<usize>)> {
        let mode: VerifyMode = mode.parse().map_err(value_error)?;
        let vm = verify_all(&self.graph, &self.config, mode);
        Ok((vm.accepted(), vm.detecting_nodes()))
    }

    /// Full verdict report as JSON.
    #[pyo3(signature = (mode="first_dfs"))]
    fn verify_report(&self, mode: &str) -> PyResult<String> {
        let mode: VerifyMode = mode.parse().map_err(value_error)?;
        let report = VerdictReport::from(&verify_all(&self.graph, &self.config, mode));
        serde_json::to_string_pretty(&report).map_err(value_error)
    }

    fn to_dot(&self) -> String {
        to_dot(&self.graph, &self.config)
    }

    /// Register-width audit as JSON.
    fn audit(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&audit_register_width(&self.graph, &self.config))
            .map_err(value_error)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.graph == other.graph && self.config == other.config
    }

    fn __repr__(&self) -> String {
        format!("Labeling(n={})", self.graph.node_count())
    }
}

/// Runs an experiment config (simulate, fuzz, bench or tokens) and returns
/// the report JSON. A previously returned report is accepted too and replays
/// to the same text.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let config = ExperimentConfig::from_json(config_json).map_err(value_error)?;
    let envelope = py.detach(|| config.execute()).map_err(value_error)?;
    Ok(envelope.to_json())
}

/// Shorthand for a fuzz campaign over random connected graphs.
#[pyfunction]
#[pyo3(signature = (trials=1000, seed=2024, n_min=4, n_max=32))]
fn fuzz(py: Python<'_>, trials: usize, seed: u64, n_min: usize, n_max: usize) -> PyResult<String> {
    if trials == 0 || n_min == 0 || n_min > n_max {
        return Err(PyValueError::new_err(
            "need trials > 0 and 1 <= n_min <= n_max",
        ));
    }
    let cfg = silentdfs_core::experiments::fuzz::FuzzConfig {
        trials,
        seed,
        n_min,
        n_max,
        ..Default::default()
    };
    let envelope = py
        .detach(|| ExperimentConfig::Fuzz(cfg).execute())
        .map_err(value_error)?;
    Ok(envelope.to_json())
}

#[pymodule]
fn silentdfs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyLabeling>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(fuzz, m)?)?;
    Ok(())
}
