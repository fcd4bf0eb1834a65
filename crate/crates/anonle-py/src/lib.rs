//! Python bindings for the `anonle` crate: build a network, run a leader
//! election on it, and inspect the protocol gate family.
//!
//! The module mirrors the Rust API at a coarse grain — topologies and
//! election runs — so experiments can be scripted from Python while all the
//! simulation work stays in Rust.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use anonle::fview::fview_of;
use anonle::leader::{algorithm1, algorithm2, algorithm2_generalized, Outcome};
use anonle::qsim::gates;
use anonle::runtime::{run, RunConfig};
use anonle::topology::{
    assign_ports, generate, parse_edge_list, Labeling, Topology as CoreTopology, TopologyKind,
};

/// SplitMix64; derives independent sub-seeds from a user seed.
fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Renders an error with its full source chain, so a party failure shows
/// the underlying cause and not just "party 3 failed".
fn runtime_err(e: impl std::error::Error) -> PyErr {
    let mut msg = e.to_string();
    let mut src = e.source();
    while let Some(s) = src {
        msg.push_str(": ");
        msg.push_str(&s.to_string());
        src = s.source();
    }
    PyRuntimeError::new_err(msg)
}

/// An anonymous network: a connected (multi)graph, undirected or directed.
#[pyclass(frozen, skip_from_py_object, module = "anonle_py")]
struct Topology {
    inner: CoreTopology,
}

#[pymethods]
impl Topology {
    /// Undirected cycle on `n` parties.
    #[staticmethod]
    fn ring(n: usize) -> PyResult<Self> {
        Ok(Topology { inner: generate(&TopologyKind::Ring { n }, 0).map_err(value_err)? })
    }

    /// Complete graph on `n` parties.
    #[staticmethod]
    fn complete(n: usize) -> PyResult<Self> {
        Ok(Topology { inner: generate(&TopologyKind::Complete { n }, 0).map_err(value_err)? })
    }

    /// Random connected `degree`-regular graph on `n` parties.
    #[staticmethod]
    fn random_regular(n: usize, degree: usize, seed: u64) -> PyResult<Self> {
        let kind = TopologyKind::RandomRegular { n, degree };
        Ok(Topology { inner: generate(&kind, seed).map_err(value_err)? })
    }

    /// Directed cycle on `n` parties.
    #[staticmethod]
    fn directed_cycle(n: usize) -> PyResult<Self> {
        Ok(Topology { inner: generate(&TopologyKind::DirectedCycle { n }, 0).map_err(value_err)? })
    }

    /// Random strongly connected digraph with `arcs` arcs.
    #[staticmethod]
    fn random_strong_digraph(n: usize, arcs: usize, seed: u64) -> PyResult<Self> {
        let kind = TopologyKind::RandomStrongDigraph { n, arcs };
        Ok(Topology { inner: generate(&kind, seed).map_err(value_err)? })
    }

    /// Arbitrary edge list; `edges` are `(u, v)` pairs over `0..n`.
    #[staticmethod]
    #[pyo3(signature = (n, edges, directed=false))]
    fn from_edges(n: usize, edges: Vec<(usize, usize)>, directed: bool) -> PyResult<Self> {
        Ok(Topology { inner: CoreTopology::new(n, edges, directed).map_err(value_err)? })
    }

    /// Parses the same edge-list text format the command-line tool accepts.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        let (topo, _ports) = parse_edge_list(text).map_err(value_err)?;
        Ok(Topology { inner: topo })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges.clone()
    }

    #[getter]
    fn directed(&self) -> bool {
        self.inner.directed
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(n={}, edges={}, directed={})",
            self.inner.n,
            self.inner.edges.len(),
            self.inner.directed
        )
    }
}

/// Result of one election run.
#[pyclass(frozen, module = "anonle_py")]
struct ElectionResult {
    /// Per-party outcome: `"leader"`, `"follower"`, or `"error:<reason>"`.
    #[pyo3(get)]
    outcomes: Vec<String>,
    /// Index of the elected party, when exactly one party won.
    #[pyo3(get)]
    leader: Option<usize>,
    /// Per-party agreed network size (bounded-count protocol only).
    #[pyo3(get)]
    winners: Option<Vec<Option<usize>>>,
    #[pyo3(get)]
    rounds: u32,
    #[pyo3(get)]
    classical_bits: u64,
    #[pyo3(get)]
    qubits_moved: u64,
}

#[pymethods]
impl ElectionResult {
    fn __repr__(&self) -> String {
        format!(
            "ElectionResult(leader={:?}, rounds={}, classical_bits={}, qubits_moved={})",
            self.leader, self.rounds, self.classical_bits, self.qubits_moved
        )
    }
}

fn outcome_str(o: &Outcome) -> String {
    match o {
        Outcome::Leader => "leader".to_string(),
        Outcome::Follower => "follower".to_string(),
        Outcome::Error(reason) => format!(
            "error:{}",
            serde_json::to_value(reason).expect("reason serializes").as_str().unwrap().to_owned()
        ),
    }
}

fn pack(outcomes: Vec<Outcome>, winners: Option<Vec<Option<usize>>>, stats: anonle::runtime::RunStats) -> ElectionResult {
    let leaders: Vec<usize> = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| matches!(o, Outcome::Leader))
        .map(|(v, _)| v)
        .collect();
    ElectionResult {
        outcomes: outcomes.iter().map(outcome_str).collect(),
        leader: if leaders.len() == 1 { Some(leaders[0]) } else { None },
        winners,
        rounds: stats.rounds,
        classical_bits: stats.classical_bits,
        qubits_moved: stats.qubits_moved,
    }
}

/// Runs a leader election and reports the per-party outcomes.
///
/// `protocol` is one of:
///   * `"alg1"` — exact election from a known bound on the party count
///     (`bound` defaults to the true count; the network must be undirected);
///   * `"alg2"` — exact election from the exact party count, quantum
///     communication confined to the first round (undirected or directed);
///   * `"alg2-generalized"` — exact election from only a `bound`, racing one
///     bounded-count instance per candidate count (set `sequential=True` to
///     try candidate counts one after another instead of all at once).
///
/// `seed` drives all measurement randomness; identical arguments give
/// identical results. `port_seed` picks the (arbitrary but fixed) local port
/// numbering; `round_cap` overrides the default budget of `10·n²` rounds.
#[pyfunction]
#[pyo3(signature = (topology, protocol="alg2", seed=0, bound=None, sequential=false, round_cap=None, port_seed=None))]
fn run_election(
    topology: &Topology,
    protocol: &str,
    seed: u64,
    bound: Option<usize>,
    sequential: bool,
    round_cap: Option<u32>,
    port_seed: Option<u64>,
) -> PyResult<ElectionResult> {
    let topo = &topology.inner;
    let ports = assign_ports(topo, port_seed.unwrap_or_else(|| mix(seed, 0x504f_5254)));
    let cfg = RunConfig {
        seed: mix(seed, 0x0052_554e),
        round_cap,
        schedule: None,
        rng_tags: None,
    };
    match protocol {
        "alg1" => {
            let b = bound.unwrap_or(topo.n);
            let out = run(&ports, &cfg, |h| async move { algorithm1(&h, b).await })
                .map_err(runtime_err)?;
            Ok(pack(out.results, None, out.stats))
        }
        "alg2" => {
            let n = topo.n;
            if bound.is_some() {
                return Err(value_err("alg2 uses the exact party count; bound is not accepted"));
            }
            let out = run(&ports, &cfg, |h| async move { algorithm2(&h, n).await })
                .map_err(runtime_err)?;
            Ok(pack(out.results, None, out.stats))
        }
        "alg2-generalized" => {
            let b = bound
                .ok_or_else(|| value_err("alg2-generalized needs bound=<upper bound on n>"))?;
            let out = run(&ports, &cfg, |h| async move {
                algorithm2_generalized(&h, b, sequential).await
            })
            .map_err(runtime_err)?;
            let outcomes: Vec<Outcome> = out.results.iter().map(|g| g.outcome).collect();
            let winners: Vec<Option<usize>> = out.results.iter().map(|g| g.winner).collect();
            Ok(pack(outcomes, Some(winners), out.stats))
        }
        other => Err(value_err(format!(
            "unknown protocol {other:?}; expected alg1, alg2, or alg2-generalized"
        ))),
    }
}

/// Returns one of the protocol's gates as a dense matrix of complex entries.
///
/// `name`: `"u"` (even `k`; pass `psi`/`t` for the dephased variant),
/// `"v"` (odd `k`, two-qubit), `"w"` (sign repair), `"hadamard"`, `"cnot"`,
/// or `"x"`.
#[pyfunction]
#[pyo3(signature = (name, k=2, psi=None, t=0))]
fn gate_matrix(name: &str, k: usize, psi: Option<f64>, t: u32) -> PyResult<Vec<Vec<Complex64>>> {
    let gate = match name {
        "u" => match psi {
            Some(p) => gates::u_k_general(k, p, t).map_err(value_err)?,
            None => gates::u_k(k).map_err(value_err)?,
        },
        "v" => gates::v_k(k).map_err(value_err)?,
        "w" => gates::w_k(k).map_err(value_err)?,
        "hadamard" => gates::hadamard(),
        "cnot" => gates::cnot(),
        "x" => gates::pauli_x(),
        other => {
            return Err(value_err(format!(
                "unknown gate {other:?}; expected u, v, w, hadamard, cnot, or x"
            )))
        }
    };
    let d = gate.dim();
    Ok((0..d).map(|r| (0..d).map(|c| gate.entry(r, c)).collect()).collect())
}

/// Number of distinct view-equivalence classes among the parties, given a
/// labeling — parties in the same class can never be told apart by any
/// classical anonymous protocol.
#[pyfunction]
#[pyo3(signature = (topology, labels, bits=8, port_seed=0))]
fn view_classes(topology: &Topology, labels: Vec<u32>, bits: u8, port_seed: u64) -> PyResult<usize> {
    let topo = &topology.inner;
    if labels.len() != topo.n {
        return Err(value_err(format!("need {} labels, got {}", topo.n, labels.len())));
    }
    let ports = assign_ports(topo, port_seed);
    let lab = Labeling { bits, values: labels };
    let depth = topo.n.saturating_sub(1);
    let mut keys: Vec<Vec<u8>> = Vec::with_capacity(topo.n);
    for v in 0..topo.n {
        let fv = fview_of(&ports, &lab, v, depth).map_err(value_err)?;
        keys.push(fv.canonical_bytes().map_err(value_err)?);
    }
    keys.sort();
    keys.dedup();
    Ok(keys.len())
}

#[pymodule]
fn anonle_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Topology>()?;
    m.add_class::<ElectionResult>()?;
    m.add_function(wrap_pyfunction!(run_election, m)?)?;
    m.add_function(wrap_pyfunction!(gate_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(view_classes, m)?)?;
    Ok(())
}
