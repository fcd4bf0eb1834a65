//! Network topologies and port numberings.
//!
//! A topology is a finite connected graph (or strongly connected digraph)
//! whose nodes stand for parties. Parties themselves never see node ids; all
//! addressing a protocol can do goes through a [`PortNumbering`], which gives
//! every node a private, arbitrary numbering of its incident links. Node
//! indices exist only for the simulator's bookkeeping (wiring, statistics,
//! audits) and are deliberately kept out of the protocol-facing API.
//!
//! Generation is deterministic: every random family is a pure function of
//! `(kind, parameters, seed)`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Hard ceiling on party count for the quantum protocols; the sparse state
/// tracks one superposition branch per candidate bit pattern, so runs are
/// sized for small networks. The CLI enforces this; the library itself only
/// checks structural validity.
pub const DEFAULT_MAX_QUANTUM_PARTIES: usize = 10;

/// Errors from topology construction, validation, or the edge-list format.
#[derive(Debug, Error)]
pub enum TopologyError {
    /// A family was asked for parameters it cannot satisfy (e.g. a 2-node
    /// ring, an odd sum of degrees, more arcs than ordered pairs).
    #[error("invalid parameters for {family}: {reason}")]
    Parameter { family: &'static str, reason: String },

    /// The random family failed to produce a valid graph within the retry
    /// budget for this seed.
    #[error("{family}: no valid graph found after {attempts} attempts (seed {seed})")]
    Exhausted { family: &'static str, attempts: u32, seed: u64 },

    /// Structural violations found by [`Topology::validate`].
    #[error("invalid topology: {0:?}")]
    Invalid(Vec<Violation>),

    /// A parse failure in the edge-list text format.
    #[error("edge list parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    /// An explicit port map that is not a bijection onto `0..degree`.
    #[error("bad port assignment at node {node}: {reason}")]
    BadPorts { node: usize, reason: String },
}

/// A single structural defect; `validate` returns all of them at once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NodeOutOfRange { edge: (usize, usize) },
    SelfLoop { node: usize },
    DuplicateEdge { edge: (usize, usize) },
    /// Undirected graph that is not connected.
    Disconnected,
    /// Directed graph that is not strongly connected.
    NotStronglyConnected,
    Empty,
}

/// An undirected graph or digraph on nodes `0..n`.
///
/// Undirected edges are stored as ordered pairs `(min, max)`; directed edges
/// as `(tail, head)`. At most one link per (unordered resp. ordered) pair,
/// and no self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub directed: bool,
}

impl Topology {
    /// Builds a topology from raw parts, normalizing edge order, and
    /// validates it.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        directed: bool,
    ) -> Result<Self, TopologyError> {
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(u, v)| if !directed && u > v { (v, u) } else { (u, v) })
            .collect();
        edges.sort_unstable();
        let topo = Topology { n, edges, directed };
        let violations = topo.validate();
        if violations.is_empty() {
            Ok(topo)
        } else {
            Err(TopologyError::Invalid(violations))
        }
    }

    /// Checks structural invariants and returns every violation found
    /// (empty means valid): index ranges, self-loops, duplicate links, and
    /// connectivity (strong connectivity for digraphs).
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n == 0 {
            return vec![Violation::Empty];
        }
        let mut structural_ok = true;
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if u >= self.n || v >= self.n {
                out.push(Violation::NodeOutOfRange { edge: (u, v) });
                structural_ok = false;
                continue;
            }
            if u == v {
                out.push(Violation::SelfLoop { node: u });
                structural_ok = false;
            }
            if i > 0 && self.edges[i - 1] == (u, v) {
                out.push(Violation::DuplicateEdge { edge: (u, v) });
                structural_ok = false;
            }
            if !self.directed && u > v {
                // `new` normalizes; a hand-built value may not be normalized,
                // which shows up as a duplicate check miss — treat as dup.
                out.push(Violation::DuplicateEdge { edge: (u, v) });
                structural_ok = false;
            }
        }
        if structural_ok {
            if self.directed {
                if !self.strongly_connected() {
                    out.push(Violation::NotStronglyConnected);
                }
            } else if !self.connected() {
                out.push(Violation::Disconnected);
            }
        }
        out
    }

    fn adjacency(&self, reversed: bool) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            let (a, b) = if reversed { (v, u) } else { (u, v) };
            adj[a].push(b);
            if !self.directed {
                adj[b].push(a);
            }
        }
        adj
    }

    fn reaches_all(adj: &[Vec<usize>]) -> bool {
        let n = adj.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    fn connected(&self) -> bool {
        Self::reaches_all(&self.adjacency(false))
    }

    /// Node 0 reaches everyone and everyone reaches node 0.
    fn strongly_connected(&self) -> bool {
        Self::reaches_all(&self.adjacency(false)) && Self::reaches_all(&self.adjacency(true))
    }

    /// Degree of `v` (undirected graphs only).
    pub fn degree(&self, v: usize) -> usize {
        assert!(!self.directed, "degree() is for undirected topologies");
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub fn out_degree(&self, v: usize) -> usize {
        if self.directed {
            self.edges.iter().filter(|&&(a, _)| a == v).count()
        } else {
            self.degree(v)
        }
    }

    pub fn in_degree(&self, v: usize) -> usize {
        if self.directed {
            self.edges.iter().filter(|&&(_, b)| b == v).count()
        } else {
            self.degree(v)
        }
    }

    /// Relabels nodes: node `v` becomes `perm[v]`. `perm` must be a
    /// permutation of `0..n`. Used to check that protocols cannot depend on
    /// the (hidden) node identities.
    pub fn permute(&self, perm: &[usize]) -> Topology {
        assert_eq!(perm.len(), self.n, "permutation length mismatch");
        Topology::new(
            self.n,
            self.edges.iter().map(|&(u, v)| (perm[u], perm[v])),
            self.directed,
        )
        .expect("relabeling a valid topology keeps it valid")
    }
}

/// The built-in graph families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologyKind {
    /// Cycle on `n ≥ 3` nodes.
    Ring { n: usize },
    /// Complete graph on `n ≥ 2` nodes.
    Complete { n: usize },
    /// Uniform-ish random `degree`-regular connected graph via the pairing
    /// model with rejection.
    RandomRegular { n: usize, degree: usize },
    /// Directed cycle on `n ≥ 2` nodes (every node has in/out degree 1).
    DirectedCycle { n: usize },
    /// Random Hamiltonian cycle plus `arcs − n` extra distinct arcs; strongly
    /// connected by construction.
    RandomStrongDigraph { n: usize, arcs: usize },
}

impl TopologyKind {
    pub fn family(&self) -> &'static str {
        match self {
            TopologyKind::Ring { .. } => "ring",
            TopologyKind::Complete { .. } => "complete",
            TopologyKind::RandomRegular { .. } => "random_regular",
            TopologyKind::DirectedCycle { .. } => "directed_cycle",
            TopologyKind::RandomStrongDigraph { .. } => "random_strong_digraph",
        }
    }
}

/// Generates a topology; a pure function of `(kind, seed)`.
pub fn generate(kind: &TopologyKind, seed: u64) -> Result<Topology, TopologyError> {
    let param = |family, reason: String| TopologyError::Parameter { family, reason };
    match *kind {
        TopologyKind::Ring { n } => {
            if n < 3 {
                return Err(param("ring", format!("need n >= 3, got {n}")));
            }
            Topology::new(n, (0..n).map(|i| (i, (i + 1) % n)), false)
        }
        TopologyKind::Complete { n } => {
            if n < 2 {
                return Err(param("complete", format!("need n >= 2, got {n}")));
            }
            Topology::new(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))), false)
        }
        TopologyKind::DirectedCycle { n } => {
            if n < 2 {
                return Err(param("directed_cycle", format!("need n >= 2, got {n}")));
            }
            Topology::new(n, (0..n).map(|i| (i, (i + 1) % n)), true)
        }
        TopologyKind::RandomRegular { n, degree } => random_regular(n, degree, seed),
        TopologyKind::RandomStrongDigraph { n, arcs } => random_strong_digraph(n, arcs, seed),
    }
}

fn random_regular(n: usize, degree: usize, seed: u64) -> Result<Topology, TopologyError> {
    let family = "random_regular";
    if n < 2 || degree == 0 || degree >= n || !(n * degree).is_multiple_of(2) {
        return Err(TopologyError::Parameter {
            family,
            reason: format!("need 0 < degree < n and n*degree even, got n={n} degree={degree}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const ATTEMPTS: u32 = 10_000;
    for _ in 0..ATTEMPTS {
        // Pairing model: degree stubs per node, shuffled and paired off.
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
        stubs.shuffle(&mut rng);
        let mut edges = Vec::with_capacity(n * degree / 2);
        let mut ok = true;
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u == v {
                ok = false;
                break;
            }
            edges.push((u, v));
        }
        if !ok {
            continue;
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        if let Ok(topo) = Topology::new(n, edges, false) {
            return Ok(topo);
        }
    }
    Err(TopologyError::Exhausted { family, attempts: ATTEMPTS, seed })
}

fn random_strong_digraph(n: usize, arcs: usize, seed: u64) -> Result<Topology, TopologyError> {
    let family = "random_strong_digraph";
    if n < 2 || arcs < n || arcs > n * (n - 1) {
        return Err(TopologyError::Parameter {
            family,
            reason: format!("need n <= arcs <= n*(n-1), got n={n} arcs={arcs}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut edges: Vec<(usize, usize)> =
        (0..n).map(|i| (order[i], order[(i + 1) % n])).collect();
    let mut have: std::collections::BTreeSet<(usize, usize)> = edges.iter().copied().collect();
    while edges.len() < arcs {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && have.insert((u, v)) {
            edges.push((u, v));
        }
    }
    Topology::new(n, edges, true)
}

/// One endpoint's knowledge of a link: who is on the other side and which of
/// *their* ports the link occupies. Simulator-internal; protocols only ever
/// see port numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub peer: usize,
    pub peer_port: usize,
}

/// Per-node port numberings for a topology.
///
/// For every node, outgoing ports `0..out_degree` and incoming ports
/// `0..in_degree` are private bijections onto the node's incident links. On
/// undirected topologies the two sides coincide (one port per link, used for
/// both directions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortNumbering {
    out_links: Vec<Vec<Link>>,
    in_links: Vec<Vec<Link>>,
    directed: bool,
}

impl PortNumbering {
    /// Link leaving `v` through out-port `p`; `peer_port` is the in-port on
    /// which the peer receives.
    pub fn out_link(&self, v: usize, p: usize) -> Link {
        self.out_links[v][p]
    }

    /// Link entering `v` through in-port `q`; `peer_port` is the out-port
    /// through which the peer sends.
    pub fn in_link(&self, v: usize, q: usize) -> Link {
        self.in_links[v][q]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.out_links[v].len()
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_links[v].len()
    }

    pub fn n(&self) -> usize {
        self.out_links.len()
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    /// Carries a port numbering along a node relabeling (see
    /// [`Topology::permute`]): node `perm[v]` keeps exactly the port layout
    /// `v` had, with peers renamed. Together the pair describes the *same*
    /// port-numbered network, so an anonymous protocol must behave
    /// identically on both.
    pub fn permute(&self, perm: &[usize]) -> PortNumbering {
        let n = self.n();
        assert_eq!(perm.len(), n, "permutation length mismatch");
        let relabel = |links: &Vec<Vec<Link>>| {
            let mut out = vec![Vec::new(); n];
            for v in 0..n {
                out[perm[v]] = links[v]
                    .iter()
                    .map(|l| Link { peer: perm[l.peer], peer_port: l.peer_port })
                    .collect();
            }
            out
        };
        PortNumbering {
            out_links: relabel(&self.out_links),
            in_links: relabel(&self.in_links),
            directed: self.directed,
        }
    }
}

/// Assigns a pseudorandom port numbering; a pure function of
/// `(topology, seed)`.
pub fn assign_ports(topo: &Topology, seed: u64) -> PortNumbering {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if topo.directed {
        // Positions of each edge in each endpoint's (shuffled) port list.
        let mut out_inc: Vec<Vec<usize>> = vec![Vec::new(); topo.n]; // edge indices
        let mut in_inc: Vec<Vec<usize>> = vec![Vec::new(); topo.n];
        for (e, &(u, v)) in topo.edges.iter().enumerate() {
            out_inc[u].push(e);
            in_inc[v].push(e);
        }
        for v in 0..topo.n {
            out_inc[v].shuffle(&mut rng);
            in_inc[v].shuffle(&mut rng);
        }
        build_directed_ports(topo, &out_inc, &in_inc)
    } else {
        let mut inc: Vec<Vec<usize>> = vec![Vec::new(); topo.n];
        for (e, &(u, v)) in topo.edges.iter().enumerate() {
            inc[u].push(e);
            inc[v].push(e);
        }
        for ports in &mut inc {
            ports.shuffle(&mut rng);
        }
        build_undirected_ports(topo, &inc)
    }
}

fn build_undirected_ports(topo: &Topology, inc: &[Vec<usize>]) -> PortNumbering {
    // port_of[e] = (port at min endpoint, port at max endpoint)
    let mut port_at: Vec<[usize; 2]> = vec![[usize::MAX; 2]; topo.edges.len()];
    for (v, ports) in inc.iter().enumerate() {
        for (p, &e) in ports.iter().enumerate() {
            let side = usize::from(topo.edges[e].1 == v);
            port_at[e][side] = p;
        }
    }
    let mut links: Vec<Vec<Link>> = inc
        .iter()
        .map(|ports| vec![Link { peer: usize::MAX, peer_port: usize::MAX }; ports.len()])
        .collect();
    for (e, &(u, v)) in topo.edges.iter().enumerate() {
        let [pu, pv] = port_at[e];
        links[u][pu] = Link { peer: v, peer_port: pv };
        links[v][pv] = Link { peer: u, peer_port: pu };
    }
    PortNumbering { out_links: links.clone(), in_links: links, directed: false }
}

fn build_directed_ports(
    topo: &Topology,
    out_inc: &[Vec<usize>],
    in_inc: &[Vec<usize>],
) -> PortNumbering {
    let mut out_port: Vec<usize> = vec![usize::MAX; topo.edges.len()];
    let mut in_port: Vec<usize> = vec![usize::MAX; topo.edges.len()];
    for ports in out_inc.iter() {
        for (p, &e) in ports.iter().enumerate() {
            out_port[e] = p;
        }
    }
    for ports in in_inc.iter() {
        for (p, &e) in ports.iter().enumerate() {
            in_port[e] = p;
        }
    }
    let mut out_links: Vec<Vec<Link>> = out_inc
        .iter()
        .map(|ports| vec![Link { peer: usize::MAX, peer_port: usize::MAX }; ports.len()])
        .collect();
    let mut in_links: Vec<Vec<Link>> = in_inc
        .iter()
        .map(|ports| vec![Link { peer: usize::MAX, peer_port: usize::MAX }; ports.len()])
        .collect();
    for (e, &(u, v)) in topo.edges.iter().enumerate() {
        out_links[u][out_port[e]] = Link { peer: v, peer_port: in_port[e] };
        in_links[v][in_port[e]] = Link { peer: u, peer_port: out_port[e] };
    }
    PortNumbering { out_links, in_links, directed: true }
}

/// Builds a numbering from explicit per-edge ports (as read from a file),
/// checking that each node's ports form a bijection onto `0..degree`.
///
/// `edge_ports[i]` gives `(pu, pv)` for `edges[i]`: for undirected edges the
/// port at the smaller/larger endpoint respectively; for directed edges the
/// tail's out-port and the head's in-port.
pub fn ports_from_map(
    topo: &Topology,
    edge_ports: &[(usize, usize)],
) -> Result<PortNumbering, TopologyError> {
    assert_eq!(edge_ports.len(), topo.edges.len());
    let fill = |inc_count: &[usize],
                slot: &mut dyn FnMut(usize) -> (usize, usize)|
     -> Result<Vec<Vec<usize>>, TopologyError> {
        let mut table: Vec<Vec<usize>> =
            inc_count.iter().map(|&d| vec![usize::MAX; d]).collect();
        for e in 0..edge_ports.len() {
            let (node, port) = slot(e);
            let d = table[node].len();
            if port >= d {
                return Err(TopologyError::BadPorts {
                    node,
                    reason: format!("port {port} out of range 0..{d}"),
                });
            }
            if table[node][port] != usize::MAX {
                return Err(TopologyError::BadPorts {
                    node,
                    reason: format!("port {port} assigned twice"),
                });
            }
            table[node][port] = e;
        }
        Ok(table)
    };
    if topo.directed {
        let out_d: Vec<usize> = (0..topo.n).map(|v| topo.out_degree(v)).collect();
        let in_d: Vec<usize> = (0..topo.n).map(|v| topo.in_degree(v)).collect();
        let out_inc = fill(&out_d, &mut |e| (topo.edges[e].0, edge_ports[e].0))?;
        let in_inc = fill(&in_d, &mut |e| (topo.edges[e].1, edge_ports[e].1))?;
        Ok(build_directed_ports(topo, &out_inc, &in_inc))
    } else {
        let deg: Vec<usize> = (0..topo.n).map(|v| topo.degree(v)).collect();
        // Two passes share one table: each edge contributes a slot at both
        // endpoints.
        let mut table: Vec<Vec<usize>> = deg.iter().map(|&d| vec![usize::MAX; d]).collect();
        for (e, (&(u, v), &(pu, pv))) in topo.edges.iter().zip(edge_ports).enumerate() {
            for (node, port) in [(u, pu), (v, pv)] {
                let d = table[node].len();
                if port >= d {
                    return Err(TopologyError::BadPorts {
                        node,
                        reason: format!("port {port} out of range 0..{d}"),
                    });
                }
                if table[node][port] != usize::MAX {
                    return Err(TopologyError::BadPorts {
                        node,
                        reason: format!("port {port} assigned twice"),
                    });
                }
                table[node][port] = e;
            }
        }
        Ok(build_undirected_ports(topo, &table))
    }
}

/// Node labels for view construction: `values[v]` holds the label of node
/// `v` in the low `bits` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    pub bits: u8,
    pub values: Vec<u32>,
}

impl Labeling {
    pub fn uniform(n: usize, value: u32, bits: u8) -> Self {
        Labeling { bits, values: vec![value; n] }
    }
}

/// Parses the edge-list text format.
///
/// Line 1: `<n>` optionally followed by the word `directed`. Each subsequent
/// non-empty line: `u v` or `u v pu pv` (0-based node ids and ports; for a
/// directed arc `u -> v`, `pu` is u's out-port and `pv` is v's in-port).
/// Either every edge carries ports or none does; `#` starts a comment.
///
/// Returns the topology and, when ports were given, the explicit numbering.
pub fn parse_edge_list(text: &str) -> Result<(Topology, Option<PortNumbering>), TopologyError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line_no, header) = lines
        .next()
        .ok_or(TopologyError::Parse { line: 0, reason: "empty input".into() })?;
    let mut head_iter = header.split_whitespace();
    let n: usize = head_iter
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| TopologyError::Parse {
            line: line_no,
            reason: "expected `<n> [directed]`".into(),
        })?;
    let directed = match head_iter.next() {
        None => false,
        Some("directed") => true,
        Some(t) => {
            return Err(TopologyError::Parse {
                line: line_no,
                reason: format!("unexpected token {t:?} in header"),
            })
        }
    };
    let mut edges = Vec::new();
    let mut ports: Vec<(usize, usize)> = Vec::new();
    let mut with_ports: Option<bool> = None;
    for (line_no, line) in lines {
        let fields: Vec<usize> = line
            .split_whitespace()
            .map(|t| {
                t.parse().map_err(|_| TopologyError::Parse {
                    line: line_no,
                    reason: format!("bad integer {t:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        let has_ports = match fields.len() {
            2 => false,
            4 => true,
            k => {
                return Err(TopologyError::Parse {
                    line: line_no,
                    reason: format!("expected 2 or 4 fields, got {k}"),
                })
            }
        };
        if *with_ports.get_or_insert(has_ports) != has_ports {
            return Err(TopologyError::Parse {
                line: line_no,
                reason: "mixed edges with and without ports".into(),
            });
        }
        let (mut u, mut v) = (fields[0], fields[1]);
        let (mut pu, mut pv) = if has_ports { (fields[2], fields[3]) } else { (0, 0) };
        if !directed && u > v {
            std::mem::swap(&mut u, &mut v);
            std::mem::swap(&mut pu, &mut pv);
        }
        edges.push((u, v));
        ports.push((pu, pv));
    }
    // Sort edges and ports together so ports_from_map sees matching order.
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_unstable_by_key(|&i| edges[i]);
    let edges: Vec<_> = order.iter().map(|&i| edges[i]).collect();
    let ports: Vec<_> = order.iter().map(|&i| ports[i]).collect();
    let topo = Topology::new(n, edges, directed)?;
    let numbering = if with_ports.unwrap_or(false) {
        Some(ports_from_map(&topo, &ports)?)
    } else {
        None
    };
    Ok((topo, numbering))
}

/// Renders a topology (and optionally its port numbering) in the edge-list
/// text format; `parse_edge_list` round-trips it.
pub fn format_edge_list(topo: &Topology, ports: Option<&PortNumbering>) -> String {
    use fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "{}{}", topo.n, if topo.directed { " directed" } else { "" });
    for &(u, v) in &topo.edges {
        match ports {
            None => {
                let _ = writeln!(s, "{u} {v}");
            }
            Some(pn) => {
                // Recover this edge's port at each endpoint.
                let pu = (0..pn.out_degree(u))
                    .find(|&p| {
                        let l = pn.out_link(u, p);
                        l.peer == v && pn.in_link(v, l.peer_port).peer == u
                    })
                    .expect("edge must appear in port numbering");
                let pv = pn.out_link(u, pu).peer_port;
                let _ = writeln!(s, "{u} {v} {pu} {pv}");
            }
        }
    }
    s
}
