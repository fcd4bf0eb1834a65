//! Experiment driver: argument parsing, batch execution, JSON reports.
//!
//! One invocation runs a protocol over a topology for a half-open range of
//! seeds and emits a single machine-readable report. Everything downstream
//! of the arguments is deterministic: the experiment seed is stretched into
//! independent sub-seeds for topology sampling, port numbering, and the
//! run's measurement randomness, so rerunning the same configuration
//! reproduces the report byte for byte.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::leader::{algorithm1, algorithm2, algorithm2_generalized, GenOutcome, Outcome};
use crate::runtime::{self, RunConfig, RunOutcome, RunStats, TraceEvent};
use crate::topology::{
    self, PortNumbering, Topology, TopologyKind, DEFAULT_MAX_QUANTUM_PARTIES,
};
use crate::util::mix_seed;
use crate::Error;

/// Distinct salts so the per-purpose random streams never collide.
const TOPOLOGY_SALT: u64 = 0x544f_504f;
const PORT_SALT: u64 = 0x504f_5254;
const RUN_SALT: u64 = 0x0052_554e;

/// Most cells anyone can ask for in one invocation; keeps a typo in the
/// seed range from looking like a hang.
const MAX_CELLS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolArg {
    /// Exact-count election on undirected networks.
    Alg1,
    /// The same protocol driven by `--upper-bound` instead of the count.
    Alg1Upper,
    /// Logarithmic-phase exact-count election on undirected networks.
    Alg2,
    /// The logarithmic-phase election on strongly-connected digraphs.
    Alg2Directed,
    /// Bounded-count election racing one lenient instance per assumed count.
    Alg2Generalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyArg {
    Ring,
    Complete,
    RandomRegular,
    DirectedCycle,
    RandomStrongDigraph,
    /// Edge-list file; see `--topology-file`.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    /// All assumed counts multiplexed over shared rounds.
    Parallel,
    /// Assumed counts tried one at a time, largest first.
    Sequential,
}

/// Half-open seed range `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once("..").ok_or("expected `start..end`")?;
        let start: u64 = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
        let end: u64 = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
        if end <= start {
            return Err(format!("empty seed range {start}..{end}"));
        }
        Ok(SeedRange { start, end })
    }
}

/// Simulate anonymous-network leader election and report the results.
#[derive(Debug, Clone, Parser)]
#[command(name = "anonle", version, about)]
pub struct Cli {
    /// Election protocol to run.
    #[arg(long, value_enum)]
    pub protocol: ProtocolArg,

    /// Network family.
    #[arg(long, value_enum)]
    pub topology: TopologyArg,

    /// Party count, for every family except `file`.
    #[arg(long)]
    pub n: Option<usize>,

    /// Node degree, for `random-regular`.
    #[arg(long)]
    pub degree: Option<usize>,

    /// Arc count, for `random-strong-digraph`.
    #[arg(long)]
    pub arcs: Option<usize>,

    /// Edge-list file, for `--topology file`.
    #[arg(long)]
    pub topology_file: Option<PathBuf>,

    /// Assumed party-count bound (`alg1-upper`, `alg2-generalized`).
    #[arg(long)]
    pub upper_bound: Option<usize>,

    /// Half-open seed range; each seed is one independent cell.
    #[arg(long, default_value = "0..1")]
    pub seeds: SeedRange,

    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Include per-party trace events in the report.
    #[arg(long)]
    pub trace: bool,

    /// Override the communication-round cap.
    #[arg(long)]
    pub round_cap: Option<u32>,

    /// Refuse to simulate more parties than this.
    #[arg(long, default_value_t = DEFAULT_MAX_QUANTUM_PARTIES)]
    pub max_n: usize,

    /// Instance scheduling for `alg2-generalized`.
    #[arg(long, value_enum, default_value_t = ModeArg::Parallel)]
    pub mode: ModeArg,
}

#[derive(Debug, Serialize)]
pub struct TopologyEcho {
    pub family: TopologyArg,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arcs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

/// One seed's worth of results.
#[derive(Debug, Serialize)]
pub struct CellReport {
    pub seed: u64,
    pub ok: bool,
    /// Engine-level failure, if the run aborted outright.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Index of the unique leader, when there is exactly one.
    pub leader: Option<usize>,
    pub outcomes: Vec<Outcome>,
    /// Per-party agreed assumed count (`alg2-generalized` only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winners: Option<Vec<Option<usize>>>,
    /// Full per-instance results (`alg2-generalized` only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generalized: Option<Vec<GenOutcome>>,
    pub violations: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<RunStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEvent>>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub cells: usize,
    pub ok_cells: usize,
    pub success_rate: f64,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub protocol: ProtocolArg,
    pub topology: TopologyEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<usize>,
    pub mode: ModeArg,
    pub seed_start: u64,
    pub seed_end: u64,
    pub round_cap: Option<u32>,
    pub cells: Vec<CellReport>,
    pub summary: Summary,
}

impl Report {
    /// The exit-code policy: success means every cell finished with a
    /// unique leader and no violations.
    pub fn all_ok(&self) -> bool {
        self.summary.cells > 0 && self.summary.ok_cells == self.summary.cells
    }
}

/// Everything `execute` resolved up front, shared by all cells.
struct Plan {
    kind: Option<TopologyKind>,
    fixed: Option<(Topology, Option<PortNumbering>)>,
    bound: Option<usize>,
    sequential: bool,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn resolve(cli: &Cli) -> crate::Result<Plan> {
    let need_n = || cli.n.ok_or_else(|| config_err("this topology family requires --n"));
    let (kind, fixed) = match cli.topology {
        TopologyArg::Ring => (Some(TopologyKind::Ring { n: need_n()? }), None),
        TopologyArg::Complete => (Some(TopologyKind::Complete { n: need_n()? }), None),
        TopologyArg::DirectedCycle => (Some(TopologyKind::DirectedCycle { n: need_n()? }), None),
        TopologyArg::RandomRegular => {
            let degree = cli
                .degree
                .ok_or_else(|| config_err("random-regular requires --degree"))?;
            (Some(TopologyKind::RandomRegular { n: need_n()?, degree }), None)
        }
        TopologyArg::RandomStrongDigraph => {
            let arcs = cli
                .arcs
                .ok_or_else(|| config_err("random-strong-digraph requires --arcs"))?;
            (Some(TopologyKind::RandomStrongDigraph { n: need_n()?, arcs }), None)
        }
        TopologyArg::File => {
            let path = cli
                .topology_file
                .as_ref()
                .ok_or_else(|| config_err("--topology file requires --topology-file"))?;
            let text = std::fs::read_to_string(path)?;
            let parsed = topology::parse_edge_list(&text)?;
            if let Some(n) = cli.n {
                if n != parsed.0.n {
                    return Err(config_err(format!(
                        "--n {n} contradicts the file's {} parties",
                        parsed.0.n
                    )));
                }
            }
            (None, Some(parsed))
        }
    };

    // Directionality compatibility is knowable before sampling: every
    // family has a fixed directedness.
    let directed = match (&kind, &fixed) {
        (Some(k), _) => matches!(
            k,
            TopologyKind::DirectedCycle { .. } | TopologyKind::RandomStrongDigraph { .. }
        ),
        (None, Some((t, _))) => t.directed,
        (None, None) => unreachable!("either a family or a file is resolved"),
    };
    match cli.protocol {
        ProtocolArg::Alg1 | ProtocolArg::Alg1Upper | ProtocolArg::Alg2 => {
            if directed {
                return Err(config_err("this protocol requires an undirected topology"));
            }
        }
        ProtocolArg::Alg2Directed => {
            if !directed {
                return Err(config_err("alg2-directed requires a directed topology"));
            }
        }
        ProtocolArg::Alg2Generalized => {}
    }

    let bound = match cli.protocol {
        ProtocolArg::Alg1Upper | ProtocolArg::Alg2Generalized => {
            let b = cli
                .upper_bound
                .ok_or_else(|| config_err("this protocol requires --upper-bound"))?;
            if b < 2 {
                return Err(config_err("--upper-bound must be at least 2"));
            }
            if cli.protocol == ProtocolArg::Alg2Generalized && b > 256 {
                return Err(config_err("--upper-bound above 256 is not supported"));
            }
            Some(b)
        }
        _ => {
            if cli.upper_bound.is_some() {
                return Err(config_err("--upper-bound only applies to alg1-upper and alg2-generalized"));
            }
            None
        }
    };

    if cli.seeds.end - cli.seeds.start > MAX_CELLS {
        return Err(config_err(format!("seed range wider than {MAX_CELLS} cells")));
    }
    if cli.mode == ModeArg::Sequential && cli.protocol != ProtocolArg::Alg2Generalized {
        return Err(config_err("--mode only applies to alg2-generalized"));
    }

    Ok(Plan {
        kind,
        fixed,
        bound,
        sequential: cli.mode == ModeArg::Sequential,
    })
}

fn default_round_cap(n: usize, bound: Option<usize>, sequential: bool) -> u32 {
    let m = n.max(bound.unwrap_or(0)) as u64;
    let mult = if sequential { bound.unwrap_or(1) as u64 } else { 1 };
    (10 * m * m * mult).min(u64::from(u32::MAX)) as u32
}

/// Per-party results of one cell, shaped independently of the protocol's
/// own result type.
struct CellBody {
    outcomes: Vec<Outcome>,
    winners: Option<Vec<Option<usize>>>,
    generalized: Option<Vec<GenOutcome>>,
    stats: RunStats,
    trace: Vec<TraceEvent>,
}

fn shape_plain(run: RunOutcome<Outcome>) -> CellBody {
    CellBody {
        outcomes: run.results,
        winners: None,
        generalized: None,
        stats: run.stats,
        trace: run.trace,
    }
}

fn shape_generalized(run: RunOutcome<GenOutcome>) -> CellBody {
    CellBody {
        outcomes: run.results.iter().map(|g| g.outcome).collect(),
        winners: Some(run.results.iter().map(|g| g.winner).collect()),
        generalized: Some(run.results),
        stats: run.stats,
        trace: run.trace,
    }
}

fn run_cell(
    cli: &Cli,
    plan: &Plan,
    ports: &PortNumbering,
    cfg: &RunConfig,
    n: usize,
) -> Result<CellBody, runtime::RunError> {
    match cli.protocol {
        ProtocolArg::Alg1 => {
            runtime::run(ports, cfg, |h| async move { algorithm1(&h, n).await }).map(shape_plain)
        }
        ProtocolArg::Alg1Upper => {
            let bound = plan.bound.expect("resolved earlier");
            runtime::run(ports, cfg, move |h| async move { algorithm1(&h, bound).await })
                .map(shape_plain)
        }
        ProtocolArg::Alg2 | ProtocolArg::Alg2Directed => {
            runtime::run(ports, cfg, |h| async move { algorithm2(&h, n).await }).map(shape_plain)
        }
        ProtocolArg::Alg2Generalized => {
            let bound = plan.bound.expect("resolved earlier");
            let sequential = plan.sequential;
            runtime::run(ports, cfg, move |h| async move {
                algorithm2_generalized(&h, bound, sequential).await
            })
            .map(shape_generalized)
        }
    }
}

fn check_cell(body: &CellBody) -> (Option<usize>, Vec<String>) {
    let mut violations = Vec::new();
    let leaders: Vec<usize> = body
        .outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| matches!(o, Outcome::Leader))
        .map(|(i, _)| i)
        .collect();
    let leader = if leaders.len() == 1 { Some(leaders[0]) } else { None };
    if leaders.len() != 1 {
        violations.push(format!("expected exactly one leader, found {}", leaders.len()));
    }
    for (i, o) in body.outcomes.iter().enumerate() {
        if let Outcome::Error(reason) = o {
            violations.push(format!("party {i} failed: {reason:?}"));
        }
    }
    if let Some(winners) = &body.winners {
        let first = winners.first().copied().flatten();
        if first.is_none() {
            violations.push("no assumed count survived at party 0".into());
        }
        if winners.iter().any(|w| *w != first) {
            violations.push("parties disagree on the winning assumed count".into());
        }
    }
    (leader, violations)
}

/// Runs the whole experiment described by `cli` and returns the report.
pub fn execute(cli: &Cli) -> crate::Result<Report> {
    let plan = resolve(cli)?;
    let mut cells = Vec::with_capacity((cli.seeds.end - cli.seeds.start) as usize);
    for seed in cli.seeds.start..cli.seeds.end {
        let (topo, explicit_ports) = match (&plan.kind, &plan.fixed) {
            (Some(kind), _) => (topology::generate(kind, mix_seed(seed, TOPOLOGY_SALT))?, None),
            (None, Some((t, p))) => (t.clone(), p.clone()),
            (None, None) => unreachable!("resolve produced a plan"),
        };
        if topo.n > cli.max_n {
            return Err(config_err(format!(
                "{} parties exceeds --max-n {} (quantum state grows exponentially)",
                topo.n, cli.max_n
            )));
        }
        let ports = match explicit_ports {
            Some(p) => p,
            None => topology::assign_ports(&topo, mix_seed(seed, PORT_SALT)),
        };
        let cap = cli
            .round_cap
            .unwrap_or_else(|| default_round_cap(topo.n, plan.bound, plan.sequential));
        let cfg = RunConfig {
            seed: mix_seed(seed, RUN_SALT),
            round_cap: Some(cap),
            schedule: None,
            rng_tags: None,
        };
        let cell = match run_cell(cli, &plan, &ports, &cfg, topo.n) {
            Ok(body) => {
                let (leader, violations) = check_cell(&body);
                CellReport {
                    seed,
                    ok: violations.is_empty(),
                    error: None,
                    leader,
                    outcomes: body.outcomes,
                    winners: body.winners,
                    generalized: body.generalized,
                    violations,
                    stats: Some(body.stats),
                    trace: cli.trace.then_some(body.trace),
                }
            }
            Err(e) => CellReport {
                seed,
                ok: false,
                error: Some(e.to_string()),
                leader: None,
                outcomes: Vec::new(),
                winners: None,
                generalized: None,
                violations: vec!["run aborted".into()],
                stats: None,
                trace: None,
            },
        };
        cells.push(cell);
    }
    let ok_cells = cells.iter().filter(|c| c.ok).count();
    let summary = Summary {
        cells: cells.len(),
        ok_cells,
        success_rate: ok_cells as f64 / cells.len() as f64,
    };
    Ok(Report {
        protocol: cli.protocol,
        topology: TopologyEcho {
            family: cli.topology,
            n: cli.n,
            degree: cli.degree,
            arcs: cli.arcs,
            file: cli.topology_file.as_ref().map(|p| p.display().to_string()),
        },
        bound: plan.bound,
        mode: cli.mode,
        seed_start: cli.seeds.start,
        seed_end: cli.seeds.end,
        round_cap: cli.round_cap,
        cells,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("anonle").chain(args.iter().copied()))
            .expect("arguments parse")
    }

    #[test]
    fn seed_ranges_parse_and_reject_empties() {
        assert_eq!("3..7".parse::<SeedRange>().unwrap(), SeedRange { start: 3, end: 7 });
        assert!("7..3".parse::<SeedRange>().is_err());
        assert!("5".parse::<SeedRange>().is_err());
    }

    #[test]
    fn incompatible_configs_are_rejected() {
        let cli = parse(&["--protocol", "alg1", "--topology", "directed-cycle", "--n", "4"]);
        assert!(matches!(execute(&cli), Err(Error::Config(_))));

        let cli = parse(&["--protocol", "alg2-directed", "--topology", "ring", "--n", "4"]);
        assert!(matches!(execute(&cli), Err(Error::Config(_))));

        let cli = parse(&["--protocol", "alg1-upper", "--topology", "ring", "--n", "4"]);
        assert!(matches!(execute(&cli), Err(Error::Config(_))), "missing --upper-bound");

        let cli = parse(&["--protocol", "alg1", "--topology", "ring", "--n", "44"]);
        assert!(matches!(execute(&cli), Err(Error::Config(_))), "over --max-n");
    }

    #[test]
    fn ring_election_reports_one_leader_per_cell() {
        let cli = parse(&[
            "--protocol", "alg2", "--topology", "ring", "--n", "4", "--seeds", "0..3",
        ]);
        let report = execute(&cli).expect("runs");
        assert!(report.all_ok(), "violations: {:?}", report.cells[0].violations);
        assert_eq!(report.summary.cells, 3);
        for cell in &report.cells {
            assert!(cell.leader.is_some());
            let stats = cell.stats.as_ref().expect("stats present");
            assert_eq!(stats.per_round[0].qubits, 2 * 4 * 2, "ring-4 stage 1 moves 2|E|·s qubits");
            assert!(stats.per_round[1..].iter().all(|r| r.qubits == 0));
        }
    }

    #[test]
    fn reports_are_byte_deterministic() {
        let args = [
            "--protocol", "alg1", "--topology", "complete", "--n", "3", "--seeds", "5..7",
        ];
        let a = serde_json::to_vec(&execute(&parse(&args)).unwrap()).unwrap();
        let b = serde_json::to_vec(&execute(&parse(&args)).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
