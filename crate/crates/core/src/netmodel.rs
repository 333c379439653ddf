//! Network substrate: topology, per-node state, cost accounting and randomness.
//!
//! Node identifiers are simulator-internal `usize` values in `0..n`. Protocol
//! logic reaches other nodes only through ports (positions in a node's
//! neighbor list) and through ranks; ids show up in protocol code solely as
//! handles into simulator tables.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Mul};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Undirected connected graph with symmetric ports.
///
/// Complete graphs are stored implicitly so that protocols on the complete
/// network can run at `n` in the tens of thousands.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    m: usize,
    adj: Adjacency,
    bits: OnceLock<AdjacencyBits>,
}

#[derive(Debug, Clone)]
enum Adjacency {
    Complete,
    Lists(Vec<Vec<u32>>),
}

impl Graph {
    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!("complete graph needs n >= 2, got {n}")));
        }
        Ok(Self {
            n,
            m: n * (n - 1) / 2,
            adj: Adjacency::Complete,
            bits: OnceLock::new(),
        })
    }

    /// Builds a graph from an undirected edge list, rejecting self-loops,
    /// duplicate edges and disconnected topologies.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!("graph needs n >= 2, got {n}")));
        }
        if n > u32::MAX as usize {
            return Err(Error::Resource(format!("n = {n} exceeds u32 node ids")));
        }
        let mut lists = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Parameter(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            if u == v {
                return Err(Error::Parameter(format!("self-loop at node {u}")));
            }
            lists[u].push(v as u32);
            lists[v].push(u as u32);
        }
        for (u, list) in lists.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Parameter(format!("duplicate edge at node {u}")));
            }
        }
        let graph = Self {
            n,
            m: edges.len(),
            adj: Adjacency::Lists(lists),
            bits: OnceLock::new(),
        };
        if !graph.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(graph)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.m
    }

    pub fn is_complete(&self) -> bool {
        self.m == self.n * (self.n - 1) / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        match &self.adj {
            Adjacency::Complete => self.n - 1,
            Adjacency::Lists(l) => l[v].len(),
        }
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).min().unwrap_or(0)
    }

    pub fn is_regular(&self) -> bool {
        self.max_degree() == self.min_degree()
    }

    /// Neighbor reached through port `port` of `v`.
    pub fn neighbor(&self, v: usize, port: usize) -> usize {
        match &self.adj {
            Adjacency::Complete => {
                if port < v {
                    port
                } else {
                    port + 1
                }
            }
            Adjacency::Lists(l) => l[v][port] as usize,
        }
    }

    /// Neighbors of `v` in port order.
    pub fn neighbors(&self, v: usize) -> Neighbors<'_> {
        match &self.adj {
            Adjacency::Complete => Neighbors::Complete {
                skip: v,
                next: 0,
                n: self.n,
            },
            Adjacency::Lists(l) => Neighbors::List(l[v].iter()),
        }
    }

    pub fn is_adjacent(&self, u: usize, v: usize) -> bool {
        match &self.adj {
            Adjacency::Complete => u != v,
            Adjacency::Lists(l) => l[u].binary_search(&(v as u32)).is_ok(),
        }
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| self.neighbors(u).filter(move |&v| u < v).map(move |v| (u, v)))
    }

    /// Bitset adjacency matrix, built on first use.
    pub fn adjacency_bits(&self) -> &AdjacencyBits {
        self.bits.get_or_init(|| AdjacencyBits::new(self))
    }

    fn is_connected(&self) -> bool {
        self.bfs_distances(0).iter().all(|d| d.is_some())
    }

    /// Hop distances from `source`; `None` marks unreachable nodes.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for w in self.neighbors(u) {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Edge-list interchange text: header `n m`, then one `u v` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n, self.m);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing `n m` header".into(),
        })?;
        let (n, m) = parse_pair(line, header)?;
        let mut edges = Vec::with_capacity(m);
        for (line, l) in lines {
            edges.push(parse_pair(line, l)?);
        }
        if edges.len() != m {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        Self::from_edges(n, &edges)
    }
}

fn parse_pair(line: usize, text: &str) -> Result<(usize, usize)> {
    let bad = || Error::Parse {
        line,
        msg: format!("expected two non-negative integers, got `{text}`"),
    };
    let mut it = text.split_whitespace();
    let a = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    let b = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    if it.next().is_some() {
        return Err(bad());
    }
    Ok((a, b))
}

pub enum Neighbors<'a> {
    Complete { skip: usize, next: usize, n: usize },
    List(std::slice::Iter<'a, u32>),
}

impl Iterator for Neighbors<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self {
            Neighbors::Complete { skip, next, n } => {
                if *next == *skip {
                    *next += 1;
                }
                if *next >= *n {
                    return None;
                }
                let v = *next;
                *next += 1;
                Some(v)
            }
            Neighbors::List(it) => it.next().map(|&v| v as usize),
        }
    }
}

/// Row-major bitset adjacency matrix.
#[derive(Debug, Clone)]
pub struct AdjacencyBits {
    words: usize,
    data: Vec<u64>,
}

impl AdjacencyBits {
    fn new(graph: &Graph) -> Self {
        let n = graph.node_count();
        let words = n.div_ceil(64);
        let mut data = vec![0u64; n * words];
        for u in 0..n {
            let row = &mut data[u * words..(u + 1) * words];
            for v in graph.neighbors(u) {
                row[v / 64] |= 1 << (v % 64);
            }
        }
        Self { words, data }
    }

    pub fn words(&self) -> usize {
        self.words
    }

    pub fn row(&self, v: usize) -> &[u64] {
        &self.data[v * self.words..(v + 1) * self.words]
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.row(u)[v / 64] >> (v % 64) & 1 == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Undecided,
    NonElected,
    Elected,
}

/// Per-node protocol state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeState {
    status: Status,
    rank: Option<u64>,
    pub is_active: bool,
    pub agreement_input: Option<bool>,
    pub agreement_decision: Option<bool>,
}

impl Default for NodeState {
    fn default() -> Self {
        Self {
            status: Status::Undecided,
            rank: None,
            is_active: false,
            agreement_input: None,
            agreement_decision: None,
        }
    }
}

impl NodeState {
    pub fn status(&self) -> Status {
        self.status
    }

    pub fn rank(&self) -> Option<u64> {
        self.rank
    }

    pub fn is_candidate(&self) -> bool {
        self.rank.is_some()
    }

    pub fn make_candidate(&mut self, rank: u64) {
        self.rank = Some(rank);
    }

    /// Moves the status out of ⊥. A decided node cannot change its mind.
    pub fn decide(&mut self, status: Status) -> Result<()> {
        match (self.status, status) {
            (Status::Undecided, Status::NonElected | Status::Elected) => {
                self.status = status;
                Ok(())
            }
            (from, to) => Err(Error::Precondition(format!(
                "illegal status transition {from:?} -> {to:?}"
            ))),
        }
    }
}

/// Rounds and messages charged by one step or subroutine call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Charge {
    pub rounds: u64,
    pub messages: u64,
}

impl Charge {
    pub const fn new(rounds: u64, messages: u64) -> Self {
        Self { rounds, messages }
    }
}

impl Add for Charge {
    type Output = Charge;

    fn add(self, rhs: Charge) -> Charge {
        Charge::new(self.rounds + rhs.rounds, self.messages + rhs.messages)
    }
}

impl AddAssign for Charge {
    fn add_assign(&mut self, rhs: Charge) {
        *self = *self + rhs;
    }
}

impl Mul<u64> for Charge {
    type Output = Charge;

    fn mul(self, k: u64) -> Charge {
        Charge::new(self.rounds * k, self.messages * k)
    }
}

/// Per-run accumulator of elapsed rounds and charged messages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CostLedger {
    pub rounds: u64,
    pub classical_messages: u64,
    pub quantum_messages: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the given deltas. Counters never decrease, so a negative delta
    /// is a contract violation.
    pub fn record_cost(mut self, rounds: i64, classical: i64, quantum: i64) -> Result<Self> {
        for (name, d) in [("rounds", rounds), ("classical", classical), ("quantum", quantum)] {
            if d < 0 {
                return Err(Error::NegativeCharge(format!("{name} delta {d}")));
            }
        }
        self.rounds += rounds as u64;
        self.classical_messages += classical as u64;
        self.quantum_messages += quantum as u64;
        Ok(self)
    }

    pub fn add_rounds(&mut self, rounds: u64) {
        self.rounds += rounds;
    }

    pub fn add_classical(&mut self, messages: u64) {
        self.classical_messages += messages;
    }

    pub fn add_quantum(&mut self, messages: u64) {
        self.quantum_messages += messages;
    }

    pub fn total_messages(&self) -> u64 {
        self.classical_messages + self.quantum_messages
    }
}

/// Seeded randomness: one private stream per node plus a shared stream.
///
/// Every stream is a ChaCha8 stream of the same master key, so private
/// streams are independent by construction and a run is reproducible from
/// its seed alone.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    nodes: Vec<Option<ChaCha8Rng>>,
    shared: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64, n: usize) -> Self {
        let mut shared = ChaCha8Rng::seed_from_u64(seed);
        shared.set_stream(0);
        Self {
            seed,
            nodes: vec![None; n],
            shared,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Private stream of node `v`.
    pub fn node(&mut self, v: usize) -> &mut ChaCha8Rng {
        let seed = self.seed;
        self.nodes[v].get_or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(v as u64 + 1);
            rng
        })
    }

    /// Global coin shared by all nodes.
    pub fn shared(&mut self) -> &mut ChaCha8Rng {
        &mut self.shared
    }
}

/// Candidate inclusion probability `min(1, 12 ln n / n)`.
pub fn candidate_probability(n: usize) -> f64 {
    (12.0 * (n as f64).ln() / n as f64).min(1.0)
}

/// Each node independently becomes a candidate using its private coin.
pub fn sample_candidates(graph: &Graph, rng: &mut RandomSource) -> Vec<usize> {
    let p = candidate_probability(graph.node_count());
    (0..graph.node_count())
        .filter(|&v| rng.node(v).random_bool(p))
        .collect()
}

/// Size of the rank space, `n^4`, saturating at `u64::MAX`.
pub fn rank_space(n: usize) -> u64 {
    (n as u64).checked_pow(4).unwrap_or(u64::MAX)
}

/// Draws an independent uniform rank in `1..=n^4` for every candidate.
pub fn assign_ranks(candidates: &[usize], n: usize, rng: &mut RandomSource) -> Result<BTreeMap<usize, u64>> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let top = rank_space(n);
    Ok(candidates
        .iter()
        .map(|&v| (v, rng.node(v).random_range(1..=top)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(Graph::from_edges(3, &[(0, 0), (1, 2)]), Err(Error::Parameter(_))));
        assert!(matches!(
            Graph::from_edges(3, &[(0, 1), (1, 0), (1, 2)]),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(Graph::from_edges(4, &[(0, 1), (2, 3)]), Err(Error::Disconnected)));
        assert!(matches!(Graph::from_edges(3, &[(0, 5)]), Err(Error::Parameter(_))));
    }

    #[test]
    fn ports_are_symmetric() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]).unwrap();
        let degree_sum: usize = (0..5).map(|v| g.degree(v)).sum();
        assert_eq!(degree_sum, 2 * g.edge_count());
        for u in 0..5 {
            for v in g.neighbors(u) {
                assert!(g.neighbors(v).any(|w| w == u));
            }
        }
    }

    #[test]
    fn implicit_complete_graph() {
        let g = Graph::complete(5).unwrap();
        assert_eq!(g.edge_count(), 10);
        assert_eq!(g.neighbors(2).collect::<Vec<_>>(), vec![0, 1, 3, 4]);
        assert_eq!((0..4).map(|p| g.neighbor(2, p)).collect::<Vec<_>>(), vec![0, 1, 3, 4]);
        assert!(g.is_complete());
        assert!(!g.is_adjacent(3, 3));
        assert_eq!(g.edges().count(), 10);
        assert!(Graph::complete(1).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let g = path(4);
        let text = g.to_edge_list();
        assert_eq!(text, "4 3\n0 1\n1 2\n2 3\n");
        let h = Graph::from_edge_list(&text).unwrap();
        assert_eq!(h.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
    }

    #[test]
    fn edge_list_errors_carry_line_numbers() {
        match Graph::from_edge_list("3 2\n0 1\n1 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Graph::from_edge_list("3 3\n0 1\n1 2\n").is_err());
    }

    #[test]
    fn adjacency_bits_match_lists() {
        let g = path(70);
        let bits = g.adjacency_bits();
        for u in 0..70 {
            for v in 0..70 {
                assert_eq!(bits.contains(u, v), g.is_adjacent(u, v));
            }
        }
    }

    #[test]
    fn status_moves_only_out_of_bottom() {
        let mut s = NodeState::default();
        s.decide(Status::Elected).unwrap();
        assert!(s.decide(Status::NonElected).is_err());
        assert!(NodeState::default().decide(Status::Undecided).is_err());
    }

    #[test]
    fn ledger_charges() {
        let l = CostLedger::new().record_cost(2, 2, 0).unwrap();
        assert_eq!((l.rounds, l.classical_messages, l.quantum_messages), (2, 2, 0));
        let a = l.record_cost(1, 3, 5).unwrap().record_cost(4, 0, 1).unwrap();
        let b = l.record_cost(4, 0, 1).unwrap().record_cost(1, 3, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total_messages(), a.classical_messages + a.quantum_messages);
        assert!(matches!(l.record_cost(0, -1, 0), Err(Error::NegativeCharge(_))));
    }

    #[test]
    fn probability_is_clamped() {
        assert_eq!(candidate_probability(2), 1.0);
        // 12 ln n ≥ n up to n = 45.
        assert_eq!(candidate_probability(45), 1.0);
        assert!(candidate_probability(46) < 1.0);
        let g = Graph::complete(2).unwrap();
        let mut rng = RandomSource::new(9, 2);
        assert_eq!(sample_candidates(&g, &mut rng), vec![0, 1]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = Graph::complete(500).unwrap();
        let a = sample_candidates(&g, &mut RandomSource::new(77, 500));
        let b = sample_candidates(&g, &mut RandomSource::new(77, 500));
        assert_eq!(a, b);
        let c = sample_candidates(&g, &mut RandomSource::new(78, 500));
        assert_ne!(a, c);
    }

    #[test]
    fn ranks() {
        let mut rng = RandomSource::new(5, 10);
        assert!(matches!(assign_ranks(&[], 10, &mut rng), Err(Error::NoCandidates)));
        let r = assign_ranks(&[3], 10, &mut rng).unwrap();
        assert!((1..=10_000).contains(&r[&3]));
        let a = assign_ranks(&[1, 4], 10, &mut RandomSource::new(6, 10)).unwrap();
        let b = assign_ranks(&[1, 4], 10, &mut RandomSource::new(6, 10)).unwrap();
        assert_eq!(a, b);
        assert_eq!(rank_space(1 << 20), u64::MAX);
    }

    #[test]
    fn rank_collisions_stay_below_birthday_bound() {
        // Union bound over pairs: (n^2 / 2) * n^-4 = 5e-5 at n = 100.
        let n = 100;
        let g = Graph::complete(n).unwrap();
        let trials = 100_000u64;
        let mut collisions = 0u64;
        for seed in 0..trials {
            let mut rng = RandomSource::new(seed, n);
            let cands = sample_candidates(&g, &mut rng);
            if cands.is_empty() {
                continue;
            }
            let ranks = assign_ranks(&cands, n, &mut rng).unwrap();
            let mut values: Vec<_> = ranks.values().copied().collect();
            values.sort_unstable();
            if values.windows(2).any(|w| w[0] == w[1]) {
                collisions += 1;
            }
        }
        assert!((collisions as f64) / (trials as f64) <= 2e-3, "{collisions} collisions");
    }
}
