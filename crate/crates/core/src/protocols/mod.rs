//! Leader election and agreement protocols.
//!
//! Each protocol drives the synchronous round loop itself, counts classical
//! messages exactly and charges quantum subroutines through [`crate::qprims`].
//! Every charge is mirrored in a [`TraceEvent`] so ledgers can be recounted
//! independently.

mod agreement;
mod complete;
mod diameter2;
mod tree;
mod walk;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::netmodel::{Charge, CostLedger, Graph, NodeState, Status};
use crate::qprims::{SearchConstants, WalkCosts};

pub use agreement::{agreement_iterations, quantum_agreement, AgreementParams, MAX_EPS};
pub use complete::quantum_le_complete;
pub use diameter2::{quantum_qw_le, qw_challenge};
pub use tree::{maximal_matching_cv, quantum_general_le, Matching};
pub use walk::{quantum_rw_le, EndpointMass};


/// One charge recorded by a protocol run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TraceEvent {
    /// Classical messages sent in one step.
    Classical { messages: u64 },
    /// Rounds elapsed for one synchronized step.
    Rounds { rounds: u64 },
    Grover { eps: f64, alpha: f64, check: Charge },
    ApproxCount { c: f64, alpha: f64, check: Charge },
    WalkSearch { eps: f64, alpha: f64, costs: WalkCosts },
}

/// Ledger and trace kept in lockstep.
#[derive(Debug, Clone, Default)]
pub(crate) struct Meter {
    pub ledger: CostLedger,
    pub trace: Vec<TraceEvent>,
}

impl Meter {
    pub fn rounds(&mut self, rounds: u64) {
        self.ledger.add_rounds(rounds);
        self.trace.push(TraceEvent::Rounds { rounds });
    }

    pub fn classical(&mut self, messages: u64) {
        if messages > 0 {
            self.ledger.add_classical(messages);
            self.trace.push(TraceEvent::Classical { messages });
        }
    }

    pub fn quantum(&mut self, charge: Charge, event: TraceEvent) {
        self.ledger.add_quantum(charge.messages);
        self.trace.push(event);
    }
}

/// Tunable constants of the protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tuning {
    pub search: SearchConstants,
    /// Referee walks and checked walks have length `walk_factor · τ`.
    pub walk_factor: usize,
    pub endpoint: EndpointMass,
    /// Outer iterations of the diameter-2 protocol; default ⌈log₂³ n⌉.
    pub qw_iterations: Option<u64>,
    /// A candidate is active with probability 1/`qw_active_inverse`;
    /// default ⌈log₂² n⌉.
    pub qw_active_inverse: Option<u64>,
}

impl Default for Tuning {
    fn default() -> Self {
        Self {
            search: SearchConstants::default(),
            walk_factor: 2,
            endpoint: EndpointMass::Auto,
            qw_iterations: None,
            qw_active_inverse: None,
        }
    }
}

pub(crate) fn log2_ceil_pow(n: usize, power: i32) -> u64 {
    ((n as f64).log2().powi(power).ceil() as u64).max(1)
}

#[derive(Debug, Clone)]
pub struct LEOutcome {
    pub statuses: Vec<Status>,
    pub elected: Vec<usize>,
    pub ledger: CostLedger,
    pub valid: bool,
    pub candidates: Vec<usize>,
    pub ranks: BTreeMap<usize, u64>,
    pub trace: Vec<TraceEvent>,
    /// Cluster count at the start of each phase, then the final count
    /// (tree-merging protocol only).
    pub cluster_counts: Vec<usize>,
}

impl LEOutcome {
    pub(crate) fn finish(
        states: Vec<NodeState>,
        meter: Meter,
        candidates: Vec<usize>,
        ranks: BTreeMap<usize, u64>,
    ) -> Self {
        let statuses: Vec<Status> = states.iter().map(|s| s.status()).collect();
        let elected: Vec<usize> = (0..statuses.len()).filter(|&v| statuses[v] == Status::Elected).collect();
        let valid = elected.len() == 1 && statuses.iter().all(|&s| s != Status::Undecided);
        Self {
            statuses,
            elected,
            ledger: meter.ledger,
            valid,
            candidates,
            ranks,
            trace: meter.trace,
            cluster_counts: Vec::new(),
        }
    }

    /// Candidate holding the largest rank.
    pub fn top_candidate(&self) -> Option<usize> {
        self.ranks.iter().max_by_key(|(_, &r)| r).map(|(&v, _)| v)
    }
}

/// Outcome of a run where no candidate was sampled.
pub(crate) fn no_candidates(graph: &Graph, meter: Meter) -> LEOutcome {
    let n = graph.node_count();
    let mut states = vec![NodeState::default(); n];
    for s in &mut states {
        let _ = s.decide(Status::NonElected);
    }
    LEOutcome::finish(states, meter, Vec::new(), BTreeMap::new())
}

#[derive(Debug, Clone)]
pub struct AgreementOutcome {
    pub decisions: Vec<Option<bool>>,
    pub ledger: CostLedger,
    pub valid: bool,
    pub candidates: Vec<usize>,
    /// Every candidate's estimate of the fraction of ones lies within ε.
    pub estimates_accurate: bool,
    /// Per executed agreement iteration: whether some participating
    /// candidate was undecided.
    pub undecided_iterations: Vec<bool>,
    pub trace: Vec<TraceEvent>,
}

impl AgreementOutcome {
    /// All decisions agree, at least one node decided, and the common value
    /// is someone's input.
    pub fn check(decisions: &[Option<bool>], inputs: &[bool]) -> bool {
        let mut values = decisions.iter().flatten();
        match values.next() {
            None => false,
            Some(&first) => values.all(|&v| v == first) && inputs.contains(&first),
        }
    }
}

/// Nodes (or ports) marked inside a domain of `domain` elements.
#[derive(Debug, Clone)]
pub(crate) struct NodeSetOracle {
    domain: usize,
    marked: Vec<usize>,
    check: Charge,
}

impl NodeSetOracle {
    pub fn new(domain: usize, mut marked: Vec<usize>, check: Charge) -> Self {
        marked.sort_unstable();
        marked.dedup();
        debug_assert!(marked.len() <= domain);
        Self { domain, marked, check }
    }
}

impl crate::qprims::Oracle for NodeSetOracle {
    type Item = usize;

    fn marked_fraction(&self) -> f64 {
        self.marked.len() as f64 / self.domain as f64
    }

    fn sample_marked<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.marked.is_empty() {
            None
        } else {
            Some(self.marked[rng.random_range(0..self.marked.len())])
        }
    }

    fn is_marked(&self, x: &usize) -> bool {
        self.marked.binary_search(x).is_ok()
    }

    fn checking(&self) -> Charge {
        self.check
    }
}

/// Rebuilds a ledger from a trace: rounds and classical messages are summed,
/// quantum charges are recomputed from the closed-form cost of each call.
pub fn recount(trace: &[TraceEvent], consts: &SearchConstants) -> crate::Result<CostLedger> {
    use crate::qprims::{counting_resolution, GroverSchedule};
    let mut ledger = CostLedger::default();
    for event in trace {
        match *event {
            TraceEvent::Classical { messages } => ledger.add_classical(messages),
            TraceEvent::Rounds { rounds } => ledger.add_rounds(rounds),
            TraceEvent::Grover { eps, alpha, check } => {
                ledger.add_quantum(GroverSchedule::new(eps, alpha, consts)?.cost(check).messages)
            }
            TraceEvent::ApproxCount { c, alpha, check } => {
                let calls = consts.attempts(alpha) * counting_resolution(c) as u64 * 2;
                ledger.add_quantum((check * calls).messages)
            }
            TraceEvent::WalkSearch { eps, alpha, costs } => ledger.add_quantum(costs.cost(eps, alpha, consts)?.messages),
        }
    }
    Ok(ledger)
}
