use std::collections::BTreeMap;

use crate::error::{param, Result};
use crate::netmodel::{assign_ranks, sample_candidates, Charge, Graph, NodeState, RandomSource, Status};
use crate::qprims::{grover_search, GroverSchedule};

use super::{no_candidates, LEOutcome, Meter, NodeSetOracle, TraceEvent, Tuning};

/// Checking for f_v: send r_v to w, read back one bit.
const CHECK: Charge = Charge::new(2, 2);

/// Leader election on the complete network. Candidates hand their rank to
/// their first `k` ports, then Grover-search the whole network for a node
/// that saw a higher rank.
pub fn quantum_le_complete(graph: &Graph, k: usize, tuning: &Tuning, rng: &mut RandomSource) -> Result<LEOutcome> {
    let n = graph.node_count();
    if !graph.is_complete() {
        return param("quantum_le_complete needs a complete graph");
    }
    if k == 0 || k > n - 1 {
        return param(format!("k must lie in [1, {}], got {k}", n - 1));
    }
    let eps = k as f64 / n as f64;
    let alpha = 1.0 / (n as f64 * n as f64);
    let budget = GroverSchedule::new(eps, alpha, &tuning.search)?.cost(CHECK).rounds;

    let mut meter = Meter::default();
    let candidates = sample_candidates(graph, rng);
    meter.rounds(1);
    if candidates.is_empty() {
        meter.rounds(budget);
        return Ok(no_candidates(graph, meter));
    }
    let ranks = assign_ranks(&candidates, n, rng)?;

    // Highest rank each referee received.
    let mut received: BTreeMap<usize, u64> = BTreeMap::new();
    for &v in &candidates {
        for port in 0..k {
            let w = graph.neighbor(v, port);
            let r = received.entry(w).or_insert(0);
            *r = (*r).max(ranks[&v]);
        }
    }
    meter.classical((k * candidates.len()) as u64);

    let mut states = vec![NodeState::default(); n];
    for &v in &candidates {
        let rv = ranks[&v];
        states[v].make_candidate(rv);
        let marked = received.iter().filter(|(_, &r)| r > rv).map(|(&w, _)| w).collect();
        let oracle = NodeSetOracle::new(n, marked, CHECK);
        let out = grover_search(&oracle, eps, alpha, &tuning.search, rng.node(v))?;
        meter.quantum(out.charge, TraceEvent::Grover { eps, alpha, check: CHECK });
        let status = if out.found.is_some() { Status::NonElected } else { Status::Elected };
        states[v].decide(status)?;
    }
    meter.rounds(budget);
    for s in states.iter_mut().filter(|s| !s.is_candidate()) {
        s.decide(Status::NonElected)?;
    }
    Ok(LEOutcome::finish(states, meter, candidates, ranks))
}
