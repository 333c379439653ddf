use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::error::{param, Result};
use crate::graphs::{lazy_walk_endpoint, stationary, walk_distribution};
use crate::netmodel::{assign_ranks, sample_candidates, Charge, Graph, NodeState, RandomSource, Status};
use crate::qprims::{grover_search, GroverSchedule, Oracle};

use super::{no_candidates, LEOutcome, Meter, TraceEvent, Tuning};

/// How the marked mass of walk strings is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EndpointMass {
    /// Exact endpoint law of the lazy walk, by matrix powering.
    Exact,
    /// Stationary law π; accurate to the mixing tolerance once τ is long enough.
    Stationary,
    /// Stationary on regular graphs, exact otherwise.
    Auto,
}

/// Walk strings grouped by endpoint: a string is marked when its endpoint
/// is, and the mass of an endpoint is the probability of reaching it.
struct EndpointOracle {
    endpoints: Vec<usize>,
    mass: Vec<f64>,
    check: Charge,
}

impl Oracle for EndpointOracle {
    type Item = usize;

    fn marked_fraction(&self) -> f64 {
        self.mass.iter().sum::<f64>().min(1.0)
    }

    fn sample_marked<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let idx = WeightedIndex::new(&self.mass).ok()?;
        Some(self.endpoints[idx.sample(rng)])
    }

    fn is_marked(&self, x: &usize) -> bool {
        self.endpoints.contains(x)
    }

    fn checking(&self) -> Charge {
        self.check
    }
}

/// Leader election on a graph with mixing time `tau`. Referees are reached
/// through `k` lazy random walks of length `walk_factor·τ` per candidate;
/// the quantum phase searches over walk strings whose endpoint saw a higher
/// rank, with the initiator driving every step of the checked walk.
pub fn quantum_rw_le(graph: &Graph, tau: usize, k: usize, tuning: &Tuning, rng: &mut RandomSource) -> Result<LEOutcome> {
    let n = graph.node_count();
    if tau == 0 {
        return param("mixing time τ must be at least 1");
    }
    if k == 0 || k > n {
        return param(format!("k must lie in [1, {n}], got {k}"));
    }
    let len = tuning.walk_factor * tau;
    let check = Charge::new(2 * len as u64, 2 * len as u64);
    let eps = k as f64 / n as f64;
    let alpha = 1.0 / (n as f64 * n as f64);
    let budget = GroverSchedule::new(eps, alpha, &tuning.search)?.cost(check).rounds;

    let mut meter = Meter::default();
    let candidates = sample_candidates(graph, rng);
    meter.rounds(len as u64);
    if candidates.is_empty() {
        meter.rounds(budget);
        return Ok(no_candidates(graph, meter));
    }
    let ranks = assign_ranks(&candidates, n, rng)?;

    let mut received: BTreeMap<usize, u64> = BTreeMap::new();
    for &v in &candidates {
        for _ in 0..k {
            let w = lazy_walk_endpoint(graph, v, len, rng.node(v));
            let r = received.entry(w).or_insert(0);
            *r = (*r).max(ranks[&v]);
        }
    }
    meter.classical((candidates.len() * k * len) as u64);

    let exact = match tuning.endpoint {
        EndpointMass::Exact => true,
        EndpointMass::Stationary => false,
        EndpointMass::Auto => !graph.is_regular(),
    };
    let pi = if exact { Vec::new() } else { stationary(graph) };

    let mut states = vec![NodeState::default(); n];
    for &v in &candidates {
        let rv = ranks[&v];
        states[v].make_candidate(rv);
        let endpoints: Vec<usize> = received.iter().filter(|(_, &r)| r > rv).map(|(&w, _)| w).collect();
        let law = if exact && !endpoints.is_empty() { walk_distribution(graph, v, len) } else { Vec::new() };
        let mass = endpoints.iter().map(|&w| if exact { law[w] } else { pi[w] }).collect();
        let oracle = EndpointOracle { endpoints, mass, check };
        let out = grover_search(&oracle, eps, alpha, &tuning.search, rng.node(v))?;
        meter.quantum(out.charge, TraceEvent::Grover { eps, alpha, check });
        let status = if out.found.is_some() { Status::NonElected } else { Status::Elected };
        states[v].decide(status)?;
    }
    meter.rounds(budget);
    for s in states.iter_mut().filter(|s| !s.is_candidate()) {
        s.decide(Status::NonElected)?;
    }
    Ok(LEOutcome::finish(states, meter, candidates, ranks))
}
