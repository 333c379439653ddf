use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{param, Result};
use crate::netmodel::{sample_candidates, Charge, Graph, RandomSource};
use crate::qprims::{approx_count, grover_search, GroverSchedule, OracleSpec};

use super::{AgreementOutcome, Meter, NodeSetOracle, TraceEvent, Tuning};

/// Checking for g and h: ask w for its input bit (or whether it holds a value).
const CHECK: Charge = Charge::new(2, 2);

/// Largest accepted ε. The (4ε)^ℓ ≤ 5^{−ℓ} bound behind the iteration count
/// needs ε ≤ 1/20; larger values run but lose that guarantee.
pub const MAX_EPS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgreementParams {
    pub eps: f64,
    pub gamma: f64,
}

impl AgreementParams {
    /// ε = n^{−1/5}, γ = 2/15.
    pub fn for_size(n: usize) -> Self {
        Self {
            eps: (n as f64).powf(-0.2),
            gamma: 2.0 / 15.0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let lo = 1.0 / n as f64;
        if !(self.eps >= lo && self.eps < MAX_EPS) {
            return param(format!("ε must lie in [1/n, {MAX_EPS}), got {}", self.eps));
        }
        if !(0.0..=1.0 / 3.0).contains(&self.gamma) {
            return param(format!("γ must lie in [0, 1/3], got {}", self.gamma));
        }
        Ok(())
    }

    /// Referees contacted by each decided node: ⌈n^{1/3−γ}⌉.
    pub fn fanout(&self, n: usize) -> usize {
        ((n as f64).powf(1.0 / 3.0 - self.gamma).ceil() as usize).clamp(1, n - 1)
    }

    /// Marked fraction the undecided nodes search for: n^{−2/3−γ}.
    pub fn search_eps(&self, n: usize) -> f64 {
        (n as f64).powf(-2.0 / 3.0 - self.gamma)
    }
}

/// ℓ = ⌈log₅(4n)⌉ + 1.
pub fn agreement_iterations(n: usize) -> usize {
    ((4.0 * n as f64).ln() / 5f64.ln()).ceil() as usize + 1
}

/// Implicit agreement on the complete network. Candidates estimate the
/// fraction of ones by approximate counting, then compare it against a
/// shared threshold; nodes too close to the threshold look for a decided
/// node's referee instead.
pub fn quantum_agreement(
    graph: &Graph,
    inputs: &[bool],
    params: &AgreementParams,
    tuning: &Tuning,
    rng: &mut RandomSource,
) -> Result<AgreementOutcome> {
    let n = graph.node_count();
    if !graph.is_complete() {
        return param("quantum_agreement needs a complete graph");
    }
    if inputs.len() != n {
        return param(format!("expected {n} inputs, got {}", inputs.len()));
    }
    params.validate(n)?;
    let eps = params.eps;
    let count_alpha = 1.0 / (2.0 * (n * n) as f64);
    let search_alpha = 1.0 / (4.0 * (n as f64).powi(3));
    let search_eps = params.search_eps(n);
    let fanout = params.fanout(n);
    let iterations = agreement_iterations(n);
    let search_rounds = GroverSchedule::new(search_eps, search_alpha, &tuning.search)?.cost(CHECK).rounds;

    let mut meter = Meter::default();
    let candidates = sample_candidates(graph, rng);
    let ones: Vec<u64> = (0..n as u64).filter(|&w| inputs[w as usize]).collect();
    let truth = ones.len() as f64 / n as f64;
    let counting = OracleSpec::new(n as u64, ones, CHECK)?;

    let mut decisions: Vec<Option<bool>> = vec![None; n];
    if candidates.is_empty() {
        return Ok(AgreementOutcome {
            decisions,
            ledger: meter.ledger,
            valid: false,
            candidates,
            estimates_accurate: true,
            undecided_iterations: Vec::new(),
            trace: meter.trace,
        });
    }

    let mut estimate = BTreeMap::new();
    let mut count_rounds = 0;
    for &v in &candidates {
        let out = approx_count(&counting, eps, count_alpha, &tuning.search, rng.node(v))?;
        meter.quantum(out.charge, TraceEvent::ApproxCount { c: eps, alpha: count_alpha, check: CHECK });
        count_rounds = out.charge.rounds;
        estimate.insert(v, out.estimate as f64 / n as f64);
    }
    meter.rounds(count_rounds);
    let estimates_accurate = estimate.values().all(|q| (q - truth).abs() <= eps);

    let mut active: Vec<usize> = candidates.clone();
    let mut undecided_iterations = Vec::new();
    for _ in 0..iterations {
        let r: f64 = rng.shared().random();
        if active.is_empty() {
            meter.rounds(1 + search_rounds);
            continue;
        }
        let (close, decided): (Vec<usize>, Vec<usize>) = active.iter().partition(|&&v| (estimate[&v] - r).abs() <= eps);
        undecided_iterations.push(!close.is_empty());

        // Referee w keeps the first value it hears.
        let mut held: BTreeMap<usize, bool> = BTreeMap::new();
        for &v in &decided {
            let value = estimate[&v] > r;
            decisions[v] = Some(value);
            for port in 0..fanout {
                held.entry(graph.neighbor(v, port)).or_insert(value);
            }
        }
        meter.classical((decided.len() * fanout) as u64);
        meter.rounds(1);

        let marked: Vec<usize> = held.keys().copied().collect();
        let oracle = NodeSetOracle::new(n, marked, CHECK);
        let mut still = Vec::new();
        for &v in &close {
            let out = grover_search(&oracle, search_eps, search_alpha, &tuning.search, rng.node(v))?;
            meter.quantum(out.charge, TraceEvent::Grover { eps: search_eps, alpha: search_alpha, check: CHECK });
            match out.found {
                Some(w) => decisions[v] = Some(held[&w]),
                None => still.push(v),
            }
        }
        meter.rounds(search_rounds);
        active = still;
    }

    let valid = AgreementOutcome::check(&decisions, inputs);
    Ok(AgreementOutcome {
        decisions,
        ledger: meter.ledger,
        valid,
        candidates,
        estimates_accurate,
        undecided_iterations,
        trace: meter.trace,
    })
}
