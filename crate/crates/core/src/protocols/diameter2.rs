use std::collections::{BTreeMap, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;

use crate::error::{param, Result};
use crate::graphs::check_diameter2;
use crate::netmodel::{assign_ranks, sample_candidates, Charge, Graph, NodeState, RandomSource, Status};
use crate::qprims::{grover_search, johnson_gap, walk_search, GroverSchedule, Oracle, SearchConstants, WalkCosts};

use super::{log2_ceil_pow, no_candidates, LEOutcome, Meter, NodeSetOracle, TraceEvent, Tuning};

const CHECK: Charge = Charge::new(2, 2);
const SETUP_ROUNDS: u64 = 1;
const UPDATE: Charge = Charge::new(2, 2);

/// k-subsets W of an active candidate's neighborhood; W is marked when it
/// contains a node in `hits`. Under the uniform stationary law the marked
/// mass is 1 − C(d − s, k)/C(d, k).
struct SubsetOracle {
    neighbors: Vec<usize>,
    hits: Vec<usize>,
    k: usize,
}

impl SubsetOracle {
    fn fraction(&self) -> f64 {
        let d = self.neighbors.len();
        let s = self.hits.len();
        if d - s < self.k {
            return 1.0;
        }
        1.0 - (0..self.k).map(|i| (d - s - i) as f64 / (d - i) as f64).product::<f64>()
    }
}

impl Oracle for SubsetOracle {
    type Item = Vec<usize>;

    fn marked_fraction(&self) -> f64 {
        self.fraction()
    }

    /// Uniform k-subset conditioned on hitting: draw the hit count j ≥ 1
    /// from the truncated hypergeometric law, then the two parts uniformly.
    fn sample_marked<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<usize>> {
        let (d, s, k) = (self.neighbors.len(), self.hits.len(), self.k);
        if s == 0 {
            return None;
        }
        let lo = 1.max(k.saturating_sub(d - s));
        let hi = s.min(k);
        // log C(s, j) C(d − s, k − j), up to a constant.
        let mut logw = vec![0.0f64; hi - lo + 1];
        for j in lo..hi {
            let step = ((s - j) as f64 * (k - j) as f64).ln() - ((j + 1) as f64 * (d - s + j + 1 - k) as f64).ln();
            logw[j + 1 - lo] = logw[j - lo] + step;
        }
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
        let j = lo + WeightedIndex::new(&weights).ok()?.sample(rng);
        let others: Vec<usize> = self
            .neighbors
            .iter()
            .copied()
            .filter(|w| self.hits.binary_search(w).is_err())
            .collect();
        let mut subset: Vec<usize> = index::sample(rng, s, j).into_iter().map(|i| self.hits[i]).collect();
        subset.extend(index::sample(rng, others.len(), k - j).into_iter().map(|i| others[i]));
        subset.sort_unstable();
        Some(subset)
    }

    fn is_marked(&self, subset: &Vec<usize>) -> bool {
        subset.iter().any(|w| self.hits.binary_search(w).is_ok())
    }

    fn checking(&self) -> Charge {
        CHECK
    }
}

struct Context<'a> {
    graph: &'a Graph,
    k: usize,
    consts: SearchConstants,
    alpha_walk: f64,
    alpha_inner: f64,
    /// Grover(1/domain, α_inner) cost and worst-case failure, by domain size.
    inner: HashMap<usize, (Charge, f64)>,
}

impl<'a> Context<'a> {
    fn new(graph: &'a Graph, k: usize, tuning: &Tuning) -> Result<Self> {
        if !check_diameter2(graph) {
            return param("quantum_qw_le needs a graph of diameter at most 2");
        }
        if k == 0 || k > graph.min_degree() {
            return param(format!("k must lie in [1, {}], got {k}", graph.min_degree()));
        }
        let n = graph.node_count() as f64;
        Ok(Self {
            graph,
            k,
            consts: tuning.search,
            alpha_walk: 1.0 / (n * n),
            alpha_inner: 1.0 / (n * n * n),
            inner: HashMap::new(),
        })
    }

    fn inner(&mut self, domain: usize) -> Result<(Charge, f64)> {
        if let Some(&hit) = self.inner.get(&domain) {
            return Ok(hit);
        }
        let eps = 1.0 / domain as f64;
        let s = GroverSchedule::new(eps, self.alpha_inner, &self.consts)?;
        let entry = (s.cost(CHECK), s.worst_case_failure(domain as u64, eps));
        self.inner.insert(domain, entry);
        Ok(entry)
    }

    fn gap(&self, d: usize) -> Result<f64> {
        if self.k < d {
            johnson_gap(d as u64, self.k as u64)
        } else {
            Ok(1.0)
        }
    }

    /// Rounds of one Checking: passive searches in parallel, one forward,
    /// then the active search over W.
    fn checking_rounds(&mut self) -> Result<u64> {
        let passive = self.inner(self.graph.max_degree())?.0.rounds;
        Ok(passive + 1 + self.inner(self.k)?.0.rounds)
    }

    /// Worst-case rounds of one outer iteration, taken at the maximum degree.
    fn iteration_rounds(&mut self) -> Result<u64> {
        let d = self.graph.max_degree();
        let checking = Charge::new(self.checking_rounds()?, 0);
        let costs = WalkCosts {
            setup: Charge::new(SETUP_ROUNDS, self.k as u64),
            update: UPDATE,
            checking,
            delta: self.gap(d)?,
            checking_error: 0.0,
        };
        Ok(costs.cost(self.k as f64 / d as f64, self.alpha_walk, &self.consts)?.rounds + checking.rounds)
    }

    /// Runs the walk searches of `active` against `passive` and the final
    /// Decision step. Returns the active candidates that found a higher rank.
    fn challenge(
        &mut self,
        active: &[usize],
        passive: &[usize],
        ranks: &BTreeMap<usize, u64>,
        meter: &mut Meter,
        rng: &mut RandomSource,
    ) -> Result<Vec<usize>> {
        let graph = self.graph;
        let k = self.k;
        let bits = graph.adjacency_bits();

        let mut passive_msgs = 0;
        let mut error = 0.0;
        for &p in passive {
            let (c, e) = self.inner(graph.degree(p))?;
            passive_msgs += c.messages + 1;
            error += e;
        }
        let (active_cost, active_err) = self.inner(k)?;
        let checking = Charge::new(self.checking_rounds()?, passive_msgs + active_cost.messages);
        let checking_error = (error + active_err).min(1.0 - f64::EPSILON);

        let mut subsets = Vec::with_capacity(active.len());
        for &v in active {
            let rv = ranks[&v];
            let mut reach = vec![0u64; bits.words()];
            for &p in passive.iter().filter(|p| ranks[p] > rv) {
                for (r, b) in reach.iter_mut().zip(bits.row(p)) {
                    *r |= b;
                }
                reach[p / 64] |= 1 << (p % 64);
            }
            let neighbors: Vec<usize> = graph.neighbors(v).collect();
            let hits = neighbors.iter().copied().filter(|&w| reach[w / 64] >> (w % 64) & 1 == 1).collect();
            let oracle = SubsetOracle { neighbors, hits, k };
            let d = graph.degree(v);
            let costs = WalkCosts {
                setup: Charge::new(SETUP_ROUNDS, k as u64),
                update: UPDATE,
                checking,
                delta: self.gap(d)?,
                checking_error,
            };
            let eps = k as f64 / d as f64;
            let out = walk_search(&costs, &oracle, eps, self.alpha_walk, &self.consts, rng.node(v))?;
            meter.quantum(
                out.charge,
                TraceEvent::WalkSearch {
                    eps,
                    alpha: self.alpha_walk,
                    costs,
                },
            );
            let subset = match out.found {
                Some(w) => w,
                None => {
                    let mut w: Vec<usize> = index::sample(rng.node(v), d, k)
                        .into_iter()
                        .map(|i| oracle.neighbors[i])
                        .collect();
                    w.sort_unstable();
                    w
                }
            };
            subsets.push((v, subset));
        }

        // Decision, decentralized step: each passive candidate looks for a
        // neighbor holding a lower rank and forwards its own rank there.
        let mut lowest_held: BTreeMap<usize, u64> = BTreeMap::new();
        for (v, subset) in &subsets {
            for &w in subset {
                let r = lowest_held.entry(w).or_insert(u64::MAX);
                *r = (*r).min(ranks[v]);
            }
        }
        let mut forwarded: HashMap<usize, u64> = HashMap::new();
        for &p in passive {
            let rp = ranks[&p];
            let marked = lowest_held
                .iter()
                .filter(|(&w, &r)| r < rp && bits.contains(p, w))
                .map(|(&w, _)| w)
                .collect();
            let d = graph.degree(p);
            let eps = 1.0 / d as f64;
            let out = grover_search(&NodeSetOracle::new(d, marked, CHECK), eps, self.alpha_inner, &self.consts, rng.node(p))?;
            meter.quantum(
                out.charge,
                TraceEvent::Grover {
                    eps,
                    alpha: self.alpha_inner,
                    check: CHECK,
                },
            );
            if let Some(w) = out.found {
                let r = forwarded.entry(w).or_insert(0);
                *r = (*r).max(rp);
                meter.classical(1);
            }
        }

        // Centralized step: each active candidate searches its W for a
        // referee that now holds a higher rank.
        let mut eliminated = Vec::new();
        for (v, subset) in &subsets {
            let rv = ranks[v];
            let marked = subset
                .iter()
                .copied()
                .filter(|w| {
                    forwarded.get(w).is_some_and(|&r| r > rv)
                        || (passive.contains(w) && ranks[w] > rv)
                })
                .collect();
            let eps = 1.0 / k as f64;
            let out = grover_search(&NodeSetOracle::new(k, marked, CHECK), eps, self.alpha_inner, &self.consts, rng.node(*v))?;
            meter.quantum(
                out.charge,
                TraceEvent::Grover {
                    eps,
                    alpha: self.alpha_inner,
                    check: CHECK,
                },
            );
            if out.found.is_some() {
                eliminated.push(*v);
            }
        }
        Ok(eliminated)
    }
}

/// Leader election on diameter-2 graphs. Over ⌈log₂³ n⌉ iterations, random
/// active candidates challenge the passive ones with a quantum walk over
/// k-subsets of their neighborhood; candidates that are never beaten end
/// up Elected.
pub fn quantum_qw_le(graph: &Graph, k: usize, tuning: &Tuning, rng: &mut RandomSource) -> Result<LEOutcome> {
    let n = graph.node_count();
    let mut ctx = Context::new(graph, k, tuning)?;
    let iterations = tuning.qw_iterations.unwrap_or_else(|| log2_ceil_pow(n, 3));
    let inverse = tuning.qw_active_inverse.unwrap_or_else(|| log2_ceil_pow(n, 2));
    let budget = ctx.iteration_rounds()?;

    let mut meter = Meter::default();
    let candidates = sample_candidates(graph, rng);
    if candidates.is_empty() {
        for _ in 0..iterations {
            meter.rounds(budget);
        }
        return Ok(no_candidates(graph, meter));
    }
    let ranks = assign_ranks(&candidates, n, rng)?;
    let mut states = vec![NodeState::default(); n];
    for &v in &candidates {
        states[v].make_candidate(ranks[&v]);
    }

    for _ in 0..iterations {
        let mut active = Vec::new();
        let mut passive = Vec::new();
        for &v in candidates.iter().filter(|&&v| states[v].status() == Status::Undecided) {
            if rng.node(v).random_range(0..inverse) == 0 {
                active.push(v);
            } else {
                passive.push(v);
            }
        }
        if !active.is_empty() {
            for v in ctx.challenge(&active, &passive, &ranks, &mut meter, rng)? {
                states[v].decide(Status::NonElected)?;
            }
        }
        meter.rounds(budget);
    }

    for s in &mut states {
        let status = if s.is_candidate() && s.status() == Status::Undecided {
            Status::Elected
        } else {
            Status::NonElected
        };
        if s.status() == Status::Undecided {
            s.decide(status)?;
        }
    }
    Ok(LEOutcome::finish(states, meter, candidates, ranks))
}

/// One challenge with a prescribed active set: every ranked node outside
/// `active` is passive. Returns the active candidates that end NonElected.
pub fn qw_challenge(
    graph: &Graph,
    k: usize,
    ranks: &BTreeMap<usize, u64>,
    active: &[usize],
    tuning: &Tuning,
    rng: &mut RandomSource,
) -> Result<Vec<usize>> {
    let mut ctx = Context::new(graph, k, tuning)?;
    let passive: Vec<usize> = ranks.keys().copied().filter(|v| !active.contains(v)).collect();
    let mut meter = Meter::default();
    ctx.challenge(active, &passive, ranks, &mut meter, rng)
}
