//! Outcome models and cost formulas for distributed Grover search,
//! approximate counting and quantum-walk search.
//!
//! Every subroutine charges its full worst-case schedule, whatever the
//! sampled outcome, so the cost of a call depends only on its parameters.

use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::netmodel::Charge;

/// Constants hidden in the O(·) of the schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConstants {
    /// attempts = ⌈a·ln(1/α)⌉
    pub a: f64,
    /// iterations per attempt drawn from {0, …, ⌈b/√ε⌉}
    pub b: f64,
    /// phase-estimation repetitions per walk reflection, ⌈c_pe/√δ⌉
    pub c_pe: f64,
}

impl Default for SearchConstants {
    fn default() -> Self {
        Self {
            a: 3.0,
            b: 2.0,
            c_pe: 4.0,
        }
    }
}

impl SearchConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c_pe", self.c_pe)] {
            if !(v.is_finite() && v > 0.0) {
                return param(format!("search constant {name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Number of independent attempts for failure probability `alpha`.
    pub fn attempts(&self, alpha: f64) -> u64 {
        ((self.a * (1.0 / alpha).ln()).ceil() as u64).max(1)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        param(format!("ε must lie in (0, 1], got {eps}"))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        param(format!("α must lie in (0, 1), got {alpha}"))
    }
}

/// Grover rotation angle θ = arcsin(√ε_f).
pub fn grover_angle(eps_f: f64) -> f64 {
    eps_f.clamp(0.0, 1.0).sqrt().asin()
}

/// Probability of measuring a marked element after `t` iterations.
pub fn grover_success_probability(domain_size: u64, marked_count: u64, iterations: u64) -> Result<f64> {
    if domain_size == 0 {
        return param("Grover domain must be nonempty");
    }
    if marked_count > domain_size {
        return param(format!("{marked_count} marked elements in a domain of {domain_size}"));
    }
    let theta = grover_angle(marked_count as f64 / domain_size as f64);
    Ok(((2 * iterations + 1) as f64 * theta).sin().powi(2))
}

/// BBHT-style schedule: a fixed number of attempts, each running an
/// iteration count drawn uniformly from `0..=max_iterations`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GroverSchedule {
    pub attempts: u64,
    pub max_iterations: u64,
}

impl GroverSchedule {
    pub fn new(eps: f64, alpha: f64, consts: &SearchConstants) -> Result<Self> {
        check_eps(eps)?;
        check_alpha(alpha)?;
        consts.validate()?;
        Ok(Self {
            attempts: consts.attempts(alpha),
            max_iterations: ((consts.b / eps.sqrt()).ceil() as u64).max(1),
        })
    }

    /// Checking invocations charged: two per iteration (compute and
    /// uncompute) at the full budget, plus one classical verification.
    pub fn checking_calls(&self) -> u64 {
        self.attempts * self.max_iterations * 2 + 1
    }

    pub fn cost(&self, check: Charge) -> Charge {
        check * self.checking_calls()
    }

    /// Success probability of one attempt, averaged over the random
    /// iteration count.
    pub fn attempt_success(&self, eps_f: f64) -> f64 {
        let theta = grover_angle(eps_f);
        let terms = (self.max_iterations + 1) as f64;
        let s2 = (2.0 * theta).sin();
        let sum = if s2.abs() > 1e-9 {
            // Σ_{t=0}^{M} sin²((2t+1)θ)
            terms / 2.0 - (4.0 * terms * theta).sin() / (4.0 * s2)
        } else {
            (0..=self.max_iterations)
                .map(|t| ((2 * t + 1) as f64 * theta).sin().powi(2))
                .sum()
        };
        (sum / terms).clamp(0.0, 1.0)
    }

    /// Probability that every attempt misses.
    pub fn failure_probability(&self, eps_f: f64) -> f64 {
        (1.0 - self.attempt_success(eps_f)).powf(self.attempts as f64)
    }

    /// Largest failure probability over every marked count `j/domain ≥ min_fraction`.
    pub fn worst_case_failure(&self, domain: u64, min_fraction: f64) -> f64 {
        let first = ((min_fraction * domain as f64).ceil() as u64).max(1);
        (first..=domain)
            .map(|j| self.failure_probability(j as f64 / domain as f64))
            .fold(0.0, f64::max)
    }
}

/// Predicate over a finite domain, as seen by a searching node.
pub trait Oracle {
    type Item;

    /// ε_f, the probability mass of marked elements under the search's
    /// start distribution.
    fn marked_fraction(&self) -> f64;

    /// A marked element drawn from that start distribution restricted to
    /// marked elements.
    fn sample_marked<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Self::Item>;

    fn is_marked(&self, x: &Self::Item) -> bool;

    /// Cost (T_C, M_C) of one Checking call.
    fn checking(&self) -> Charge;
}

/// Explicit predicate: domain `0..domain_size` with a listed marked set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleSpec {
    domain_size: u64,
    marked: Vec<u64>,
    checking: Charge,
}

impl OracleSpec {
    pub fn new(domain_size: u64, marked: impl IntoIterator<Item = u64>, checking: Charge) -> Result<Self> {
        if domain_size == 0 {
            return param("oracle domain must be nonempty");
        }
        let mut marked: Vec<u64> = marked.into_iter().collect();
        marked.sort_unstable();
        marked.dedup();
        if let Some(&x) = marked.last() {
            if x >= domain_size {
                return param(format!("marked element {x} outside domain of {domain_size}"));
            }
        }
        Ok(Self {
            domain_size,
            marked,
            checking,
        })
    }

    pub fn domain_size(&self) -> u64 {
        self.domain_size
    }

    pub fn marked_count(&self) -> u64 {
        self.marked.len() as u64
    }
}

impl Oracle for OracleSpec {
    type Item = u64;

    fn marked_fraction(&self) -> f64 {
        self.marked.len() as f64 / self.domain_size as f64
    }

    fn sample_marked<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u64> {
        if self.marked.is_empty() {
            None
        } else {
            Some(self.marked[rng.random_range(0..self.marked.len())])
        }
    }

    fn is_marked(&self, x: &u64) -> bool {
        self.marked.binary_search(x).is_ok()
    }

    fn checking(&self) -> Charge {
        self.checking
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome<T> {
    pub found: Option<T>,
    pub charge: Charge,
}

/// Runs the attempt loop of the schedule on success probability `eps_f`.
/// Returns whether some attempt measured a marked element.
fn run_attempts<R: Rng + ?Sized>(schedule: &GroverSchedule, eps_f: f64, rng: &mut R) -> bool {
    if eps_f <= 0.0 {
        return false;
    }
    let theta = grover_angle(eps_f);
    (0..schedule.attempts).any(|_| {
        let t = rng.random_range(0..=schedule.max_iterations);
        let p = ((2 * t + 1) as f64 * theta).sin().powi(2);
        rng.random::<f64>() < p
    })
}

/// Distributed Grover search. A returned element is always marked: the
/// candidate is verified by one extra Checking call before it is reported.
pub fn grover_search<O: Oracle, R: Rng + ?Sized>(
    oracle: &O,
    eps: f64,
    alpha: f64,
    consts: &SearchConstants,
    rng: &mut R,
) -> Result<SearchOutcome<O::Item>> {
    let schedule = GroverSchedule::new(eps, alpha, consts)?;
    let charge = schedule.cost(oracle.checking());
    let found = if run_attempts(&schedule, oracle.marked_fraction(), rng) {
        oracle.sample_marked(rng).filter(|x| oracle.is_marked(x))
    } else {
        None
    };
    Ok(SearchOutcome { found, charge })
}

/// Measurement distribution of `p`-point phase estimation on an eigenphase
/// `omega` (in turns).
pub fn phase_estimation_distribution(omega: f64, p: usize) -> Vec<f64> {
    let pf = p as f64;
    (0..p)
        .map(|m| {
            let delta = omega - m as f64 / pf;
            let d = delta - delta.round();
            if d.abs() < 1e-12 {
                1.0
            } else {
                (pf * PI * d).sin().powi(2) / (pf * pf * (PI * d).sin().powi(2))
            }
        })
        .collect()
}

/// Phase estimation on the Grover operator started from the uniform state,
/// which splits evenly over the eigenphases ±θ/π.
pub fn grover_phase_distribution(domain_size: u64, marked_count: u64, p: usize) -> Result<Vec<f64>> {
    if p == 0 {
        return param("phase estimation needs P ≥ 1");
    }
    if domain_size == 0 || marked_count > domain_size {
        return param(format!("need 0 ≤ t ≤ |X| and |X| > 0, got t = {marked_count}, |X| = {domain_size}"));
    }
    let omega = grover_angle(marked_count as f64 / domain_size as f64) / PI;
    let plus = phase_estimation_distribution(omega, p);
    let minus = phase_estimation_distribution(-omega, p);
    Ok(plus.iter().zip(&minus).map(|(a, b)| 0.5 * (a + b)).collect())
}

/// Phase-estimation resolution P = ⌈8π/c⌉ for additive counting error c|X|.
pub fn counting_resolution(c: f64) -> usize {
    (8.0 * PI / c).ceil() as usize
}

/// Count estimate read off outcome `m` on the doubled domain `2|X|`.
pub fn count_estimate(domain_size: u64, p: usize, m: usize) -> u64 {
    let folded = m.min(p - m);
    let est = 2.0 * domain_size as f64 * (PI * folded as f64 / p as f64).sin().powi(2);
    (est.round() as u64).min(domain_size)
}

/// Eigenphase of the Grover operator on the doubled domain.
pub fn counting_phase(domain_size: u64, marked_count: u64) -> f64 {
    grover_angle(marked_count as f64 / (2 * domain_size) as f64) / PI
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountOutcome {
    pub estimate: u64,
    pub charge: Charge,
}

/// Quantum approximate counting: median of ⌈a·ln(1/α)⌉ phase-estimation runs.
pub fn approx_count<R: Rng + ?Sized>(
    oracle: &OracleSpec,
    c: f64,
    alpha: f64,
    consts: &SearchConstants,
    rng: &mut R,
) -> Result<CountOutcome> {
    if !(c > 0.0 && c < 1.0) {
        return param(format!("counting precision c must lie in (0, 1), got {c}"));
    }
    check_alpha(alpha)?;
    consts.validate()?;
    let attempts = consts.attempts(alpha);
    let p = counting_resolution(c);
    let dist = phase_estimation_distribution(counting_phase(oracle.domain_size(), oracle.marked_count()), p);
    let sampler = WeightedIndex::new(&dist).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut estimates: Vec<u64> = (0..attempts)
        .map(|_| count_estimate(oracle.domain_size(), p, sampler.sample(rng)))
        .collect();
    estimates.sort_unstable();
    Ok(CountOutcome {
        estimate: estimates[(estimates.len() - 1) / 2],
        charge: oracle.checking() * (attempts * p as u64 * 2),
    })
}

/// Spectral gap N/(k(N−k)) of the uniform walk on the Johnson graph J(N, k),
/// clamped to 1.
pub fn johnson_gap(universe_size: u64, k: u64) -> Result<f64> {
    if k == 0 || k >= universe_size {
        return param(format!("Johnson graph J({universe_size}, {k}) needs 1 ≤ k < N"));
    }
    let n = universe_size as f64;
    let k = k as f64;
    Ok((n / (k * (n - k))).min(1.0))
}

/// Costs of the walk operations for [`walk_search`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkCosts {
    pub setup: Charge,
    pub update: Charge,
    pub checking: Charge,
    pub delta: f64,
    /// Failure probability of a single Checking call; zero for exact checks.
    pub checking_error: f64,
}

impl WalkCosts {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return param(format!("spectral gap δ must lie in (0, 1], got {}", self.delta));
        }
        if !(0.0..1.0).contains(&self.checking_error) {
            return param(format!("checking error must lie in [0, 1), got {}", self.checking_error));
        }
        Ok(())
    }

    /// Update calls per reflection, ⌈c_pe/√δ⌉.
    pub fn updates_per_step(&self, consts: &SearchConstants) -> u64 {
        ((consts.c_pe / self.delta.sqrt()).ceil() as u64).max(1)
    }

    /// attempts × (S + M × (⌈c_pe/√δ⌉ × U + C)).
    pub fn cost(&self, eps: f64, alpha: f64, consts: &SearchConstants) -> Result<Charge> {
        self.validate()?;
        let schedule = GroverSchedule::new(eps, alpha, consts)?;
        let step = self.update * self.updates_per_step(consts) + self.checking;
        Ok((self.setup + step * schedule.max_iterations) * schedule.attempts)
    }
}

/// Search via quantum walk. The oracle's marked fraction is the stationary
/// mass of marked walk states. When Checking can fail, each of the
/// attempts × M calls may fail independently, and a failure turns a hit
/// into a miss.
pub fn walk_search<O: Oracle, R: Rng + ?Sized>(
    costs: &WalkCosts,
    oracle: &O,
    eps: f64,
    alpha: f64,
    consts: &SearchConstants,
    rng: &mut R,
) -> Result<SearchOutcome<O::Item>> {
    let charge = costs.cost(eps, alpha, consts)?;
    let schedule = GroverSchedule::new(eps, alpha, consts)?;
    let mut found = if run_attempts(&schedule, oracle.marked_fraction(), rng) {
        oracle.sample_marked(rng).filter(|x| oracle.is_marked(x))
    } else {
        None
    };
    if found.is_some() && costs.checking_error > 0.0 {
        let calls = (schedule.attempts * schedule.max_iterations) as f64;
        let corrupt = 1.0 - (1.0 - costs.checking_error).powf(calls);
        if rng.random::<f64>() < corrupt {
            found = None;
        }
    }
    Ok(SearchOutcome { found, charge })
}
