//! Exact state-vector kernel for the quantum routing model on star networks.
//!
//! Every port carries an emission register and a reception register. The
//! center holds a query register (which leaf to address) and one answer
//! qubit. Checking is a full round trip of Send operations, so the
//! simulated Grover and phase-estimation circuits pay for communication the
//! same way a distributed node does.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{param, Error, Result};

pub const MAX_LEAVES: usize = 12;
pub const MAX_PHASE_POINTS: usize = 16;

/// Register symbols. `BOTTOM` is the empty register ⊥.
pub const BOTTOM: u8 = 0;
pub const QUERY: u8 = 1;
pub const ANSWER_0: u8 = 2;
pub const ANSWER_1: u8 = 3;

const SYMBOLS: [char; 4] = ['.', 'Q', '0', '1'];

/// One basis configuration. Field order fixes the dump order: center
/// registers first, then leaves by id, each leaf as (reception, emission).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Basis {
    pub query: u8,
    pub answer: u8,
    pub center_out: [u8; MAX_LEAVES],
    pub center_in: [u8; MAX_LEAVES],
    pub leaves: [[u8; 2]; MAX_LEAVES],
}

const LEAF_IN: usize = 0;
const LEAF_OUT: usize = 1;

impl Basis {
    pub fn vacuum(query: u8) -> Self {
        Self {
            query,
            answer: 0,
            center_out: [BOTTOM; MAX_LEAVES],
            center_in: [BOTTOM; MAX_LEAVES],
            leaves: [[BOTTOM; 2]; MAX_LEAVES],
        }
    }

    pub fn label(&self, leaves: usize) -> String {
        let sym = |s: u8| SYMBOLS[s as usize];
        let mut out = format!("q{:02}a{}|", self.query, self.answer);
        out.extend(self.center_out[..leaves].iter().map(|&s| sym(s)));
        out.push('|');
        out.extend(self.center_in[..leaves].iter().map(|&s| sym(s)));
        for l in &self.leaves[..leaves] {
            out.push('|');
            out.push(sym(l[LEAF_IN]));
            out.push(sym(l[LEAF_OUT]));
        }
        out
    }
}

/// Sparse state vector of a star with `leaves` leaves.
#[derive(Debug, Clone)]
pub struct StateVector {
    leaves: usize,
    amps: BTreeMap<Basis, Complex64>,
    sends: u64,
    messages: u64,
}

fn check_leaves(leaves: usize) -> Result<()> {
    if leaves == 0 {
        return param("star needs at least one leaf");
    }
    if leaves > MAX_LEAVES {
        return Err(Error::Resource(format!("{leaves} leaves exceeds the kernel bound of {MAX_LEAVES}")));
    }
    Ok(())
}

impl StateVector {
    /// Uniform superposition over query values with every register empty.
    pub fn uniform(leaves: usize) -> Result<Self> {
        check_leaves(leaves)?;
        let a = Complex64::new(1.0 / (leaves as f64).sqrt(), 0.0);
        Ok(Self {
            leaves,
            amps: (0..leaves as u8).map(|q| (Basis::vacuum(q), a)).collect(),
            sends: 0,
            messages: 0,
        })
    }

    pub fn from_terms(leaves: usize, terms: impl IntoIterator<Item = (Basis, Complex64)>) -> Result<Self> {
        check_leaves(leaves)?;
        let mut amps = BTreeMap::new();
        for (b, a) in terms {
            if b.query as usize >= leaves {
                return param(format!("query {} out of range", b.query));
            }
            *amps.entry(b).or_insert(Complex64::new(0.0, 0.0)) += a;
        }
        let s = Self {
            leaves,
            amps,
            sends: 0,
            messages: 0,
        };
        if (s.norm() - 1.0).abs() > 1e-12 {
            return param(format!("state norm {} is not 1", s.norm()));
        }
        Ok(s)
    }

    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn norm(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn amplitude(&self, b: &Basis) -> Complex64 {
        self.amps.get(b).copied().unwrap_or_default()
    }

    /// Send operations applied so far.
    pub fn sends(&self) -> u64 {
        self.sends
    }

    /// Messages charged so far: per Send, the largest number of nonempty
    /// registers moved in any single configuration.
    pub fn messages(&self) -> u64 {
        self.messages
    }

    fn permute(&mut self, f: impl Fn(Basis) -> Basis) {
        let amps = std::mem::take(&mut self.amps);
        for (b, a) in amps {
            let prev = self.amps.insert(f(b), a);
            debug_assert!(prev.is_none(), "map is not a permutation");
        }
    }

    /// Moves every emission register into the matching reception register,
    /// on all ports at once.
    pub fn send(&mut self) -> Result<()> {
        let l = self.leaves;
        let mut moved = 0u64;
        for b in self.amps.keys() {
            let busy = b.center_in[..l].iter().any(|&s| s != BOTTOM)
                || b.leaves[..l].iter().any(|r| r[LEAF_IN] != BOTTOM);
            if busy {
                return Err(Error::Precondition(format!(
                    "reception register not empty in {}",
                    b.label(l)
                )));
            }
            let count = b.center_out[..l].iter().filter(|&&s| s != BOTTOM).count()
                + b.leaves[..l].iter().filter(|r| r[LEAF_OUT] != BOTTOM).count();
            moved = moved.max(count as u64);
        }
        self.permute(|mut b| {
            for i in 0..l {
                std::mem::swap(&mut b.center_out[i], &mut b.leaves[i][LEAF_IN]);
                std::mem::swap(&mut b.leaves[i][LEAF_OUT], &mut b.center_in[i]);
            }
            b
        });
        self.sends += 1;
        self.messages += moved;
        Ok(())
    }

    /// Swaps emission and reception registers at every port, turning a
    /// received message into one ready to be sent back.
    pub fn reflect_ports(&mut self) {
        let l = self.leaves;
        self.permute(|mut b| {
            for i in 0..l {
                std::mem::swap(&mut b.center_out[i], &mut b.center_in[i]);
                b.leaves[i].swap(LEAF_IN, LEAF_OUT);
            }
            b
        });
    }

    /// Center puts (or takes back) a query symbol on the port named by its
    /// query register.
    fn center_toggle_query_out(&mut self) {
        self.permute(|mut b| {
            let r = &mut b.center_out[b.query as usize];
            *r = match *r {
                BOTTOM => QUERY,
                QUERY => BOTTOM,
                s => s,
            };
            b
        });
    }

    fn center_toggle_query_in(&mut self) {
        self.permute(|mut b| {
            let r = &mut b.center_in[b.query as usize];
            *r = match *r {
                BOTTOM => QUERY,
                QUERY => BOTTOM,
                s => s,
            };
            b
        });
    }

    /// Leaf i swaps (Q in, ⊥ out) with (⊥ in, A_f(i) out).
    fn leaves_respond(&mut self, marked: &[bool]) {
        let l = self.leaves;
        self.permute(|mut b| {
            for (i, &m) in marked.iter().enumerate().take(l) {
                let ans = if m { ANSWER_1 } else { ANSWER_0 };
                let r = &mut b.leaves[i];
                if *r == [QUERY, BOTTOM] {
                    *r = [BOTTOM, ans];
                } else if *r == [BOTTOM, ans] {
                    *r = [QUERY, BOTTOM];
                }
            }
            b
        });
    }

    /// Leaf i swaps (A_f(i) in, ⊥ out) with (⊥ in, Q out), erasing its answer.
    fn leaves_unrespond(&mut self, marked: &[bool]) {
        let l = self.leaves;
        self.permute(|mut b| {
            for (i, &m) in marked.iter().enumerate().take(l) {
                let ans = if m { ANSWER_1 } else { ANSWER_0 };
                let r = &mut b.leaves[i];
                if *r == [ans, BOTTOM] {
                    *r = [BOTTOM, QUERY];
                } else if *r == [BOTTOM, QUERY] {
                    *r = [ans, BOTTOM];
                }
            }
            b
        });
    }

    /// answer ^= bit carried by the answer symbol received on the query port.
    fn absorb_answer(&mut self) {
        self.permute(|mut b| {
            if b.center_in[b.query as usize] == ANSWER_1 {
                b.answer ^= 1;
            }
            b
        });
    }

    fn phase_on_answer(&mut self) {
        for (b, a) in self.amps.iter_mut() {
            if b.answer == 1 {
                *a = -*a;
            }
        }
    }

    /// Phase oracle S_f realized by four Sends: query out, answer back,
    /// answer returned for uncomputation, query back.
    pub fn checking_round_trip(&mut self, marked: &[bool]) -> Result<()> {
        self.center_toggle_query_out();
        self.send()?;
        self.leaves_respond(marked);
        self.send()?;
        self.absorb_answer();
        self.phase_on_answer();
        self.absorb_answer();
        self.reflect_ports();
        self.send()?;
        self.leaves_unrespond(marked);
        self.send()?;
        self.center_toggle_query_in();
        Ok(())
    }

    /// Inversion about the mean of the query register, D = 2|s⟩⟨s| − I.
    pub fn diffuse_query(&mut self) {
        let l = self.leaves;
        let mut groups: BTreeMap<Basis, Vec<Complex64>> = BTreeMap::new();
        for (b, a) in &self.amps {
            let key = Basis { query: 0, ..*b };
            groups.entry(key).or_insert_with(|| vec![Complex64::default(); l])[b.query as usize] = *a;
        }
        self.amps.clear();
        for (key, vals) in groups {
            let mean = vals.iter().sum::<Complex64>() / l as f64;
            for (q, v) in vals.into_iter().enumerate() {
                let a = mean * 2.0 - v;
                if a.norm_sqr() > 0.0 {
                    self.amps.insert(Basis { query: q as u8, ..key }, a);
                }
            }
        }
    }

    pub fn grover_iteration(&mut self, marked: &[bool]) -> Result<()> {
        self.checking_round_trip(marked)?;
        self.diffuse_query();
        Ok(())
    }

    /// Probability that measuring the query register gives a leaf satisfying `pred`.
    pub fn query_probability(&self, pred: impl Fn(usize) -> bool) -> f64 {
        self.amps
            .iter()
            .filter(|(b, _)| pred(b.query as usize))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// `label<TAB>re<TAB>im` per nonzero amplitude, in basis order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (b, a) in &self.amps {
            let _ = writeln!(out, "{}\t{:.12}\t{:.12}", b.label(self.leaves), a.re, a.im);
        }
        out
    }
}

/// Functional form of [`StateVector::send`].
pub fn apply_send(state: &StateVector) -> Result<StateVector> {
    let mut s = state.clone();
    s.send()?;
    Ok(s)
}

fn marked_mask(leaves: usize, marked: &[usize]) -> Result<Vec<bool>> {
    check_leaves(leaves)?;
    let mut mask = vec![false; leaves];
    for &m in marked {
        if m >= leaves {
            return param(format!("marked leaf {m} out of range for {leaves} leaves"));
        }
        mask[m] = true;
    }
    Ok(mask)
}

/// Result of an exact Grover run on a star.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarRun {
    pub success_probability: f64,
    pub sends: u64,
    pub messages: u64,
    pub norm: f64,
}

pub fn grover_star_run(leaf_count: usize, marked: &[usize], iterations: usize) -> Result<StarRun> {
    let mask = marked_mask(leaf_count, marked)?;
    let mut s = StateVector::uniform(leaf_count)?;
    for _ in 0..iterations {
        s.grover_iteration(&mask)?;
    }
    Ok(StarRun {
        success_probability: s.query_probability(|q| mask[q]),
        sends: s.sends(),
        messages: s.messages(),
        norm: s.norm(),
    })
}

/// Probability of measuring a marked leaf after `iterations` rounds of
/// D·S_f from the uniform state.
pub fn grover_star_exact(leaf_count: usize, marked: &[usize], iterations: usize) -> Result<f64> {
    Ok(grover_star_run(leaf_count, marked, iterations)?.success_probability)
}

/// Outcome distribution of `p`-point phase estimation on the Grover
/// operator, started from the uniform state:
/// Pr[m] = ‖(1/P) Σ_j e^{−2πijm/P} G^j|s⟩‖².
pub fn phase_estimation_exact_distribution(leaf_count: usize, marked: &[usize], p: usize) -> Result<Vec<f64>> {
    if p == 0 {
        return param("phase estimation needs P ≥ 1");
    }
    if p > MAX_PHASE_POINTS {
        return Err(Error::Resource(format!("P = {p} exceeds the kernel bound of {MAX_PHASE_POINTS}")));
    }
    let mask = marked_mask(leaf_count, marked)?;
    let mut powers = Vec::with_capacity(p);
    let mut s = StateVector::uniform(leaf_count)?;
    for j in 0..p {
        if j > 0 {
            s.grover_iteration(&mask)?;
        }
        powers.push(s.amps.clone());
    }
    let mut keys: Vec<Basis> = powers.iter().flat_map(|m| m.keys().copied()).collect();
    keys.sort_unstable();
    keys.dedup();
    let pf = p as f64;
    Ok((0..p)
        .map(|m| {
            keys.iter()
                .map(|k| {
                    let amp: Complex64 = powers
                        .iter()
                        .enumerate()
                        .map(|(j, psi)| {
                            let w = Complex64::from_polar(1.0, -2.0 * PI * (j * m) as f64 / pf);
                            psi.get(k).copied().unwrap_or_default() * w
                        })
                        .sum();
                    (amp / pf).norm_sqr()
                })
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn send_moves_a_single_message() {
        let mut b = Basis::vacuum(0);
        b.center_out[2] = QUERY;
        let mut s = StateVector::from_terms(4, [(b, c(1.0))]).unwrap();
        s.send().unwrap();
        let mut expect = Basis::vacuum(0);
        expect.leaves[2][LEAF_IN] = QUERY;
        assert!((s.amplitude(&expect) - c(1.0)).norm() < 1e-15);
        assert_eq!(s.messages(), 1);
    }

    #[test]
    fn vacuum_send_is_identity() {
        let s = StateVector::uniform(5).unwrap();
        let t = apply_send(&s).unwrap();
        assert_eq!(s.dump(), t.dump());
        assert_eq!(t.messages(), 0);
    }

    #[test]
    fn superposed_port_selection() {
        let amps = [0.5, 0.5f64.sqrt(), 0.5];
        let terms = amps.iter().enumerate().map(|(v, &a)| {
            let mut b = Basis::vacuum(0);
            b.center_out[v] = QUERY;
            (b, c(a))
        });
        let s = apply_send(&StateVector::from_terms(3, terms).unwrap()).unwrap();
        for (v, &a) in amps.iter().enumerate() {
            let mut b = Basis::vacuum(0);
            b.leaves[v][LEAF_IN] = QUERY;
            assert!((s.amplitude(&b) - c(a)).norm() < 1e-15);
        }
        assert!((s.norm() - 1.0).abs() < 1e-12);
        // Each branch carries one message, so one is charged.
        assert_eq!(s.messages(), 1);
    }

    #[test]
    fn send_rejects_occupied_reception() {
        let mut b = Basis::vacuum(0);
        b.center_in[1] = ANSWER_0;
        let s = StateVector::from_terms(2, [(b, c(1.0))]).unwrap();
        assert!(matches!(apply_send(&s), Err(Error::Precondition(_))));
    }

    #[test]
    fn send_reflect_is_an_involution() {
        let mut b = Basis::vacuum(1);
        b.center_out[1] = QUERY;
        b.leaves[0][LEAF_OUT] = ANSWER_1;
        let mut s = StateVector::from_terms(3, [(b, c(1.0))]).unwrap();
        let before = s.dump();
        for _ in 0..2 {
            s.send().unwrap();
            s.reflect_ports();
        }
        assert_eq!(s.dump(), before);
    }

    #[test]
    fn round_trip_costs_two_checkings() {
        let run = grover_star_run(4, &[1], 1).unwrap();
        assert_eq!((run.sends, run.messages), (4, 4));
    }

    #[test]
    fn star_examples() {
        assert_eq!(grover_star_exact(6, &[], 3).unwrap(), 0.0);
        assert!((grover_star_exact(4, &[2], 1).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(grover_star_exact(13, &[], 1), Err(Error::Resource(_))));
        assert!(grover_star_exact(4, &[4], 1).is_err());
    }

    #[test]
    fn norm_is_stable_over_long_sequences() {
        let run = grover_star_run(7, &[0, 3], 25).unwrap();
        assert!((run.norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn phase_estimation_matches_closed_form() {
        for leaves in 1..=5 {
            for t in 0..=leaves {
                let marked: Vec<usize> = (0..t).collect();
                for p in [1, 3, 8, 16] {
                    let exact = phase_estimation_exact_distribution(leaves, &marked, p).unwrap();
                    let closed = crate::qprims::grover_phase_distribution(leaves as u64, t as u64, p).unwrap();
                    for (a, b) in exact.iter().zip(&closed) {
                        assert!((a - b).abs() < 1e-9, "{leaves} {t} {p}: {exact:?} vs {closed:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn phase_estimation_examples() {
        let d = phase_estimation_exact_distribution(5, &[], 8).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-12);
        let d = phase_estimation_exact_distribution(4, &[0, 1], 4).unwrap();
        assert!((d[1] - 0.5).abs() < 1e-12 && (d[3] - 0.5).abs() < 1e-12);
        assert!(phase_estimation_exact_distribution(4, &[0], 17).is_err());
    }

    #[test]
    fn dump_is_ordered_and_labeled() {
        let s = StateVector::uniform(2).unwrap();
        assert_eq!(
            s.dump(),
            "q00a0|..|..|..|..\t0.707106781187\t0.000000000000\n\
             q01a0|..|..|..|..\t0.707106781187\t0.000000000000\n"
        );
    }

    proptest! {
        #[test]
        fn iterations_preserve_norm(leaves in 1usize..=8, bits in 0u16..256, t in 0usize..10) {
            let marked: Vec<usize> = (0..leaves).filter(|i| bits >> i & 1 == 1).collect();
            let run = grover_star_run(leaves, &marked, t).unwrap();
            prop_assert!((run.norm - 1.0).abs() < 1e-10);
            prop_assert_eq!(run.sends, 4 * t as u64);
        }
    }
}
