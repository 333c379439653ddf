//! Topology generators and structural measurements.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::netmodel::Graph;

const MAX_RETRIES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GraphSpec {
    Complete { n: usize },
    Hypercube { dim: u32 },
    /// G(n, p) conditioned on diameter ≤ 2. `p = None` uses √(2 ln n / n).
    Diameter2Random { n: usize, p: Option<f64> },
    Gnm { n: usize, m: usize },
    RandomRegular { n: usize, d: usize },
    Star { n: usize },
    Cycle { n: usize },
    Path { n: usize },
}

impl GraphSpec {
    pub fn node_count(&self) -> usize {
        match *self {
            GraphSpec::Hypercube { dim } => 1usize << dim,
            GraphSpec::Complete { n }
            | GraphSpec::Diameter2Random { n, .. }
            | GraphSpec::Gnm { n, .. }
            | GraphSpec::RandomRegular { n, .. }
            | GraphSpec::Star { n }
            | GraphSpec::Cycle { n }
            | GraphSpec::Path { n } => n,
        }
    }

    /// Families whose automorphism group acts transitively on nodes, so a
    /// single start vertex witnesses the worst-case mixing time.
    pub fn is_vertex_transitive(&self) -> bool {
        matches!(
            self,
            GraphSpec::Complete { .. } | GraphSpec::Hypercube { .. } | GraphSpec::Cycle { .. }
        )
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Graph> {
        let g = match *self {
            GraphSpec::Complete { n } => Graph::complete(n)?,
            GraphSpec::Hypercube { dim } => hypercube(dim)?,
            GraphSpec::Diameter2Random { n, p } => diameter2_random(n, p, rng)?,
            GraphSpec::Gnm { n, m } => gnm(n, m, rng)?,
            GraphSpec::RandomRegular { n, d } => random_regular(n, d, rng)?,
            GraphSpec::Star { n } => Graph::from_edges(n, &(1..n).map(|v| (0, v)).collect::<Vec<_>>())?,
            GraphSpec::Cycle { n } => {
                if n < 3 {
                    return param(format!("cycle needs n ≥ 3, got {n}"));
                }
                Graph::from_edges(n, &(0..n).map(|v| (v, (v + 1) % n)).collect::<Vec<_>>())?
            }
            GraphSpec::Path { n } => Graph::from_edges(n, &(1..n).map(|v| (v - 1, v)).collect::<Vec<_>>())?,
        };
        if !self.validates(&g) {
            return Err(Error::Precondition(format!("generated graph fails the {self:?} validator")));
        }
        Ok(g)
    }

    /// Family-defining property of a generated graph.
    pub fn validates(&self, g: &Graph) -> bool {
        match *self {
            GraphSpec::Complete { n } => g.node_count() == n && g.is_complete(),
            GraphSpec::Hypercube { dim } => g.node_count() == 1 << dim && g.is_regular() && g.max_degree() == dim as usize,
            GraphSpec::Diameter2Random { n, .. } => g.node_count() == n && check_diameter2(g),
            GraphSpec::Gnm { n, m } => g.node_count() == n && g.edge_count() == m,
            GraphSpec::RandomRegular { n, d } => g.node_count() == n && g.is_regular() && g.max_degree() == d,
            GraphSpec::Star { n } => g.node_count() == n && g.degree(0) == n - 1 && g.edge_count() == n - 1,
            GraphSpec::Cycle { n } => g.node_count() == n && g.is_regular() && g.max_degree() == 2,
            GraphSpec::Path { n } => g.node_count() == n && g.edge_count() == n - 1 && g.max_degree() <= 2,
        }
    }
}

fn hypercube(dim: u32) -> Result<Graph> {
    if !(1..=24).contains(&dim) {
        return param(format!("hypercube dimension must lie in 1..=24, got {dim}"));
    }
    let n = 1usize << dim;
    let edges: Vec<_> = (0..n)
        .flat_map(|u| (0..dim).map(move |b| (u, u ^ (1 << b))).filter(|&(u, v)| u < v))
        .collect();
    Graph::from_edges(n, &edges)
}

/// Default edge probability √(2 ln n / n) for diameter-2 random graphs.
pub fn diameter2_default_p(n: usize) -> f64 {
    (2.0 * (n as f64).ln() / n as f64).sqrt().min(1.0)
}

fn diameter2_random<R: Rng + ?Sized>(n: usize, p: Option<f64>, rng: &mut R) -> Result<Graph> {
    if n < 2 {
        return param(format!("graph needs n ≥ 2, got {n}"));
    }
    let p = p.unwrap_or_else(|| diameter2_default_p(n));
    if !(p > 0.0 && p <= 1.0) {
        return param(format!("edge probability must lie in (0, 1], got {p}"));
    }
    for _ in 0..MAX_RETRIES {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        match Graph::from_edges(n, &edges) {
            Ok(g) if check_diameter2(&g) => return Ok(g),
            Ok(_) | Err(Error::Disconnected) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Resource(format!("no diameter-2 sample of G({n}, {p}) in {MAX_RETRIES} tries")))
}

fn pair_from_index(n: usize, mut idx: usize) -> (usize, usize) {
    // Row u of the upper triangle holds n − 1 − u pairs.
    let mut u = 0;
    while idx >= n - 1 - u {
        idx -= n - 1 - u;
        u += 1;
    }
    (u, u + 1 + idx)
}

fn gnm<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Graph> {
    if n < 2 {
        return param(format!("graph needs n ≥ 2, got {n}"));
    }
    let total = n * (n - 1) / 2;
    if m < n - 1 || m > total {
        return param(format!("G(n, m) with n = {n} needs n − 1 ≤ m ≤ {total}, got {m}"));
    }
    for _ in 0..MAX_RETRIES {
        let edges: Vec<(usize, usize)> = if m <= total / 2 {
            let mut seen = HashSet::with_capacity(m);
            while seen.len() < m {
                let u = rng.random_range(0..n);
                let v = rng.random_range(0..n);
                if u != v {
                    seen.insert((u.min(v), u.max(v)));
                }
            }
            let mut e: Vec<_> = seen.into_iter().collect();
            e.sort_unstable();
            e
        } else {
            let mut drop: Vec<usize> = index::sample(rng, total, total - m).into_vec();
            drop.sort_unstable();
            let mut e = Vec::with_capacity(m);
            let mut d = drop.iter().peekable();
            for i in 0..total {
                if d.peek() == Some(&&i) {
                    d.next();
                } else {
                    e.push(pair_from_index(n, i));
                }
            }
            e
        };
        match Graph::from_edges(n, &edges) {
            Ok(g) => return Ok(g),
            Err(Error::Disconnected) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Resource(format!("no connected G({n}, {m}) sample in {MAX_RETRIES} tries")))
}

/// Random d-regular graph by stub pairing that skips loops and repeated
/// edges, restarting when it gets stuck.
fn random_regular<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Graph> {
    if d == 0 || d >= n {
        return param(format!("random regular graph needs 1 ≤ d < n, got d = {d}, n = {n}"));
    }
    if n * d % 2 == 1 {
        return param(format!("n·d must be even, got n = {n}, d = {d}"));
    }
    'restart: for _ in 0..MAX_RETRIES {
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
        let mut seen = HashSet::with_capacity(n * d / 2);
        let mut edges = Vec::with_capacity(n * d / 2);
        while !stubs.is_empty() {
            let mut placed = false;
            for _ in 0..100 {
                let i = rng.random_range(0..stubs.len());
                let j = rng.random_range(0..stubs.len());
                let (u, v) = (stubs[i], stubs[j]);
                if i == j || u == v || seen.contains(&(u.min(v), u.max(v))) {
                    continue;
                }
                seen.insert((u.min(v), u.max(v)));
                edges.push((u, v));
                let (hi, lo) = (i.max(j), i.min(j));
                stubs.swap_remove(hi);
                stubs.swap_remove(lo);
                placed = true;
                break;
            }
            if !placed {
                continue 'restart;
            }
        }
        match Graph::from_edges(n, &edges) {
            Ok(g) => return Ok(g),
            Err(Error::Disconnected) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Resource(format!("no {d}-regular graph on {n} nodes in {MAX_RETRIES} tries")))
}

/// Exact diameter by BFS from every node.
pub fn diameter(graph: &Graph) -> Result<usize> {
    if graph.is_complete() {
        return Ok(1);
    }
    let mut best = 0;
    for s in 0..graph.node_count() {
        for d in graph.bfs_distances(s) {
            best = best.max(d.ok_or(Error::Disconnected)?);
        }
    }
    Ok(best)
}

/// True when every non-adjacent pair has a common neighbor.
pub fn check_diameter2(graph: &Graph) -> bool {
    if graph.is_complete() {
        return true;
    }
    let bits = graph.adjacency_bits();
    let n = graph.node_count();
    (0..n).all(|u| {
        let ru = bits.row(u);
        (u + 1..n).all(|v| bits.contains(u, v) || ru.iter().zip(bits.row(v)).any(|(a, b)| a & b != 0))
    })
}

/// Stationary distribution of the (lazy) simple random walk, π(v) ∝ deg(v).
pub fn stationary(graph: &Graph) -> Vec<f64> {
    let two_m = 2.0 * graph.edge_count() as f64;
    (0..graph.node_count()).map(|v| graph.degree(v) as f64 / two_m).collect()
}

/// One step of the lazy walk (hold with probability 1/2).
pub fn lazy_step(graph: &Graph, dist: &[f64], out: &mut [f64]) {
    let n = graph.node_count();
    if graph.is_complete() {
        let total: f64 = dist.iter().sum();
        for v in 0..n {
            out[v] = 0.5 * dist[v] + 0.5 * (total - dist[v]) / (n - 1) as f64;
        }
        return;
    }
    for v in 0..n {
        out[v] = 0.5 * dist[v];
    }
    for u in 0..n {
        let share = 0.5 * dist[u] / graph.degree(u) as f64;
        if share != 0.0 {
            for w in graph.neighbors(u) {
                out[w] += share;
            }
        }
    }
}

/// Distribution of the lazy walk after `steps` steps from `start`.
pub fn walk_distribution(graph: &Graph, start: usize, steps: usize) -> Vec<f64> {
    let mut cur = vec![0.0; graph.node_count()];
    cur[start] = 1.0;
    let mut next = vec![0.0; graph.node_count()];
    for _ in 0..steps {
        lazy_step(graph, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Smallest t with max over all starts of TV(P^t(s, ·), π) ≤ `tol`.
pub fn estimate_mixing_time(graph: &Graph, tol: f64) -> Result<usize> {
    let starts: Vec<usize> = (0..graph.node_count()).collect();
    estimate_mixing_time_from(graph, tol, &starts)
}

/// Same as [`estimate_mixing_time`] with the maximum taken over `starts`.
pub fn estimate_mixing_time_from(graph: &Graph, tol: f64, starts: &[usize]) -> Result<usize> {
    const MAX_STEPS: usize = 1 << 22;
    if !(tol > 0.0) {
        return param(format!("TV tolerance must be positive, got {tol}"));
    }
    let pi = stationary(graph);
    let n = graph.node_count();
    let mut worst = 0;
    let mut cur = vec![0.0; n];
    let mut next = vec![0.0; n];
    for &s in starts {
        cur.iter_mut().for_each(|x| *x = 0.0);
        cur[s] = 1.0;
        let mut t = 0;
        // Distance to stationarity never increases, so the first hit is the answer.
        while total_variation(&cur, &pi) > tol {
            if t >= MAX_STEPS {
                return Err(Error::Resource(format!("walk did not mix within {MAX_STEPS} steps")));
            }
            lazy_step(graph, &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
            t += 1;
        }
        worst = worst.max(t);
    }
    Ok(worst)
}

/// Mixing time at tolerance `tol`, measured from one start when the family
/// is vertex-transitive and from every start otherwise.
pub fn mixing_time_for(spec: &GraphSpec, graph: &Graph, tol: f64) -> Result<usize> {
    if spec.is_vertex_transitive() {
        estimate_mixing_time_from(graph, tol, &[0])
    } else {
        estimate_mixing_time(graph, tol)
    }
}

/// Endpoint of a `steps`-step lazy walk from `start`: the number of real
/// moves is Binomial(steps, 1/2), each to a uniform neighbor.
pub fn lazy_walk_endpoint<R: Rng + ?Sized>(graph: &Graph, start: usize, steps: usize, rng: &mut R) -> usize {
    let moves = Binomial::new(steps as u64, 0.5).map(|b| b.sample(rng)).unwrap_or(0);
    let mut v = start;
    for _ in 0..moves {
        v = graph.neighbor(v, rng.random_range(0..graph.degree(v)));
    }
    v
}
