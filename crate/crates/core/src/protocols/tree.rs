use std::collections::{BTreeMap, VecDeque};

use crate::error::{param, Result};
use crate::netmodel::{Charge, Graph, NodeState, RandomSource, Status};
use crate::qprims::{grover_search, GroverSchedule};

use super::{LEOutcome, Meter, NodeSetOracle, TraceEvent, Tuning};

/// Checking for f_v: send the cluster-center id to w, read back one bit.
const CHECK: Charge = Charge::new(2, 2);

/// Maximal matching on a proposal pseudoforest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub mate: Vec<Option<usize>>,
    /// Simulated super-rounds: Cole–Vishkin reductions, the 6 → 3 color
    /// reduction, and the matching rounds.
    pub super_rounds: u64,
}

impl Matching {
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.mate.len())
            .filter_map(|i| self.mate[i].filter(|&j| i < j).map(|j| (i, j)))
            .collect()
    }
}

/// Maximal matching of the graph whose edges are `{i, proposals[i]}`.
///
/// Every fragment proposes at most one other fragment, so the proposal
/// pointers form a pseudoforest. Cole–Vishkin reduction on those pointers
/// gives a proper 6-coloring from the unique `ids`, shift-down brings it to
/// 3 colors, and one request/accept round per color class then yields a
/// maximal matching.
pub fn maximal_matching_cv(ids: &[u64], proposals: &[Option<usize>]) -> Result<Matching> {
    let f = ids.len();
    if proposals.len() != f {
        return param("one proposal slot per fragment is required");
    }
    for (i, p) in proposals.iter().enumerate() {
        if let Some(j) = *p {
            if j >= f || j == i {
                return param(format!("fragment {i} has invalid proposal {j}"));
            }
        }
    }
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return param("fragment ids must be unique");
    }

    let mut rounds = 0;
    let mut color = ids.to_vec();
    while color.iter().any(|&c| c >= 6) {
        color = (0..f)
            .map(|i| {
                let c = color[i];
                // Roots compare against a virtual parent that differs in bit 0.
                let pc = proposals[i].map_or(c ^ 1, |p| color[p]);
                let bit = (c ^ pc).trailing_zeros() as u64;
                2 * bit + ((c >> bit) & 1)
            })
            .collect();
        rounds += 1;
    }

    let mut children: Vec<Vec<usize>> = vec![Vec::new(); f];
    for i in 0..f {
        if let Some(p) = proposals[i] {
            children[p].push(i);
        }
    }
    for target in [5u64, 4, 3] {
        let old = color.clone();
        color = (0..f)
            .map(|i| match proposals[i] {
                Some(p) => old[p],
                None => (0..3).find(|&c| c != old[i]).unwrap_or(0),
            })
            .collect();
        let shifted = color.clone();
        for i in 0..f {
            if shifted[i] == target {
                let parent = proposals[i].map(|p| shifted[p]);
                let child = children[i].first().map(|&c| shifted[c]);
                color[i] = (0..3).find(|&c| Some(c) != parent && Some(c) != child).unwrap_or(0);
            }
        }
        rounds += 2;
    }

    let mut mate: Vec<Option<usize>> = vec![None; f];
    for c in 0..3u64 {
        let mut requests: BTreeMap<usize, usize> = BTreeMap::new();
        for i in 0..f {
            if color[i] != c || mate[i].is_some() {
                continue;
            }
            if let Some(p) = proposals[i] {
                if mate[p].is_none() {
                    let best = requests.entry(p).or_insert(i);
                    if ids[i] < ids[*best] {
                        *best = i;
                    }
                }
            }
        }
        for (p, i) in requests {
            mate[p] = Some(i);
            mate[i] = Some(p);
        }
        rounds += 2;
    }
    Ok(Matching {
        mate,
        super_rounds: rounds,
    })
}

/// Cluster forest: tree edges plus, per node, its center, parent and depth.
struct Forest {
    tree: Vec<Vec<usize>>,
    center: Vec<usize>,
    depth: Vec<u64>,
}

impl Forest {
    fn singletons(n: usize) -> Self {
        Self {
            tree: vec![Vec::new(); n],
            center: (0..n).collect(),
            depth: vec![0; n],
        }
    }

    /// Centers in increasing id order.
    fn centers(&self) -> Vec<usize> {
        (0..self.center.len()).filter(|&v| self.center[v] == v).collect()
    }

    fn max_depth(&self) -> u64 {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Re-labels every node reachable from `root` over tree edges.
    fn reroot(&mut self, root: usize, seen: &mut [bool]) -> usize {
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        self.center[root] = root;
        self.depth[root] = 0;
        let mut size = 1;
        while let Some(u) = queue.pop_front() {
            for i in 0..self.tree[u].len() {
                let w = self.tree[u][i];
                if !seen[w] {
                    seen[w] = true;
                    self.center[w] = root;
                    self.depth[w] = self.depth[u] + 1;
                    size += 1;
                    queue.push_back(w);
                }
            }
        }
        size
    }
}

/// Explicit leader election by Grover-assisted cluster merging over
/// ⌈log₂ n⌉ phases; the last center is elected and broadcasts its id.
pub fn quantum_general_le(graph: &Graph, tuning: &Tuning, rng: &mut RandomSource) -> Result<LEOutcome> {
    let n = graph.node_count();
    let phases = (n as f64).log2().ceil() as usize;
    let alpha = 1.0 / (n as f64).powi(3);
    let search_rounds = GroverSchedule::new(1.0 / graph.max_degree() as f64, alpha, &tuning.search)?
        .cost(CHECK)
        .rounds;

    let mut meter = Meter::default();
    let mut forest = Forest::singletons(n);
    let mut counts = Vec::with_capacity(phases + 1);

    for _ in 0..phases {
        let centers = forest.centers();
        counts.push(centers.len());
        let tree_edges = (n - centers.len()) as u64;

        // Step 1: every node searches its neighborhood for another cluster.
        let mut found: Vec<Option<usize>> = vec![None; n];
        for v in 0..n {
            let d = graph.degree(v);
            let marked = if centers.len() > 1 {
                graph.neighbors(v).filter(|&w| forest.center[w] != forest.center[v]).collect()
            } else {
                Vec::new()
            };
            let eps = 1.0 / d as f64;
            let out = grover_search(&NodeSetOracle::new(d, marked, CHECK), eps, alpha, &tuning.search, rng.node(v))?;
            meter.quantum(out.charge, TraceEvent::Grover { eps, alpha, check: CHECK });
            found[v] = out.found;
        }
        meter.rounds(search_rounds);

        // Convergecast: each center keeps the edge found by its smallest member.
        let index: BTreeMap<usize, usize> = centers.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut edge: Vec<Option<(usize, usize)>> = vec![None; centers.len()];
        for v in 0..n {
            if let Some(w) = found[v] {
                let slot = &mut edge[index[&forest.center[v]]];
                if slot.is_none() {
                    *slot = Some((v, w));
                }
            }
        }
        meter.classical(tree_edges);
        meter.rounds(forest.max_depth());

        // Step 2: matching on the fragment graph, simulated over the trees.
        let proposals: Vec<Option<usize>> = edge.iter().map(|e| e.map(|(_, w)| index[&forest.center[w]])).collect();
        let ids: Vec<u64> = centers.iter().map(|&c| c as u64).collect();
        let matching = maximal_matching_cv(&ids, &proposals)?;
        let proposal_count = proposals.iter().flatten().count() as u64;
        meter.classical(matching.super_rounds * (tree_edges + proposal_count));
        meter.rounds(matching.super_rounds * (2 * forest.max_depth() + 1));

        // Step 3: merge along matched edges; unmatched fragments join a
        // matched neighbor. `host[i]` is the fragment whose center survives.
        let f = centers.len();
        let mut host: Vec<usize> = (0..f).collect();
        let mut links: Vec<(usize, usize)> = Vec::new();
        for (i, j) in matching.pairs() {
            let (from, to) = if proposals[i] == Some(j) { (i, j) } else { (j, i) };
            host[from] = to;
            host[to] = to;
            links.push(edge[from].expect("matched fragments carry a proposal"));
        }
        for i in 0..f {
            if matching.mate[i].is_some() {
                continue;
            }
            if let Some(j) = proposals[i] {
                host[i] = host[j];
                links.push(edge[i].expect("proposal has an edge"));
            } else if let Some(j) = (0..f).find(|&j| proposals[j] == Some(i) && matching.mate[j].is_some()) {
                host[i] = host[j];
                links.push(edge[j].expect("proposal has an edge"));
            }
        }
        for (u, w) in links {
            forest.tree[u].push(w);
            forest.tree[w].push(u);
        }
        let mut merged_sizes = 0u64;
        let mut roots: Vec<usize> = host.iter().map(|&h| centers[h]).collect();
        roots.sort_unstable();
        roots.dedup();
        let mut seen = vec![false; n];
        for &root in &roots {
            let absorbed = (0..f).filter(|&i| centers[host[i]] == root).count();
            let size = forest.reroot(root, &mut seen);
            if absorbed > 1 {
                merged_sizes += size as u64 - 1;
            }
        }
        meter.classical(merged_sizes);
        meter.rounds(forest.max_depth());
    }

    let centers = forest.centers();
    counts.push(centers.len());
    let mut states = vec![NodeState::default(); n];
    for v in 0..n {
        states[v].decide(if forest.center[v] == v { Status::Elected } else { Status::NonElected })?;
    }
    // Final broadcast of the leader id over the tree.
    meter.classical((n - centers.len()) as u64);
    meter.rounds(forest.max_depth());
    let mut out = LEOutcome::finish(states, meter, Vec::new(), BTreeMap::new());
    out.cluster_counts = counts;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_maximal(proposals: &[Option<usize>], m: &Matching) -> bool {
        proposals
            .iter()
            .enumerate()
            .all(|(i, p)| p.is_none_or(|j| m.mate[i].is_some() || m.mate[j].is_some()))
    }

    fn is_matching(proposals: &[Option<usize>], m: &Matching) -> bool {
        (0..m.mate.len()).all(|i| match m.mate[i] {
            None => true,
            Some(j) => m.mate[j] == Some(i) && (proposals[i] == Some(j) || proposals[j] == Some(i)),
        })
    }

    #[test]
    fn two_fragments() {
        let m = maximal_matching_cv(&[10, 20], &[Some(1), Some(0)]).unwrap();
        assert_eq!(m.mate, vec![Some(1), Some(0)]);
    }

    #[test]
    fn path_of_five() {
        let p = [Some(1), Some(2), Some(3), Some(4), None];
        let m = maximal_matching_cv(&[7, 3, 9, 1, 4], &p).unwrap();
        assert!(is_matching(&p, &m) && is_maximal(&p, &m));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(maximal_matching_cv(&[1, 1], &[None, None]).is_err());
        assert!(maximal_matching_cv(&[1, 2], &[Some(0), None]).is_err());
        assert!(maximal_matching_cv(&[1], &[None, None]).is_err());
    }

    #[test]
    fn exhaustive_small_pseudoforests() {
        // Every proposal vector over 5 fragments.
        let f = 5;
        let mut total = 0;
        for code in 0..6usize.pow(f as u32) {
            let mut c = code;
            let mut p = Vec::with_capacity(f);
            for i in 0..f {
                let d = c % 6;
                c /= 6;
                p.push(if d == 5 || d == i { None } else { Some(d) });
            }
            let ids: Vec<u64> = (0..f as u64).map(|i| (i * 37 + 11) % 101).collect();
            let m = maximal_matching_cv(&ids, &p).unwrap();
            assert!(is_matching(&p, &m), "{p:?}");
            assert!(is_maximal(&p, &m), "{p:?}");
            total += 1;
        }
        assert_eq!(total, 7776);
    }
}
