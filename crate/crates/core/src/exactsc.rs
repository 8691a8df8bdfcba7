//! Exhaustive classical connectivity and exact path enumeration.
//!
//! These are reference implementations: exponential in the network size and
//! kept independent of the reduction and counting code they are used to check.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcore::{contract_terminals, Network, CONTRACTED_SOURCE, CONTRACTED_TARGET};

/// Edge limit for [`exact_classical_sc`] (`2^25` subsets).
pub const MAX_ORACLE_EDGES: usize = 25;

/// Limits for the inclusion-exclusion cross-check.
pub const MAX_IE_EDGES: usize = 64;
pub const MAX_IE_PATHS: usize = 22;

/// Default cap on the number of paths [`enumerate_paths`] will visit.
pub const DEFAULT_PATH_CAP: u64 = 10_000_000;

/// Probability that at least one `S`-`T` path is open when link `i` is open
/// independently with probability `p_i`. Sums over all `2^E` link subsets
/// of the contracted network, so `E` must not exceed [`MAX_ORACLE_EDGES`].
pub fn exact_classical_sc(net: &Network) -> Result<f64> {
    let cn = contract_terminals(net).network;
    let edges = cn.edges();
    if edges.len() > MAX_ORACLE_EDGES {
        return Err(Error::TooLarge {
            edges: edges.len(),
            limit: MAX_ORACLE_EDGES,
        });
    }
    // Compact ids so the union-find array stays tiny.
    let mut ids = vec![usize::MAX; cn.node_count()];
    ids[CONTRACTED_SOURCE] = 0;
    ids[CONTRACTED_TARGET] = 1;
    let mut n = 2;
    let mut ends = Vec::with_capacity(edges.len());
    for e in edges {
        for x in [e.u, e.v] {
            if ids[x] == usize::MAX {
                ids[x] = n;
                n += 1;
            }
        }
        ends.push((ids[e.u] as u8, ids[e.v] as u8));
    }
    let probs: Vec<f64> = edges.iter().map(|e| e.theta.p()).collect();
    let m = edges.len();

    let low_bits = m.min(12);
    let high_count = 1usize << (m - low_bits);
    let partial: Vec<f64> = (0..high_count)
        .into_par_iter()
        .map(|high| {
            let mut parent = [0u8; 2 * MAX_ORACLE_EDGES + 2];
            let mut total = 0.0;
            for low in 0..(1usize << low_bits) {
                let mask = (high << low_bits) | low;
                for (i, slot) in parent.iter_mut().enumerate().take(n) {
                    *slot = i as u8;
                }
                let mut weight = 1.0;
                for (i, &(u, v)) in ends.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        weight *= probs[i];
                        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                        if ru != rv {
                            parent[ru as usize] = rv;
                        }
                    } else {
                        weight *= 1.0 - probs[i];
                    }
                }
                if find(&mut parent, 0) == find(&mut parent, 1) {
                    total += weight;
                }
            }
            total
        })
        .collect();
    Ok(partial.iter().sum::<f64>().min(1.0))
}

fn find(parent: &mut [u8], mut x: u8) -> u8 {
    while parent[x as usize] != x {
        let up = parent[parent[x as usize] as usize];
        parent[x as usize] = up;
        x = up;
    }
    x
}

/// How a path-length histogram was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountSource {
    Exhaustive,
    ClosedForm,
    Recursion,
    TransferMatrix,
    Enumeration,
}

/// Number of self-avoiding `S`-`T` paths per length. A path starts in `S`,
/// ends in `T` and has no other terminal on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub counts: BTreeMap<usize, f64>,
    /// Number of shortest-length classes kept, `None` when complete.
    pub classes: Option<usize>,
    pub source: CountSource,
    /// Some pair hit its enumeration cap, so counts are lower bounds.
    pub truncated: bool,
}

impl PathEnsemble {
    pub fn shortest(&self) -> Option<usize> {
        self.counts.keys().next().copied()
    }

    pub fn total(&self) -> f64 {
        self.counts.values().sum()
    }

    /// Keep only the `m` shortest lengths.
    pub fn truncate_classes(&mut self, m: usize) {
        while self.counts.len() > m {
            let last = *self.counts.keys().next_back().unwrap();
            self.counts.remove(&last);
        }
        self.classes = Some(m);
    }
}

/// Every terminal-to-terminal path of length at most `max_len` (all lengths
/// if `None`), by plain depth-first search. Fails once more than `cap`
/// paths have been found.
pub fn enumerate_paths(net: &Network, max_len: Option<usize>, cap: u64) -> Result<PathEnsemble> {
    let adj = net.adjacency();
    let n = net.node_count();
    let mut terminal = vec![0u8; n];
    for &s in net.sources() {
        terminal[s] = 1;
    }
    for &t in net.targets() {
        terminal[t] = 2;
    }
    let limit = max_len.unwrap_or(n);
    let mut counts = BTreeMap::new();
    let mut on_path = vec![false; n];
    let mut found = 0u64;
    for &s in net.sources() {
        on_path[s] = true;
        let mut st = Search {
            adj: &adj,
            terminal: &terminal,
            on_path: &mut on_path,
            counts: &mut counts,
            limit,
            cap,
            found: &mut found,
        };
        let ok = st.walk(s, 0);
        on_path[s] = false;
        if !ok {
            return Err(Error::EnumerationCap {
                cap,
                source_node: s,
                target_node: usize::MAX,
            });
        }
    }
    Ok(PathEnsemble {
        counts,
        classes: None,
        source: CountSource::Exhaustive,
        truncated: false,
    })
}

struct Search<'a> {
    adj: &'a [Vec<(usize, usize)>],
    terminal: &'a [u8],
    on_path: &'a mut Vec<bool>,
    counts: &'a mut BTreeMap<usize, f64>,
    limit: usize,
    cap: u64,
    found: &'a mut u64,
}

impl Search<'_> {
    fn walk(&mut self, x: usize, len: usize) -> bool {
        if len == self.limit {
            return true;
        }
        for &(y, _) in &self.adj[x] {
            if self.on_path[y] {
                continue;
            }
            match self.terminal[y] {
                2 => {
                    *self.counts.entry(len + 1).or_insert(0.0) += 1.0;
                    *self.found += 1;
                    if *self.found > self.cap {
                        return false;
                    }
                }
                1 => {}
                _ => {
                    self.on_path[y] = true;
                    let ok = self.walk(y, len + 1);
                    self.on_path[y] = false;
                    if !ok {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Classical connectivity as the union of minimal path events, evaluated
/// by inclusion-exclusion over all path subsets.
pub fn classical_sc_inclusion_exclusion(net: &Network) -> Result<f64> {
    let cn = contract_terminals(net).network;
    let edges = cn.edges();
    if edges.len() > MAX_IE_EDGES {
        return Err(Error::TooLarge {
            edges: edges.len(),
            limit: MAX_IE_EDGES,
        });
    }
    let adj = cn.adjacency();
    let mut paths: Vec<u64> = Vec::new();
    let mut visited = vec![false; cn.node_count()];
    visited[CONTRACTED_SOURCE] = true;
    edge_paths(&adj, CONTRACTED_SOURCE, 0, &mut visited, &mut paths, MAX_IE_PATHS + 1);
    if paths.len() > MAX_IE_PATHS {
        return Err(Error::TooLarge {
            edges: paths.len(),
            limit: MAX_IE_PATHS,
        });
    }
    let probs: Vec<f64> = edges.iter().map(|e| e.theta.p()).collect();
    let k = paths.len();
    let terms: Vec<f64> = (1u64..(1u64 << k))
        .into_par_iter()
        .map(|subset| {
            let mut union = 0u64;
            for (i, &mask) in paths.iter().enumerate() {
                if subset >> i & 1 == 1 {
                    union |= mask;
                }
            }
            let mut prod = 1.0;
            let mut bits = union;
            while bits != 0 {
                prod *= probs[bits.trailing_zeros() as usize];
                bits &= bits - 1;
            }
            if subset.count_ones() % 2 == 1 {
                prod
            } else {
                -prod
            }
        })
        .collect();
    Ok(terms.iter().sum::<f64>().clamp(0.0, 1.0))
}

fn edge_paths(
    adj: &[Vec<(usize, usize)>],
    x: usize,
    used: u64,
    visited: &mut Vec<bool>,
    out: &mut Vec<u64>,
    limit: usize,
) {
    for &(y, e) in &adj[x] {
        if out.len() >= limit || visited[y] {
            continue;
        }
        if y == CONTRACTED_TARGET {
            out.push(used | 1 << e);
            continue;
        }
        visited[y] = true;
        edge_paths(adj, y, used | 1 << e, visited, out, limit);
        visited[y] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{bethe_lattice, lattice, Edge, LatticeFamily, LinkWeight};

    fn w(p: f64) -> LinkWeight {
        LinkWeight::from_p(p).unwrap()
    }

    /// Wheatstone bridge: two terminals, four rim links, one bridge.
    fn bridge(p: f64) -> Network {
        let e = |u, v| Edge::new(u, v, w(p));
        Network::new(
            4,
            vec![e(0, 1), e(0, 2), e(1, 3), e(2, 3), e(1, 2)],
            vec![0],
            vec![3],
        )
        .unwrap()
    }

    #[test]
    fn bridge_closed_form() {
        for p in [0.1f64, 0.3, 0.5, 0.9] {
            let expect = 2.0 * p * p + 2.0 * p.powi(3) - 5.0 * p.powi(4) + 2.0 * p.powi(5);
            let got = exact_classical_sc(&bridge(p)).unwrap();
            assert!((got - expect).abs() < 1e-13, "{p}: {got} vs {expect}");
            let ie = classical_sc_inclusion_exclusion(&bridge(p)).unwrap();
            assert!((ie - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn series_and_parallel_pairs() {
        let e = |u, v, p| Edge::new(u, v, w(p));
        let chain = Network::new(3, vec![e(0, 1, 0.3), e(1, 2, 0.6)], vec![0], vec![2]).unwrap();
        assert!((exact_classical_sc(&chain).unwrap() - 0.18).abs() < 1e-14);
        let pair = Network::new(2, vec![e(0, 1, 0.3), e(0, 1, 0.6)], vec![0], vec![1]).unwrap();
        assert!((exact_classical_sc(&pair).unwrap() - 0.72).abs() < 1e-14);
    }

    #[test]
    fn guard_refuses_large_networks() {
        let net = lattice(LatticeFamily::Square, 6, w(0.5)).unwrap();
        assert!(matches!(
            exact_classical_sc(&net),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn disconnected_terminals_give_zero() {
        let net = Network::new(3, vec![Edge::new(0, 1, w(0.9))], vec![0], vec![2]).unwrap();
        assert_eq!(exact_classical_sc(&net).unwrap(), 0.0);
    }

    #[test]
    fn path_counts_small_cases() {
        let tree = bethe_lattice(3, 3, w(0.5)).unwrap();
        let ens = enumerate_paths(&tree, None, DEFAULT_PATH_CAP).unwrap();
        assert_eq!(ens.counts.len(), 1);
        assert_eq!(ens.counts[&3], 12.0);

        // 3x3 square: the middle row has one straight path; each outer row
        // adds its straight path plus detours through the centre column.
        let sq = lattice(LatticeFamily::Square, 3, w(0.5)).unwrap();
        let ens = enumerate_paths(&sq, None, DEFAULT_PATH_CAP).unwrap();
        assert_eq!(ens.shortest(), Some(2));
        assert_eq!(ens.counts[&2], 3.0);
        assert_eq!(ens.counts[&3], 4.0);
        assert_eq!(ens.counts[&4], 2.0);

        assert!(matches!(
            enumerate_paths(&sq, None, 3),
            Err(Error::EnumerationCap { .. })
        ));
    }
}
