//! Exact evaluation of series-parallel networks by repeated series and
//! parallel merging, with a step trace that can be replayed.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fastapprox::{Method, SweepCurve};
use crate::netcore::{
    contract_terminals, LinkWeight, Network, NodeId, CONTRACTED_SOURCE, CONTRACTED_TARGET,
};
use crate::rules::{ParallelAcc, RuleSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Series,
    Parallel,
    Prune,
    StarMesh,
}

/// One merge. Edge ids refer to the initial edges (numbered in canonical
/// order) and to edges produced by earlier steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionStep {
    pub kind: StepKind,
    /// Eliminated vertex for series, prune and star-mesh steps (original id).
    pub vertex: Option<NodeId>,
    pub consumed: Vec<usize>,
    pub produced: Vec<usize>,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
}

/// Order in which reducible vertices are processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionOrder {
    /// Always the smallest reducible vertex id.
    SmallestId,
    /// Random insertion order and random vertex choice from a seed.
    Random(u64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpReduction {
    pub value: f64,
    /// Values of the initial edges, indexed by edge id.
    pub initial: Vec<f64>,
    pub trace: Vec<ReductionStep>,
    /// Edge joining the terminals at the end, if they are connected.
    pub final_edge: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpOutcome {
    pub series_parallel: bool,
    /// Smallest irreducible vertex (original id) when not series-parallel.
    pub blocking_vertex: Option<NodeId>,
    pub trace: Vec<ReductionStep>,
}

#[derive(Debug, Clone)]
struct WorkEdge {
    u: usize,
    v: usize,
    value: f64,
}

/// Mutable multigraph on contracted ids used by the reducers.
pub(crate) struct WorkGraph {
    pub(crate) system: RuleSystem,
    adj: Vec<BTreeMap<usize, usize>>,
    edges: Vec<WorkEdge>,
    alive: Vec<bool>,
    pending: BTreeSet<usize>,
    rng: Option<ChaCha8Rng>,
    trace: Vec<ReductionStep>,
    initial: Vec<f64>,
    /// Contracted id -> original id (terminals map to their smallest member).
    original: Vec<NodeId>,
}

impl WorkGraph {
    pub(crate) fn new(net: &Network, system: RuleSystem, order: ReductionOrder) -> Self {
        let cn = contract_terminals(net);
        let n = cn.network.node_count();
        let mut original = vec![usize::MAX; n];
        for (old, &new) in cn.node_map.iter().enumerate() {
            if original[new] == usize::MAX {
                original[new] = old;
            }
        }
        let mut list: Vec<(usize, usize, f64)> = cn
            .network
            .edges()
            .iter()
            .map(|e| {
                let (u, v) = e.key();
                (u, v, system.value(e.theta))
            })
            .collect();
        list.sort_by(|a, b| (a.0, a.1, a.2.to_bits()).cmp(&(b.0, b.1, b.2.to_bits())));

        let mut g = WorkGraph {
            system,
            adj: vec![BTreeMap::new(); n],
            edges: Vec::with_capacity(2 * list.len()),
            alive: vec![true; n],
            pending: BTreeSet::new(),
            rng: None,
            trace: Vec::new(),
            initial: list.iter().map(|x| x.2).collect(),
            original,
        };
        for &(u, v, value) in &list {
            g.edges.push(WorkEdge { u, v, value });
        }
        let mut insert: Vec<usize> = (0..list.len()).collect();
        if let ReductionOrder::Random(seed) = order {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            insert.shuffle(&mut rng);
            g.rng = Some(rng);
        }
        for id in insert {
            g.attach(id);
        }
        g.drop_unreachable();
        g.pending = (2..n).filter(|&x| g.alive[x]).collect();
        g
    }

    pub(crate) fn original_id(&self, x: usize) -> NodeId {
        self.original[x]
    }

    fn record(&mut self, step: ReductionStep) {
        self.trace.push(step);
    }

    /// Hook edge `id` into the adjacency, merging with an existing parallel edge.
    fn attach(&mut self, id: usize) {
        let (u, v) = (self.edges[id].u, self.edges[id].v);
        if let Some(&old) = self.adj[u].get(&v) {
            let (a, b) = (self.edges[old].value, self.edges[id].value);
            let merged = self.system.parallel2(a, b);
            let new = self.edges.len();
            self.edges.push(WorkEdge { u, v, value: merged });
            self.adj[u].insert(v, new);
            self.adj[v].insert(u, new);
            self.record(ReductionStep {
                kind: StepKind::Parallel,
                vertex: None,
                consumed: vec![old, id],
                produced: vec![new],
                before: vec![a, b],
                after: vec![merged],
            });
            self.touch(u);
            self.touch(v);
        } else {
            self.adj[u].insert(v, id);
            self.adj[v].insert(u, id);
        }
    }

    pub(crate) fn add_edge(&mut self, u: usize, v: usize, value: f64) -> usize {
        let id = self.edges.len();
        self.edges.push(WorkEdge { u, v, value });
        self.attach(id);
        id
    }

    fn touch(&mut self, x: usize) {
        if x > CONTRACTED_TARGET && self.alive[x] {
            self.pending.insert(x);
        }
    }

    fn pop_pending(&mut self) -> Option<usize> {
        match self.rng.as_mut() {
            None => self.pending.pop_first(),
            Some(rng) => {
                if self.pending.is_empty() {
                    return None;
                }
                let i = rng.gen_range(0..self.pending.len());
                let x = *self.pending.iter().nth(i).unwrap();
                self.pending.remove(&x);
                Some(x)
            }
        }
    }

    /// Remove every vertex that cannot lie on a terminal-to-terminal path
    /// because it is outside the source component, or everything if the
    /// terminals are disconnected.
    fn drop_unreachable(&mut self) {
        let n = self.adj.len();
        let mut seen = vec![false; n];
        let mut stack = vec![CONTRACTED_SOURCE];
        seen[CONTRACTED_SOURCE] = true;
        while let Some(x) = stack.pop() {
            for &y in self.adj[x].keys() {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        let connected = seen[CONTRACTED_TARGET];
        for x in 2..n {
            if !seen[x] || !connected {
                self.alive[x] = false;
                self.adj[x].clear();
            }
        }
        if !connected {
            self.adj[CONTRACTED_SOURCE].clear();
            self.adj[CONTRACTED_TARGET].clear();
        }
    }

    /// Neighbours of `x` with the connecting edge ids, by neighbour id.
    pub(crate) fn star(&self, x: usize) -> Vec<(usize, usize)> {
        self.adj[x].iter().map(|(&y, &e)| (y, e)).collect()
    }

    pub(crate) fn value(&self, edge: usize) -> f64 {
        self.edges[edge].value
    }

    /// Detach vertex `x` and its edges.
    pub(crate) fn remove_vertex(&mut self, x: usize) -> Vec<(usize, usize)> {
        let star = self.star(x);
        for &(y, _) in &star {
            self.adj[y].remove(&x);
        }
        self.adj[x].clear();
        self.alive[x] = false;
        star
    }

    pub(crate) fn record_star_mesh(
        &mut self,
        x: usize,
        consumed: Vec<usize>,
        produced: Vec<usize>,
    ) {
        let before = consumed.iter().map(|&e| self.edges[e].value).collect();
        let after = produced.iter().map(|&e| self.edges[e].value).collect();
        let vertex = Some(self.original[x]);
        self.record(ReductionStep {
            kind: StepKind::StarMesh,
            vertex,
            consumed,
            produced,
            before,
            after,
        });
    }

    pub(crate) fn touch_all(&mut self, xs: &[usize]) {
        for &x in xs {
            self.touch(x);
        }
    }

    /// Apply series merges and prunes until none is possible.
    pub(crate) fn exhaust(&mut self) {
        while let Some(x) = self.pop_pending() {
            if !self.alive[x] {
                continue;
            }
            match self.adj[x].len() {
                0 => self.alive[x] = false,
                1 => {
                    let star = self.remove_vertex(x);
                    let (y, e) = star[0];
                    let vertex = Some(self.original[x]);
                    let before = vec![self.edges[e].value];
                    self.record(ReductionStep {
                        kind: StepKind::Prune,
                        vertex,
                        consumed: vec![e],
                        produced: vec![],
                        before,
                        after: vec![],
                    });
                    self.touch(y);
                }
                2 => {
                    let star = self.remove_vertex(x);
                    let ((a, e1), (b, e2)) = (star[0], star[1]);
                    let (v1, v2) = (self.edges[e1].value, self.edges[e2].value);
                    let merged = self.system.series2(v1, v2);
                    let new = self.edges.len();
                    self.edges.push(WorkEdge {
                        u: a.min(b),
                        v: a.max(b),
                        value: merged,
                    });
                    let vertex = Some(self.original[x]);
                    self.record(ReductionStep {
                        kind: StepKind::Series,
                        vertex,
                        consumed: vec![e1, e2],
                        produced: vec![new],
                        before: vec![v1, v2],
                        after: vec![merged],
                    });
                    self.attach(new);
                    self.touch(a);
                    self.touch(b);
                }
                _ => {}
            }
        }
    }

    /// Alive non-terminal vertices.
    pub(crate) fn interior(&self) -> Vec<usize> {
        (2..self.adj.len()).filter(|&x| self.alive[x]).collect()
    }

    pub(crate) fn degree(&self, x: usize) -> usize {
        self.adj[x].len()
    }

    /// Terminal-to-terminal value once every interior vertex is gone.
    pub(crate) fn terminal_value(&self) -> f64 {
        self.terminal_edge().map_or(0.0, |e| self.edges[e].value)
    }

    pub(crate) fn terminal_edge(&self) -> Option<usize> {
        self.adj[CONTRACTED_SOURCE].get(&CONTRACTED_TARGET).copied()
    }

    pub(crate) fn into_parts(self) -> (Vec<f64>, Vec<ReductionStep>) {
        (self.initial, self.trace)
    }
}

/// Reduce as far as series and parallel merges allow and report whether the
/// network collapsed to a single terminal-to-terminal link.
pub fn is_series_parallel(net: &Network) -> SpOutcome {
    let mut g = WorkGraph::new(net, RuleSystem::Classical, ReductionOrder::SmallestId);
    g.exhaust();
    let blocking = g.interior().first().map(|&x| g.original_id(x));
    let (_, trace) = g.into_parts();
    SpOutcome {
        series_parallel: blocking.is_none(),
        blocking_vertex: blocking,
        trace,
    }
}

/// Exact terminal-to-terminal value of a series-parallel network.
pub fn reduce_sp(net: &Network, system: RuleSystem) -> Result<f64> {
    reduce_sp_traced(net, system, ReductionOrder::SmallestId).map(|r| r.value)
}

pub fn reduce_sp_traced(
    net: &Network,
    system: RuleSystem,
    order: ReductionOrder,
) -> Result<SpReduction> {
    let mut g = WorkGraph::new(net, system, order);
    g.exhaust();
    if let Some(&x) = g.interior().first() {
        return Err(Error::NotSeriesParallel {
            blocking_vertex: g.original_id(x),
        });
    }
    let value = g.terminal_value();
    let final_edge = g.terminal_edge();
    let (initial, trace) = g.into_parts();
    Ok(SpReduction {
        value,
        initial,
        trace,
        final_edge,
    })
}

/// Recompute a reduction from its initial edge values. Fails if any
/// recorded input or output differs from the replayed one; returns the final
/// terminal value.
pub fn replay(reduction: &SpReduction, system: RuleSystem) -> Result<f64> {
    let mut values: BTreeMap<usize, f64> = reduction.initial.iter().copied().enumerate().collect();
    for (i, step) in reduction.trace.iter().enumerate() {
        let inputs: Vec<f64> = step
            .consumed
            .iter()
            .map(|e| {
                values
                    .remove(e)
                    .ok_or_else(|| invalid(format!("step {i} consumes unknown edge {e}")))
            })
            .collect::<Result<_>>()?;
        if inputs != step.before {
            return Err(invalid(format!("step {i} inputs differ from the trace")));
        }
        let outputs = match step.kind {
            StepKind::Series => vec![system.series(&inputs)?],
            StepKind::Parallel => vec![system.parallel(&inputs)?],
            StepKind::Prune => vec![],
            StepKind::StarMesh => step.after.clone(),
        };
        if outputs != step.after || outputs.len() != step.produced.len() {
            return Err(invalid(format!("step {i} outputs differ from the trace")));
        }
        values.extend(step.produced.iter().copied().zip(outputs));
    }
    match reduction.final_edge {
        None => Ok(0.0),
        Some(e) => values
            .get(&e)
            .copied()
            .ok_or_else(|| invalid(format!("final edge {e} was consumed"))),
    }
}

/// `reduce_sp` on a uniform-weight grid of angles (radians).
pub fn sweep_sp(net: &Network, system: RuleSystem, thetas: &[f64]) -> Result<SweepCurve> {
    let outcome = is_series_parallel(net);
    if let Some(v) = outcome.blocking_vertex {
        return Err(Error::NotSeriesParallel { blocking_vertex: v });
    }
    let values = thetas
        .par_iter()
        .map(|&t| reduce_sp(&net.with_uniform_weight(LinkWeight::new(t)?), system))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SweepCurve {
        thetas: thetas.to_vec(),
        values,
        system,
        method: Method::ExactSp,
    })
}

/// Exact root-to-leaves value of a uniform Bethe tree by layer recursion.
/// Matches `reduce_sp` on the generated tree without building it.
pub fn bethe_exact(k: usize, layers: usize, system: RuleSystem, w: LinkWeight) -> Result<f64> {
    if k < 2 || layers < 1 {
        return Err(invalid(format!("Bethe tree needs k >= 2 and L >= 1 (got {k}, {layers})")));
    }
    Ok(bethe_exact_value(k, layers, system, system.value(w)))
}

pub(crate) fn bethe_exact_value(k: usize, layers: usize, system: RuleSystem, x: f64) -> f64 {
    let mut v = 1.0;
    for layer in (0..layers).rev() {
        let branches = if layer == 0 { k } else { k - 1 };
        let mut acc = ParallelAcc::new(system);
        acc.push_many(system.series2(x, v), branches as f64);
        v = acc.finish();
    }
    v
}
