//! Weighted networks, terminal sets, generators and JSON I/O.
//!
//! Every link carries a single parameter `theta` in `[0, pi/4]`. The classical
//! view is `p = 2 sin^2(theta)` and the concurrence view is `c = sin(2 theta)`.

use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type NodeId = usize;

/// Largest network a generator will build.
pub const MAX_GENERATED_NODES: usize = 20_000_000;

/// Link parameter `theta` in radians, validated to lie in `[0, pi/4]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct LinkWeight(f64);

impl LinkWeight {
    pub const MAX_THETA: f64 = FRAC_PI_4;

    pub fn new(theta: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_4).contains(&theta) {
            return Err(Error::OutOfRange {
                what: "theta",
                value: theta,
                lo: 0.0,
                hi: FRAC_PI_4,
            });
        }
        Ok(LinkWeight(theta))
    }

    /// `theta` given as a fraction of `pi/4`.
    pub fn from_quarter_pi(units: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&units) {
            return Err(Error::OutOfRange {
                what: "theta/(pi/4)",
                value: units,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(LinkWeight((units * FRAC_PI_4).min(FRAC_PI_4)))
    }

    pub fn from_p(p: f64) -> Result<Self> {
        theta_from_p(p).map(LinkWeight)
    }

    pub fn from_c(c: f64) -> Result<Self> {
        theta_from_c(c).map(LinkWeight)
    }

    pub fn theta(self) -> f64 {
        self.0
    }

    pub fn quarter_pi(self) -> f64 {
        self.0 / FRAC_PI_4
    }

    pub fn p(self) -> f64 {
        let s = self.0.sin();
        2.0 * s * s
    }

    pub fn c(self) -> f64 {
        (2.0 * self.0).sin()
    }
}

impl<'de> Deserialize<'de> for LinkWeight {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let theta = f64::deserialize(d)?;
        LinkWeight::new(theta).map_err(serde::de::Error::custom)
    }
}

/// `(p, c)` for a link parameter in radians.
pub fn weight_views(theta: f64) -> Result<(f64, f64)> {
    let w = LinkWeight::new(theta)?;
    Ok((w.p(), w.c()))
}

/// Inverse of `p = 2 sin^2(theta)`.
pub fn theta_from_p(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            what: "p",
            value: p,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok((p / 2.0).sqrt().asin().min(FRAC_PI_4))
}

/// Inverse of `c = sin(2 theta)` on `[0, pi/4]`.
pub fn theta_from_c(c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::OutOfRange {
            what: "c",
            value: c,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok((0.5 * c.asin()).min(FRAC_PI_4))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub theta: LinkWeight,
}

impl Edge {
    pub fn new(u: NodeId, v: NodeId, theta: LinkWeight) -> Self {
        Edge { u, v, theta }
    }

    /// Endpoints with the smaller id first.
    pub fn key(&self) -> (NodeId, NodeId) {
        if self.u <= self.v {
            (self.u, self.v)
        } else {
            (self.v, self.u)
        }
    }
}

/// Undirected multigraph with per-link weights and disjoint terminal sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    node_count: usize,
    edges: Vec<Edge>,
    sources: Vec<NodeId>,
    targets: Vec<NodeId>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
    #[serde(rename = "S")]
    sources: Vec<NodeId>,
    #[serde(rename = "T")]
    targets: Vec<NodeId>,
}

impl Network {
    pub fn new(
        node_count: usize,
        edges: Vec<Edge>,
        sources: Vec<NodeId>,
        targets: Vec<NodeId>,
    ) -> Result<Self> {
        for e in &edges {
            if e.u >= node_count || e.v >= node_count {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({}, {}) references a node outside 0..{node_count}",
                    e.u, e.v
                )));
            }
            if e.u == e.v {
                return Err(Error::InvalidNetwork(format!("self-loop at node {}", e.u)));
            }
        }
        let sources = normalize_terminals(sources, node_count, "S")?;
        let targets = normalize_terminals(targets, node_count, "T")?;
        if let Some(x) = sources.iter().find(|x| targets.binary_search(x).is_ok()) {
            return Err(Error::InvalidNetwork(format!(
                "node {x} is in both S and T"
            )));
        }
        Ok(Network {
            node_count,
            edges,
            sources,
            targets,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn sources(&self) -> &[NodeId] {
        &self.sources
    }

    pub fn targets(&self) -> &[NodeId] {
        &self.targets
    }

    /// Same topology and terminals, every link set to `w`.
    pub fn with_uniform_weight(&self, w: LinkWeight) -> Network {
        let mut out = self.clone();
        for e in &mut out.edges {
            e.theta = w;
        }
        out
    }

    pub fn with_terminals(&self, sources: Vec<NodeId>, targets: Vec<NodeId>) -> Result<Network> {
        Network::new(self.node_count, self.edges.clone(), sources, targets)
    }

    /// `adjacency()[u]` lists `(neighbour, edge index)`, in edge order.
    pub fn adjacency(&self) -> Vec<Vec<(NodeId, usize)>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.u].push((e.v, i));
            adj[e.v].push((e.u, i));
        }
        adj
    }

    pub fn degree(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    pub fn to_json(&self) -> Result<String> {
        let file = NetworkFile {
            nodes: (0..self.node_count).collect(),
            edges: self.edges.clone(),
            sources: self.sources.clone(),
            targets: self.targets.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        let n = file.nodes.len();
        let mut seen = vec![false; n];
        for &id in &file.nodes {
            if id >= n || std::mem::replace(&mut seen[id], true) {
                return Err(Error::InvalidNetwork(format!(
                    "node ids must be exactly 0..{n} (offending id {id})"
                )));
            }
        }
        Network::new(n, file.edges, file.sources, file.targets)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Network::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn normalize_terminals(mut ids: Vec<NodeId>, n: usize, name: &str) -> Result<Vec<NodeId>> {
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(Error::InvalidNetwork(format!("terminal set {name} is empty")));
    }
    if let Some(&x) = ids.iter().find(|&&x| x >= n) {
        return Err(Error::InvalidNetwork(format!(
            "terminal {x} in {name} is not a node"
        )));
    }
    Ok(ids)
}

/// Network with `S` merged into node 0 and `T` merged into node 1.
#[derive(Debug, Clone)]
pub struct ContractedNetwork {
    pub network: Network,
    /// `node_map[old] = new`.
    pub node_map: Vec<NodeId>,
}

pub const CONTRACTED_SOURCE: NodeId = 0;
pub const CONTRACTED_TARGET: NodeId = 1;

/// Merge every source into a single node 0 and every target into node 1.
/// Links inside `S` or inside `T` disappear; the remaining nodes keep their
/// relative order starting at id 2.
pub fn contract_terminals(net: &Network) -> ContractedNetwork {
    let mut node_map = vec![usize::MAX; net.node_count()];
    for &s in net.sources() {
        node_map[s] = CONTRACTED_SOURCE;
    }
    for &t in net.targets() {
        node_map[t] = CONTRACTED_TARGET;
    }
    let mut next = 2;
    for slot in node_map.iter_mut() {
        if *slot == usize::MAX {
            *slot = next;
            next += 1;
        }
    }
    let edges = net
        .edges()
        .iter()
        .filter_map(|e| {
            let (u, v) = (node_map[e.u], node_map[e.v]);
            (u != v).then(|| Edge::new(u, v, e.theta))
        })
        .collect();
    let network = Network {
        node_count: next,
        edges,
        sources: vec![CONTRACTED_SOURCE],
        targets: vec![CONTRACTED_TARGET],
    };
    ContractedNetwork { network, node_map }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeFamily {
    Square,
    Honeycomb,
    Triangular,
}

impl std::str::FromStr for LatticeFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(LatticeFamily::Square),
            "honeycomb" => Ok(LatticeFamily::Honeycomb),
            "triangular" => Ok(LatticeFamily::Triangular),
            _ => Err(invalid(format!("unknown lattice family {s:?}"))),
        }
    }
}

/// Everything needed to rebuild a generated network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Topology {
    Bethe { k: usize, layers: usize },
    Square { n: usize },
    Honeycomb { n: usize },
    Triangular { n: usize },
    ErdosRenyi { nodes: usize, mean_degree: f64, seed: u64 },
    BarabasiAlbert { nodes: usize, links_per_node: usize, seed: u64 },
}

impl Topology {
    pub fn lattice(family: LatticeFamily, n: usize) -> Self {
        match family {
            LatticeFamily::Square => Topology::Square { n },
            LatticeFamily::Honeycomb => Topology::Honeycomb { n },
            LatticeFamily::Triangular => Topology::Triangular { n },
        }
    }

    pub fn build(&self, w: LinkWeight) -> Result<Network> {
        match *self {
            Topology::Bethe { k, layers } => bethe_lattice(k, layers, w),
            Topology::Square { n } => lattice(LatticeFamily::Square, n, w),
            Topology::Honeycomb { n } => lattice(LatticeFamily::Honeycomb, n, w),
            Topology::Triangular { n } => lattice(LatticeFamily::Triangular, n, w),
            Topology::ErdosRenyi {
                nodes,
                mean_degree,
                seed,
            } => erdos_renyi(nodes, mean_degree, seed, w),
            Topology::BarabasiAlbert {
                nodes,
                links_per_node,
                seed,
            } => barabasi_albert(nodes, links_per_node, seed, w),
        }
    }
}

/// Number of nodes in a Bethe tree, or `None` on overflow.
pub fn bethe_node_count(k: usize, layers: usize) -> Option<usize> {
    let mut total: usize = 1;
    let mut width: usize = 1;
    for layer in 0..layers {
        width = width.checked_mul(if layer == 0 { k } else { k - 1 })?;
        total = total.checked_add(width)?;
    }
    Some(total)
}

/// Tree where the root has `k` children and every other internal node has
/// `k - 1`. The root (id 0) is the source and the leaves of the last layer
/// are the targets. Ids follow breadth-first order.
pub fn bethe_lattice(k: usize, layers: usize, w: LinkWeight) -> Result<Network> {
    if k < 2 {
        return Err(invalid(format!("Bethe coordination number k = {k} must be >= 2")));
    }
    if layers < 1 {
        return Err(invalid("Bethe lattice needs at least one layer"));
    }
    match bethe_node_count(k, layers) {
        Some(n) if n <= MAX_GENERATED_NODES => {}
        _ => {
            return Err(invalid(format!(
                "Bethe lattice k = {k}, L = {layers} exceeds {MAX_GENERATED_NODES} nodes"
            )))
        }
    }
    let mut edges = Vec::new();
    let mut frontier = vec![0usize];
    let mut next = 1usize;
    for layer in 0..layers {
        let children = if layer == 0 { k } else { k - 1 };
        let mut new_frontier = Vec::with_capacity(frontier.len() * children);
        for &parent in &frontier {
            for _ in 0..children {
                edges.push(Edge::new(parent, next, w));
                new_frontier.push(next);
                next += 1;
            }
        }
        frontier = new_frontier;
    }
    Network::new(next, edges, vec![0], frontier)
}

/// `n x n` lattice patch. Node `(x, y)` has id `y * n + x`; the left column
/// is `S` and the right column is `T`.
///
/// * square: nearest neighbours;
/// * triangular: square plus the `(x, y)-(x+1, y+1)` diagonals;
/// * honeycomb: brick-wall layout, all horizontal bonds and a vertical bond
///   above `(x, y)` whenever `x + y` is even.
pub fn lattice(family: LatticeFamily, n: usize, w: LinkWeight) -> Result<Network> {
    if n < 2 {
        return Err(invalid(format!("lattice side n = {n} must be >= 2")));
    }
    if n.checked_mul(n).map_or(true, |nn| nn > MAX_GENERATED_NODES) {
        return Err(invalid(format!("lattice side n = {n} is too large")));
    }
    let id = |x: usize, y: usize| y * n + x;
    let mut edges = Vec::new();
    for y in 0..n {
        for x in 0..n {
            if x + 1 < n {
                edges.push(Edge::new(id(x, y), id(x + 1, y), w));
            }
            if y + 1 < n {
                let vertical = match family {
                    LatticeFamily::Honeycomb => (x + y) % 2 == 0,
                    _ => true,
                };
                if vertical {
                    edges.push(Edge::new(id(x, y), id(x, y + 1), w));
                }
                if family == LatticeFamily::Triangular && x + 1 < n {
                    edges.push(Edge::new(id(x, y), id(x + 1, y + 1), w));
                }
            }
        }
    }
    let sources = (0..n).map(|y| id(0, y)).collect();
    let targets = (0..n).map(|y| id(n - 1, y)).collect();
    Network::new(n * n, edges, sources, targets)
}

/// G(N, q) with `q = mean_degree / (N - 1)`, terminals at a diametral pair.
pub fn erdos_renyi(nodes: usize, mean_degree: f64, seed: u64, w: LinkWeight) -> Result<Network> {
    if nodes < 2 || nodes > MAX_GENERATED_NODES {
        return Err(invalid(format!("Erdos-Renyi size N = {nodes} out of range")));
    }
    let q = mean_degree / (nodes - 1) as f64;
    if !(0.0..=1.0).contains(&q) || !q.is_finite() {
        return Err(invalid(format!(
            "mean degree {mean_degree} is not achievable with {nodes} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    if q >= 1.0 {
        for v in 1..nodes {
            for u in 0..v {
                pairs.push((u, v));
            }
        }
    } else if q > 0.0 {
        // Skip ahead geometrically over the lower-triangular pair sequence.
        let log_q = (1.0 - q).ln();
        let (mut v, mut u) = (1usize, -1i64);
        loop {
            let r: f64 = rng.gen();
            u += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
            while v < nodes && u >= v as i64 {
                u -= v as i64;
                v += 1;
            }
            if v >= nodes {
                break;
            }
            pairs.push((u as usize, v));
        }
    }
    with_diametral_terminals(nodes, pairs, w)
}

/// Preferential attachment. Starts from a clique on `links_per_node` nodes;
/// each new node links to that many distinct existing nodes.
pub fn barabasi_albert(
    nodes: usize,
    links_per_node: usize,
    seed: u64,
    w: LinkWeight,
) -> Result<Network> {
    let z = links_per_node;
    if z < 1 {
        return Err(invalid("Barabasi-Albert needs at least one link per node"));
    }
    if nodes <= z || nodes > MAX_GENERATED_NODES {
        return Err(invalid(format!(
            "Barabasi-Albert size N = {nodes} must exceed z = {z}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    // Every edge endpoint, so a uniform pick is degree-proportional.
    let mut ends: Vec<NodeId> = Vec::new();
    for v in 1..z {
        for u in 0..v {
            pairs.push((u, v));
            ends.push(u);
            ends.push(v);
        }
    }
    let mut chosen = Vec::with_capacity(z);
    for v in z..nodes {
        chosen.clear();
        while chosen.len() < z {
            let t = if ends.is_empty() {
                rng.gen_range(0..v)
            } else {
                ends[rng.gen_range(0..ends.len())]
            };
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for &t in &chosen {
            pairs.push((t, v));
            ends.push(t);
            ends.push(v);
        }
    }
    with_diametral_terminals(nodes, pairs, w)
}

fn with_diametral_terminals(
    nodes: usize,
    pairs: Vec<(NodeId, NodeId)>,
    w: LinkWeight,
) -> Result<Network> {
    let edges: Vec<Edge> = pairs.into_iter().map(|(u, v)| Edge::new(u, v, w)).collect();
    let (s, t) = diametral_pair(nodes, &edges)?;
    Network::new(nodes, edges, vec![s], vec![t])
}

/// Pair `(s, t)`, `s < t`, at maximal hop distance inside the largest
/// connected component; ties go to the lexicographically smallest pair.
pub fn diametral_pair(nodes: usize, edges: &[Edge]) -> Result<(NodeId, NodeId)> {
    let mut adj = vec![Vec::new(); nodes];
    for e in edges {
        adj[e.u].push(e.v);
        adj[e.v].push(e.u);
    }
    let component = largest_component(&adj);
    if component.len() < 2 {
        return Err(Error::NoTerminals(
            "largest connected component has fewer than two nodes".into(),
        ));
    }
    let mut best = (0usize, usize::MAX, usize::MAX);
    let mut dist = vec![usize::MAX; nodes];
    let mut queue = VecDeque::new();
    for &s in &component {
        for &x in &component {
            dist[x] = usize::MAX;
        }
        dist[s] = 0;
        queue.push_back(s);
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        for &t in &component {
            if t > s {
                let d = dist[t];
                if d > best.0 || (d == best.0 && (s, t) < (best.1, best.2)) {
                    best = (d, s, t);
                }
            }
        }
    }
    Ok((best.1, best.2))
}

/// Sorted members of the largest component; ties go to the one holding the
/// smallest node id.
fn largest_component(adj: &[Vec<NodeId>]) -> Vec<NodeId> {
    let n = adj.len();
    let mut label = vec![usize::MAX; n];
    let mut best: Vec<NodeId> = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut members = vec![start];
        label[start] = start;
        let mut i = 0;
        while i < members.len() {
            let x = members[i];
            i += 1;
            for &y in &adj[x] {
                if label[y] == usize::MAX {
                    label[y] = start;
                    members.push(y);
                }
            }
        }
        if members.len() > best.len() {
            best = members;
        }
    }
    best.sort_unstable();
    best
}

/// Random two-terminal series-parallel network: start from one link between
/// the terminals and apply `steps` random series splits or parallel doublings.
/// Link angles are uniform on `[0, pi/4]`.
pub fn random_series_parallel(steps: usize, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ends = vec![(0usize, 1usize)];
    let mut next = 2;
    for _ in 0..steps {
        let i = rng.gen_range(0..ends.len());
        if rng.gen_bool(0.5) {
            let (u, v) = ends[i];
            ends[i] = (u, next);
            ends.push((next, v));
            next += 1;
        } else {
            ends.push(ends[i]);
        }
    }
    let edges = ends
        .into_iter()
        .map(|(u, v)| Edge::new(u, v, LinkWeight(rng.gen_range(0.0..=FRAC_PI_4))))
        .collect();
    Network::new(next, edges, vec![0], vec![1]).expect("valid by construction")
}

/// Random connected simple graph on `nodes` vertices with `edges` links
/// (a random spanning tree plus extra random pairs) and random angles.
/// Terminals are nodes 0 and `nodes - 1`.
pub fn random_graph(nodes: usize, edges: usize, seed: u64) -> Result<Network> {
    if nodes < 2 || edges + 1 < nodes || edges > nodes * (nodes - 1) / 2 {
        return Err(invalid(format!(
            "cannot build a simple connected graph with {nodes} nodes and {edges} edges"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = std::collections::BTreeSet::new();
    for v in 1..nodes {
        let u = rng.gen_range(0..v);
        pairs.insert((u, v));
    }
    while pairs.len() < edges {
        let u = rng.gen_range(0..nodes);
        let v = rng.gen_range(0..nodes);
        if u != v {
            pairs.insert((u.min(v), u.max(v)));
        }
    }
    let list = pairs
        .into_iter()
        .map(|(u, v)| Edge::new(u, v, LinkWeight(rng.gen_range(0.0..=FRAC_PI_4))))
        .collect();
    Network::new(nodes, list, vec![0], vec![nodes - 1])
}
