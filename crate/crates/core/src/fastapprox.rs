//! Fast approximate connectivity: every counted path is treated as an
//! independent parallel branch, and only the `m` shortest length classes of
//! each terminal pair are counted.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::FRAC_PI_4;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exactsc::{CountSource, PathEnsemble};
use crate::netcore::{lattice, LatticeFamily, LinkWeight, Network, Topology};
use crate::rules::{ParallelAcc, RuleSystem};

/// Which evaluator produced a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    ExactSp,
    StarMesh,
    /// `classes: None` means every path length.
    ParallelApprox { classes: Option<usize> },
    ExactClassical,
    BetheRecursion,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::ExactSp => f.write_str("exact-sp"),
            Method::StarMesh => f.write_str("star-mesh"),
            Method::ParallelApprox { classes: Some(m) } => write!(f, "parallel-approx(S{m})"),
            Method::ParallelApprox { classes: None } => f.write_str("parallel-approx(all)"),
            Method::ExactClassical => f.write_str("exact-classical"),
            Method::BetheRecursion => f.write_str("bethe-recursion"),
        }
    }
}

/// Terminal-to-terminal value sampled on a grid of uniform link angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    /// Radians, strictly increasing.
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub system: RuleSystem,
    pub method: Method,
}

impl SweepCurve {
    /// Evaluate `f` on `thetas` (in parallel, order preserved).
    pub fn sample<F>(thetas: &[f64], system: RuleSystem, method: Method, f: F) -> Result<Self>
    where
        F: Fn(LinkWeight) -> Result<f64> + Sync,
    {
        if thetas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("sweep angles must be strictly increasing"));
        }
        let values = thetas
            .par_iter()
            .map(|&t| f(LinkWeight::new(t)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepCurve {
            thetas: thetas.to_vec(),
            values,
            system,
            method,
        })
    }
}

/// `count` angles evenly spaced on `[0, pi/4]`.
pub fn theta_grid(count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![FRAC_PI_4],
        _ => (0..count)
            .map(|i| FRAC_PI_4 * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Limits for shortest-class path enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmSpec {
    /// Length classes kept per terminal pair; `None` only for closed forms.
    pub classes: Option<usize>,
    /// Paths enumerated per terminal pair before giving up on that pair.
    pub per_pair_cap: u64,
    /// Longest path considered, as a multiple of the pair's distance.
    pub length_factor: usize,
}

impl SmSpec {
    pub const DEFAULT_PER_PAIR_CAP: u64 = 1_000_000;

    pub fn new(classes: usize) -> Self {
        SmSpec {
            classes: Some(classes),
            per_pair_cap: Self::DEFAULT_PER_PAIR_CAP,
            length_factor: 4,
        }
    }

    pub fn unbounded(classes: usize) -> Self {
        SmSpec {
            per_pair_cap: u64::MAX,
            ..SmSpec::new(classes)
        }
    }
}

/// Parallel approximation: every path of length `l` contributes `x^l` as an
/// independent parallel branch.
pub fn parallel_approx(ensemble: &PathEnsemble, system: RuleSystem, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange {
            what: "link value",
            value: x,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let mut acc = ParallelAcc::new(system);
    for (&len, &count) in &ensemble.counts {
        if count > 0.0 {
            acc.push_many(x.powi(len as i32), count);
        }
    }
    Ok(acc.finish())
}

/// Root-to-leaves paths of a Bethe tree: `k (k-1)^(L-1)` paths of length `L`.
pub fn count_paths_bethe(k: usize, layers: usize) -> Result<PathEnsemble> {
    if k < 2 || layers < 1 {
        return Err(invalid(format!("Bethe tree needs k >= 2 and L >= 1 (got {k}, {layers})")));
    }
    let count = k as f64 * ((k - 1) as f64).powi(layers as i32 - 1);
    Ok(PathEnsemble {
        counts: BTreeMap::from([(layers, count)]),
        classes: None,
        source: CountSource::ClosedForm,
        truncated: false,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// Left-column to right-column paths of the `n x n` square patch, keeping the
/// `m` shortest length classes of every `(s, t)` pair. Interior vertices
/// avoid both terminal columns. `m = 1` uses the binomial count of monotone
/// paths, `m` of 2 or 3 an exact walk recursion; larger `m` enumerates.
pub fn count_paths_square(n: usize, m: usize) -> Result<PathEnsemble> {
    if n < 2 {
        return Err(invalid(format!("square lattice side n = {n} must be >= 2")));
    }
    if m < 1 {
        return Err(invalid("need at least one length class"));
    }
    if n == 2 {
        // Only the two horizontal links connect the columns.
        return Ok(PathEnsemble {
            counts: BTreeMap::from([(1, 2.0)]),
            classes: Some(m),
            source: CountSource::ClosedForm,
            truncated: false,
        });
    }
    match m {
        1 => {
            let mut counts = BTreeMap::new();
            for y0 in 0..n {
                for y1 in 0..n {
                    let dy = y0.abs_diff(y1);
                    *counts.entry(n - 1 + dy).or_insert(0.0) += binomial(n - 3 + dy, dy);
                }
            }
            Ok(PathEnsemble {
                counts,
                classes: Some(1),
                source: CountSource::ClosedForm,
                truncated: false,
            })
        }
        2 | 3 => Ok(square_walk_counts(n, m)),
        _ => {
            let net = lattice(LatticeFamily::Square, n, LinkWeight::new(FRAC_PI_4)?)?;
            ksp_enumerate(&net, &SmSpec::unbounded(m))
        }
    }
}

// Steps: right, left, up, down, and "none" for missing history.
const STEP: [(i32, i32); 5] = [(1, 0), (-1, 0), (0, 1), (0, -1), (0, 0)];
const NONE: usize = 4;

/// Walks through the interior columns that never reverse and never close a
/// unit square. With at most two backward steps (excess <= 4, i.e. m <= 3)
/// those are the only ways to revisit a vertex, so the counts are exact.
fn square_walk_counts(n: usize, m: usize) -> PathEnsemble {
    let rows: Vec<BTreeMap<usize, f64>> = (0..n)
        .into_par_iter()
        .map(|y0| walks_from_row(n, m, y0))
        .collect();
    let mut counts = BTreeMap::new();
    for row in rows {
        for (l, c) in row {
            *counts.entry(l).or_insert(0.0) += c;
        }
    }
    PathEnsemble {
        counts,
        classes: Some(m),
        source: CountSource::Recursion,
        truncated: false,
    }
}

fn walks_from_row(n: usize, m: usize, y0: usize) -> BTreeMap<usize, f64> {
    let excess = 2 * (m - 1);
    let shortest = |y1: usize| n - 1 + y0.abs_diff(y1);
    let longest = (0..n).map(shortest).max().unwrap() + excess;
    let width = n - 2; // interior columns 1..=n-2
    let cell = |x: usize, y: usize| ((x - 1) * n + y) * 125;
    let mut cur = vec![0.0f64; width * n * 125];
    // After the forced first step into column 1; history (none, none, right).
    cur[cell(1, y0) + NONE * 25 + NONE * 5] = 1.0;
    let mut out = BTreeMap::new();
    for len in 1..longest {
        let mut next = vec![0.0f64; cur.len()];
        for x in 1..=width {
            for y in 0..n {
                let base = cell(x, y);
                for hist in 0..125 {
                    let count = cur[base + hist];
                    if count == 0.0 {
                        continue;
                    }
                    let (a, b, c) = (hist / 25, hist / 5 % 5, hist % 5);
                    for (d, &(dx, dy)) in STEP.iter().enumerate().take(4) {
                        let (pdx, pdy) = STEP[c];
                        if pdx == -dx && pdy == -dy && c != NONE {
                            continue;
                        }
                        let sx = STEP[a].0 + STEP[b].0 + STEP[c].0 + dx;
                        let sy = STEP[a].1 + STEP[b].1 + STEP[c].1 + dy;
                        if sx == 0 && sy == 0 && a != NONE {
                            continue;
                        }
                        let nx = x as i32 + dx;
                        let ny = y as i32 + dy;
                        if ny < 0 || ny >= n as i32 {
                            continue;
                        }
                        let nx = nx as usize;
                        let ny = ny as usize;
                        if nx == n - 1 {
                            let l = len + 1;
                            let l1 = shortest(ny);
                            if l >= l1 && l <= l1 + excess && (l - l1) % 2 == 0 {
                                *out.entry(l).or_insert(0.0) += count;
                            }
                            continue;
                        }
                        if nx == 0 {
                            continue;
                        }
                        next[cell(nx, ny) + b * 25 + c * 5 + d] += count;
                    }
                }
            }
        }
        cur = next;
    }
    out
}

/// Paths between every `s` in `S` and `t` in `T` whose interior avoids both
/// sets, keeping the `m` shortest distinct lengths of each pair.
pub fn ksp_enumerate(net: &Network, spec: &SmSpec) -> Result<PathEnsemble> {
    let m = spec
        .classes
        .ok_or_else(|| invalid("enumeration needs a finite number of length classes"))?;
    if m < 1 {
        return Err(invalid("need at least one length class"));
    }
    let csr = Csr::new(net);
    let step = if csr.bipartite() { 2 } else { 1 };
    let pairs: Vec<(usize, usize)> = net
        .sources()
        .iter()
        .flat_map(|&s| net.targets().iter().map(move |&t| (s, t)))
        .collect();
    // One distance map per target, shared by all sources.
    let dists: BTreeMap<usize, Vec<u32>> = net
        .targets()
        .par_iter()
        .map(|&t| (t, csr.distances_to(t)))
        .collect();
    let per_pair: Vec<(BTreeMap<usize, f64>, bool)> = pairs
        .par_iter()
        .map(|&(s, t)| csr.pair_classes(s, t, &dists[&t], m, step, spec))
        .collect();
    let mut counts = BTreeMap::new();
    let mut truncated = false;
    for (pc, tr) in per_pair {
        truncated |= tr;
        for (l, c) in pc {
            *counts.entry(l).or_insert(0.0) += c;
        }
    }
    Ok(PathEnsemble {
        counts,
        classes: Some(m),
        source: CountSource::Enumeration,
        truncated,
    })
}

struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    /// 0 interior, 1 source, 2 target.
    role: Vec<u8>,
}

impl Csr {
    fn new(net: &Network) -> Self {
        let n = net.node_count();
        let mut offsets = vec![0usize; n + 1];
        for e in net.edges() {
            offsets[e.u + 1] += 1;
            offsets[e.v + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0u32; offsets[n]];
        for e in net.edges() {
            targets[fill[e.u]] = e.v as u32;
            fill[e.u] += 1;
            targets[fill[e.v]] = e.u as u32;
            fill[e.v] += 1;
        }
        let mut role = vec![0u8; n];
        for &s in net.sources() {
            role[s] = 1;
        }
        for &t in net.targets() {
            role[t] = 2;
        }
        Csr {
            offsets,
            targets,
            role,
        }
    }

    fn neighbours(&self, x: usize) -> &[u32] {
        &self.targets[self.offsets[x]..self.offsets[x + 1]]
    }

    fn bipartite(&self) -> bool {
        let n = self.role.len();
        let mut colour = vec![u8::MAX; n];
        for start in 0..n {
            if colour[start] != u8::MAX {
                continue;
            }
            colour[start] = 0;
            let mut queue = VecDeque::from([start]);
            while let Some(x) = queue.pop_front() {
                for &y in self.neighbours(x) {
                    let y = y as usize;
                    if colour[y] == u8::MAX {
                        colour[y] = colour[x] ^ 1;
                        queue.push_back(y);
                    } else if colour[y] == colour[x] {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Hop distance to `t` using only non-terminal intermediate vertices.
    fn distances_to(&self, t: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.role.len()];
        dist[t] = 0;
        let mut queue = VecDeque::from([t]);
        while let Some(x) = queue.pop_front() {
            for &y in self.neighbours(x) {
                let y = y as usize;
                if dist[y] == u32::MAX && self.role[y] == 0 {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    fn pair_classes(
        &self,
        s: usize,
        t: usize,
        dist: &[u32],
        m: usize,
        step: usize,
        spec: &SmSpec,
    ) -> (BTreeMap<usize, f64>, bool) {
        let shortest = self
            .neighbours(s)
            .iter()
            .map(|&y| dist[y as usize])
            .min()
            .unwrap_or(u32::MAX);
        if shortest == u32::MAX {
            return (BTreeMap::new(), false);
        }
        let l1 = shortest as usize + 1;
        let cap_len = (spec.length_factor * l1).max(l1);
        let mut budget = (l1 + (m - 1) * step).min(cap_len);
        loop {
            let mut walk = PairWalk {
                csr: self,
                dist,
                t,
                budget,
                cap: spec.per_pair_cap,
                found: 0,
                counts: BTreeMap::new(),
                visited: vec![false; self.role.len()],
            };
            let complete = walk.from_source(s);
            let mut counts = walk.counts;
            if !complete || counts.len() >= m || budget >= cap_len {
                while counts.len() > m {
                    let last = *counts.keys().next_back().unwrap();
                    counts.remove(&last);
                }
                return (counts, !complete);
            }
            budget = (budget + step).min(cap_len);
        }
    }
}

struct PairWalk<'a> {
    csr: &'a Csr,
    dist: &'a [u32],
    t: usize,
    budget: usize,
    cap: u64,
    found: u64,
    counts: BTreeMap<usize, f64>,
    visited: Vec<bool>,
}

impl PairWalk<'_> {
    fn from_source(&mut self, s: usize) -> bool {
        for &y in self.csr.neighbours(s) {
            if !self.step_into(y as usize, 1) {
                return false;
            }
        }
        true
    }

    /// Extend the path into `y` at length `len`. False once the cap is hit.
    fn step_into(&mut self, y: usize, len: usize) -> bool {
        if y == self.t {
            *self.counts.entry(len).or_insert(0.0) += 1.0;
            self.found += 1;
            return self.found < self.cap;
        }
        if self.csr.role[y] != 0 || self.visited[y] {
            return true;
        }
        let d = self.dist[y];
        if d == u32::MAX || len + d as usize > self.budget {
            return true;
        }
        self.visited[y] = true;
        let csr = self.csr;
        for &z in csr.neighbours(y) {
            if !self.step_into(z as usize, len + 1) {
                self.visited[y] = false;
                return false;
            }
        }
        self.visited[y] = false;
        true
    }
}

/// Path ensemble for a generated topology: closed forms where available,
/// enumeration otherwise.
pub fn topology_ensemble(topology: &Topology, spec: &SmSpec) -> Result<PathEnsemble> {
    match *topology {
        Topology::Bethe { k, layers } => count_paths_bethe(k, layers),
        Topology::Square { n } if matches!(spec.classes, Some(m) if m <= 3) => {
            count_paths_square(n, spec.classes.unwrap())
        }
        _ => {
            let net = topology.build(LinkWeight::new(FRAC_PI_4)?)?;
            ksp_enumerate(&net, spec)
        }
    }
}

/// Half-point estimate of a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    /// Radians.
    pub theta: f64,
    /// Same angle in units of `pi/4`.
    pub theta_quarter_pi: f64,
    pub c: f64,
    pub p: f64,
    /// Width of the final bisection bracket, radians.
    pub bracket: f64,
}

impl ThresholdEstimate {
    pub fn at(theta: f64, bracket: f64) -> Self {
        let w = LinkWeight::new(theta.clamp(0.0, FRAC_PI_4)).expect("clamped");
        ThresholdEstimate {
            theta: w.theta(),
            theta_quarter_pi: w.quarter_pi(),
            c: w.c(),
            p: w.p(),
            bracket,
        }
    }
}

/// Bisection tolerance on the angle, radians.
pub const HALFPOINT_TOLERANCE: f64 = 1e-5;

/// Angle where `evaluator` crosses 1/2, bracketed by the first crossing on
/// `curve` and refined by bisection to [`HALFPOINT_TOLERANCE`].
pub fn threshold_halfpoint<F>(curve: &SweepCurve, evaluator: F) -> Result<ThresholdEstimate>
where
    F: Fn(LinkWeight) -> Result<f64>,
{
    let n = curve.thetas.len();
    let idx = (0..n.saturating_sub(1))
        .find(|&i| curve.values[i] < 0.5 && curve.values[i + 1] >= 0.5)
        .ok_or(Error::NoBracket {
            lo: curve.values.first().copied().unwrap_or(f64::NAN),
            hi: curve.values.last().copied().unwrap_or(f64::NAN),
        })?;
    bisect_half(curve.thetas[idx], curve.thetas[idx + 1], &evaluator)
}

fn bisect_half<F>(mut lo: f64, mut hi: f64, f: &F) -> Result<ThresholdEstimate>
where
    F: Fn(LinkWeight) -> Result<f64>,
{
    while hi - lo > HALFPOINT_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if f(LinkWeight::new(mid)?)? < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdEstimate::at(0.5 * (lo + hi), hi - lo))
}

/// Half-point of the parallel approximation over `ensemble`.
pub fn ensemble_threshold(ensemble: &PathEnsemble, system: RuleSystem) -> Result<ThresholdEstimate> {
    let f = |w: LinkWeight| parallel_approx(ensemble, system, system.value(w));
    if ensemble.total() == 0.0 {
        return Err(Error::NoBracket { lo: 0.0, hi: 0.0 });
    }
    bisect_half(0.0, FRAC_PI_4, &f)
}

/// Parallel-approximation sweep over `ensemble`.
pub fn sweep_approx(ensemble: &PathEnsemble, system: RuleSystem, thetas: &[f64]) -> Result<SweepCurve> {
    SweepCurve::sample(
        thetas,
        system,
        Method::ParallelApprox {
            classes: ensemble.classes,
        },
        |w| parallel_approx(ensemble, system, system.value(w)),
    )
}

/// Threshold averaged over random realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleThreshold {
    /// Mean threshold angle in units of `pi/4`.
    pub mean: f64,
    pub stderr: f64,
    pub realizations: usize,
    pub samples: Vec<f64>,
    /// Realizations whose enumeration hit the per-pair cap.
    pub truncated: usize,
}

/// Half-point threshold of each seeded realization, averaged.
pub fn random_ensemble_threshold<F>(
    make: F,
    seeds: &[u64],
    spec: &SmSpec,
    system: RuleSystem,
) -> Result<EnsembleThreshold>
where
    F: Fn(u64) -> Topology + Sync,
{
    if seeds.len() < 2 {
        return Err(invalid("need at least two realizations for a standard error"));
    }
    let results = seeds
        .par_iter()
        .map(|&seed| {
            let ens = topology_ensemble(&make(seed), spec)?;
            Ok((ensemble_threshold(&ens, system)?.theta_quarter_pi, ens.truncated))
        })
        .collect::<Result<Vec<(f64, bool)>>>()?;
    let samples: Vec<f64> = results.iter().map(|r| r.0).collect();
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(EnsembleThreshold {
        mean,
        stderr: (var / k).sqrt(),
        realizations: samples.len(),
        truncated: results.iter().filter(|r| r.1).count(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactsc::{enumerate_paths, DEFAULT_PATH_CAP};
    use crate::netcore::{bethe_lattice, random_series_parallel, Edge};
    use crate::spreduce::reduce_sp;
    use proptest::prelude::*;

    const CL: RuleSystem = RuleSystem::Classical;
    const CO: RuleSystem = RuleSystem::Concurrence;

    fn ens(pairs: &[(usize, f64)]) -> PathEnsemble {
        PathEnsemble {
            counts: pairs.iter().copied().collect(),
            classes: None,
            source: CountSource::Exhaustive,
            truncated: false,
        }
    }

    #[test]
    fn trivial_ensembles() {
        for i in 0..=20 {
            let c = i as f64 / 20.0;
            assert!((parallel_approx(&ens(&[(1, 1.0)]), CO, c).unwrap() - c).abs() < 1e-14);
        }
        assert_eq!(parallel_approx(&ens(&[(2, 6.0)]), CO, 1.0).unwrap(), 1.0);
        let p = parallel_approx(&ens(&[(2, 2.0)]), CL, 0.5).unwrap();
        assert!((p - (1.0 - 0.75f64 * 0.75)).abs() < 1e-15);
    }

    #[test]
    fn bethe_counts() {
        assert_eq!(count_paths_bethe(3, 1).unwrap().counts, BTreeMap::from([(1, 3.0)]));
        assert_eq!(count_paths_bethe(3, 2).unwrap().counts, BTreeMap::from([(2, 6.0)]));
        assert_eq!(count_paths_bethe(4, 3).unwrap().counts, BTreeMap::from([(3, 36.0)]));
        let tree = bethe_lattice(3, 2, LinkWeight::new(0.5).unwrap()).unwrap();
        let enumerated = enumerate_paths(&tree, None, DEFAULT_PATH_CAP).unwrap();
        assert_eq!(enumerated.counts, count_paths_bethe(3, 2).unwrap().counts);
        for m in 1..4 {
            assert_eq!(ksp_enumerate(&tree, &SmSpec::new(m)).unwrap().counts, enumerated.counts);
        }
    }

    #[test]
    fn square_counters_agree_with_enumeration() {
        for n in 2..=5 {
            let net = lattice(LatticeFamily::Square, n, LinkWeight::new(0.5).unwrap()).unwrap();
            for m in 1..=3 {
                let closed = count_paths_square(n, m).unwrap();
                let ksp = ksp_enumerate(&net, &SmSpec::unbounded(m)).unwrap();
                assert_eq!(closed.counts, ksp.counts, "n={n} m={m}");
                if n <= 4 {
                    let full = enumerate_paths(&net, None, DEFAULT_PATH_CAP).unwrap();
                    let all_classes = ksp_enumerate(&net, &SmSpec::unbounded(64)).unwrap();
                    assert_eq!(full.counts, all_classes.counts, "n={n}");
                }
            }
        }
        assert_eq!(count_paths_square(2, 1).unwrap().counts, BTreeMap::from([(1, 2.0)]));
    }

    #[test]
    fn square_eight_shortest_classes() {
        let c = count_paths_square(8, 3).unwrap().counts;
        assert_eq!(c[&7], 8.0);
        assert_eq!(c[&8], 84.0);
        assert_eq!(c[&9], 462.0);
    }

    #[test]
    fn triangle_with_chord() {
        let w = LinkWeight::new(0.5).unwrap();
        let net = Network::new(
            3,
            vec![Edge::new(0, 1, w), Edge::new(0, 2, w), Edge::new(2, 1, w)],
            vec![0],
            vec![1],
        )
        .unwrap();
        let e = ksp_enumerate(&net, &SmSpec::new(2)).unwrap();
        assert_eq!(e.counts, BTreeMap::from([(1, 1.0), (2, 1.0)]));
    }

    #[test]
    fn cap_marks_truncation() {
        let net = lattice(LatticeFamily::Square, 5, LinkWeight::new(0.5).unwrap()).unwrap();
        let spec = SmSpec {
            per_pair_cap: 3,
            ..SmSpec::new(3)
        };
        assert!(ksp_enumerate(&net, &spec).unwrap().truncated);
    }

    #[test]
    fn halfpoint_of_single_link() {
        let e = ens(&[(1, 1.0)]);
        let t = ensemble_threshold(&e, CO).unwrap();
        assert!((t.theta - 0.5 * 0.5f64.asin()).abs() <= HALFPOINT_TOLERANCE);
        let curve = sweep_approx(&e, CO, &theta_grid(11)).unwrap();
        let t2 = threshold_halfpoint(&curve, |w| Ok(w.c())).unwrap();
        assert!((t2.c - 0.5).abs() < 1e-4);
        let flat = SweepCurve {
            thetas: vec![0.0, 0.1],
            values: vec![0.1, 0.2],
            system: CO,
            method: Method::ExactSp,
        };
        assert!(matches!(
            threshold_halfpoint(&flat, |_| Ok(0.0)),
            Err(Error::NoBracket { .. })
        ));
    }

    #[test]
    fn bethe_thresholds_near_asymptote() {
        for k in 3..=5 {
            let t = ensemble_threshold(&count_paths_bethe(k, 100).unwrap(), CO).unwrap();
            let target = 1.0 / ((k - 1) as f64).sqrt();
            assert!((t.c - target).abs() < 0.01, "k={k}: {} vs {target}", t.c);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn upper_bound_on_sp_networks(seed in 0u64..5000, size in 1usize..12, u in 0.0..=1.0f64) {
            let g = random_series_parallel(size, seed);
            let w = LinkWeight::from_quarter_pi(u).unwrap();
            let g = g.with_uniform_weight(w);
            let paths = enumerate_paths(&g, None, DEFAULT_PATH_CAP).unwrap();
            for sys in [CL, CO] {
                let approx = parallel_approx(&paths, sys, sys.value(w)).unwrap();
                let exact = reduce_sp(&g, sys).unwrap();
                prop_assert!(approx >= exact - 1e-12, "{} {} < {}", sys, approx, exact);
            }
        }

        #[test]
        fn more_classes_never_decrease(m in 1usize..4, x in 0.0..=1.0f64) {
            let small = count_paths_square(5, m).unwrap();
            let large = count_paths_square(5, m + 1).unwrap();
            for sys in [CL, CO] {
                prop_assert!(parallel_approx(&large, sys, x).unwrap() >= parallel_approx(&small, sys, x).unwrap());
            }
        }
    }
}
