//! Star-mesh elimination.
//!
//! A vertex with `N` neighbours is replaced by a complete graph on those
//! neighbours whose link values `q_ij` reproduce every pairwise connectivity
//! of the star: `series(w_i, w_j) = conn(i, j; K_N(q))`. Pairwise
//! connectivity on `K_N` is itself defined by eliminating the highest-index
//! vertex other than `i` and `j` with a smaller star-mesh step and folding
//! the result into the remaining links with the parallel rule. The cost grows
//! super-exponentially with `N`; degrees up to about 6 are practical.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::netcore::{Network, NodeId};
use crate::rules::RuleSystem;
use crate::solver::{broyden, BroydenOptions};
use crate::spreduce::{ReductionOrder, ReductionStep, WorkGraph};

/// Values on the links of a complete graph, upper triangle in row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompleteGraph {
    pub order: usize,
    pub values: Vec<f64>,
}

pub(crate) fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl CompleteGraph {
    pub fn new(order: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != order * order.saturating_sub(1) / 2 {
            return Err(invalid(format!(
                "K_{order} needs {} link values, got {}",
                order * order.saturating_sub(1) / 2,
                values.len()
            )));
        }
        Ok(CompleteGraph { order, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[pair_index(self.order, i, j)]
    }

    /// All unordered pairs `(i, j)`, `i < j`, in storage order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.order;
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarMeshOptions {
    pub solver: BroydenOptions,
    /// Tolerance for the nested solves inside pairwise connectivity.
    pub inner_tolerance: f64,
    /// Accepted residual when the solution sits on the `[0, 1]` boundary.
    pub boundary_tolerance: f64,
    /// Run every restart even after success and report distinct roots.
    pub explore_restarts: bool,
    /// Refuse to eliminate vertices of higher degree.
    pub max_degree: usize,
}

impl Default for StarMeshOptions {
    fn default() -> Self {
        StarMeshOptions {
            solver: BroydenOptions::default(),
            inner_tolerance: 1e-13,
            boundary_tolerance: 1e-8,
            explore_restarts: false,
            max_degree: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarMeshSolution {
    pub mesh: CompleteGraph,
    pub residual: f64,
    pub iterations: usize,
    pub restarts: usize,
    /// Other roots reached from restarts (only with `explore_restarts`).
    pub alternatives: Vec<Vec<f64>>,
}

/// Connectivity between `i` and `j` on the complete graph `k`.
pub fn mesh_pair_connectivity(
    k: &CompleteGraph,
    i: usize,
    j: usize,
    system: RuleSystem,
    opts: &StarMeshOptions,
) -> Result<f64> {
    if i == j || i >= k.order || j >= k.order {
        return Err(invalid(format!("bad pair ({i}, {j}) on K_{}", k.order)));
    }
    Ok(conn_pairs(k, &[(i, j)], system, opts)?[0])
}

/// Elimination vertex for the pair `(i, j)`: the highest index not in it.
fn pivot(n: usize, i: usize, j: usize) -> usize {
    (0..n).rev().find(|&r| r != i && r != j).expect("n >= 3")
}

/// Pairwise connectivities for several pairs, sharing eliminations between
/// pairs that use the same pivot.
fn conn_pairs(
    k: &CompleteGraph,
    pairs: &[(usize, usize)],
    system: RuleSystem,
    opts: &StarMeshOptions,
) -> Result<Vec<f64>> {
    let n = k.order;
    if n == 2 {
        return Ok(vec![k.values[0]; pairs.len()]);
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, &(i, j)) in pairs.iter().enumerate() {
        groups.entry(pivot(n, i, j)).or_default().push(idx);
    }
    let mut out = vec![0.0; pairs.len()];
    for (r, members) in groups {
        let reduced = eliminate(k, r, system, opts)?;
        let relabel = |x: usize| if x > r { x - 1 } else { x };
        let sub: Vec<(usize, usize)> = members
            .iter()
            .map(|&m| (relabel(pairs[m].0), relabel(pairs[m].1)))
            .collect();
        let vals = conn_pairs(&reduced, &sub, system, opts)?;
        for (&m, v) in members.iter().zip(vals) {
            out[m] = v;
        }
    }
    Ok(out)
}

/// Remove vertex `r` from `k` by a star-mesh step and fold the new mesh into
/// the surviving links.
fn eliminate(
    k: &CompleteGraph,
    r: usize,
    system: RuleSystem,
    opts: &StarMeshOptions,
) -> Result<CompleteGraph> {
    let n = k.order;
    let others: Vec<usize> = (0..n).filter(|&x| x != r).collect();
    let leaves: Vec<f64> = others.iter().map(|&x| k.get(r, x)).collect();
    let inner = StarMeshOptions {
        solver: BroydenOptions {
            tolerance: opts.inner_tolerance,
            ..opts.solver
        },
        explore_restarts: false,
        ..*opts
    };
    let mesh = solve_star(&leaves, system, &inner)?.mesh;
    let m = n - 1;
    let mut values = Vec::with_capacity(m * (m - 1) / 2);
    for a in 0..m {
        for b in a + 1..m {
            let direct = k.get(others[a], others[b]);
            values.push(system.parallel2(direct, mesh.get(a, b)));
        }
    }
    Ok(CompleteGraph { order: m, values })
}

/// Mesh values replacing a star with the given leaf values.
pub fn solve_star(leaves: &[f64], system: RuleSystem, opts: &StarMeshOptions) -> Result<StarMeshSolution> {
    let n = leaves.len();
    let pairs = n * n.saturating_sub(1) / 2;
    let mut values = vec![0.0; pairs];
    // Zero leaves carry nothing; their mesh links stay at zero.
    let active: Vec<usize> = (0..n).filter(|&i| leaves[i] > 0.0).collect();
    let trivial = |values| StarMeshSolution {
        mesh: CompleteGraph { order: n, values },
        residual: 0.0,
        iterations: 0,
        restarts: 0,
        alternatives: vec![],
    };
    if active.len() < 2 {
        return Ok(trivial(values));
    }
    if active.len() == 2 {
        let (a, b) = (active[0], active[1]);
        values[pair_index(n, a, b)] = system.series2(leaves[a], leaves[b]);
        return Ok(trivial(values));
    }

    // A perfect link merges the centre into that leaf, so every other leaf
    // connects to it directly and to nothing else.
    if let Some(&hub) = active.iter().find(|&&i| leaves[i] >= 1.0) {
        for &i in active.iter().filter(|&&i| i != hub) {
            values[pair_index(n, i, hub)] = leaves[i];
        }
        return Ok(trivial(values));
    }

    let w: Vec<f64> = active.iter().map(|&i| leaves[i]).collect();
    let m = w.len();
    let sub_pairs: Vec<(usize, usize)> =
        (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let target: Vec<f64> = sub_pairs.iter().map(|&(i, j)| system.series2(w[i], w[j])).collect();
    let guess = target.clone();
    let residual = |q: &[f64]| -> Result<Vec<f64>> {
        let k = CompleteGraph {
            order: m,
            values: q.to_vec(),
        };
        let conn = conn_pairs(&k, &sub_pairs, system, opts)?;
        Ok(conn.iter().zip(&target).map(|(c, t)| c - t).collect())
    };

    let mut solver = opts.solver;
    let mut alternatives = Vec::new();
    if opts.explore_restarts {
        solver.restarts = 0;
    }
    let report = broyden(residual, &guess, 0.0, 1.0, &solver)?;
    let on_boundary = report.x.iter().any(|&q| q <= 0.0 || q >= 1.0);
    let accepted = report.converged || (on_boundary && report.residual <= opts.boundary_tolerance);
    if !accepted {
        return Err(Error::SolverFailed {
            residual: report.residual,
            iterations: report.iterations,
        });
    }
    if opts.explore_restarts {
        for attempt in 1..=opts.solver.restarts {
            let alt_opts = BroydenOptions {
                restarts: 1,
                seed: opts.solver.seed.wrapping_add(attempt as u64),
                ..opts.solver
            };
            let alt = broyden(residual, &perturbed(&guess, attempt), 0.0, 1.0, &alt_opts)?;
            let distinct = alt
                .x
                .iter()
                .zip(&report.x)
                .any(|(a, b)| (a - b).abs() > 1e-6);
            if alt.converged && distinct {
                alternatives.push(alt.x);
            }
        }
    }
    for (s, &(i, j)) in sub_pairs.iter().enumerate() {
        values[pair_index(n, active[i], active[j])] = report.x[s];
    }
    Ok(StarMeshSolution {
        mesh: CompleteGraph { order: n, values },
        residual: report.residual,
        iterations: report.iterations,
        restarts: report.restarts,
        alternatives,
    })
}

fn perturbed(guess: &[f64], attempt: usize) -> Vec<f64> {
    let f = 1.0 + 0.3 * (attempt as f64) * if attempt % 2 == 0 { 1.0 } else { -0.7 };
    guess.iter().map(|&q| (q * f).clamp(0.0, 1.0)).collect()
}

/// Which interior vertex [`reduce_full`] eliminates next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EliminationPolicy {
    /// Smallest degree, ties to the smallest id.
    MinDegree,
    /// Original vertex ids in this order; unlisted vertices follow by
    /// smallest degree.
    Given(Vec<NodeId>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationRecord {
    /// Original vertex id.
    pub vertex: NodeId,
    pub degree: usize,
    pub residual: f64,
    pub iterations: usize,
    pub alternatives: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FullReduction {
    pub value: f64,
    pub eliminations: Vec<EliminationRecord>,
    pub initial: Vec<f64>,
    pub trace: Vec<ReductionStep>,
}

impl FullReduction {
    pub fn elimination_order(&self) -> Vec<NodeId> {
        self.eliminations.iter().map(|e| e.vertex).collect()
    }
}

/// Terminal-to-terminal value of an arbitrary network: series and parallel
/// merges first, then star-mesh elimination whenever they are exhausted.
pub fn reduce_full(
    net: &Network,
    system: RuleSystem,
    policy: &EliminationPolicy,
    opts: &StarMeshOptions,
) -> Result<FullReduction> {
    let mut g = WorkGraph::new(net, system, ReductionOrder::SmallestId);
    g.exhaust();
    let mut eliminations: Vec<EliminationRecord> = Vec::new();
    let mut preferred: Vec<NodeId> = match policy {
        EliminationPolicy::MinDegree => vec![],
        EliminationPolicy::Given(order) => order.clone(),
    };
    preferred.reverse();
    loop {
        let interior = g.interior();
        if interior.is_empty() {
            break;
        }
        let mut choice = None;
        while let Some(want) = preferred.pop() {
            if let Some(&x) = interior.iter().find(|&&x| g.original_id(x) == want) {
                choice = Some(x);
                break;
            }
        }
        let x = choice.unwrap_or_else(|| {
            *interior
                .iter()
                .min_by_key(|&&x| (g.degree(x), x))
                .expect("non-empty")
        });
        let degree = g.degree(x);
        let eliminated = || eliminations.iter().map(|e| e.vertex).collect::<Vec<_>>();
        if degree > opts.max_degree {
            return Err(invalid(format!(
                "vertex {} has degree {degree}, above the star-mesh limit {}",
                g.original_id(x),
                opts.max_degree
            )));
        }
        let star = g.star(x);
        let leaves: Vec<f64> = star.iter().map(|&(_, e)| g.value(e)).collect();
        let sol = solve_star(&leaves, system, opts).map_err(|err| match err {
            Error::SolverFailed {
                residual,
                iterations,
            } => Error::StarMeshFailed {
                vertex: g.original_id(x),
                degree,
                residual,
                iterations,
                eliminated: eliminated(),
            },
            other => other,
        })?;
        g.remove_vertex(x);
        let mut produced = Vec::new();
        for (a, b) in sol.mesh.pairs() {
            let q = sol.mesh.get(a, b);
            if q > 0.0 {
                produced.push(g.add_edge(star[a].0, star[b].0, q));
            }
        }
        g.record_star_mesh(x, star.iter().map(|&(_, e)| e).collect(), produced);
        let neighbours: Vec<usize> = star.iter().map(|&(y, _)| y).collect();
        g.touch_all(&neighbours);
        eliminations.push(EliminationRecord {
            vertex: g.original_id(x),
            degree,
            residual: sol.residual,
            iterations: sol.iterations,
            alternatives: sol.alternatives.len(),
        });
        g.exhaust();
    }
    let value = g.terminal_value();
    let (initial, trace) = g.into_parts();
    Ok(FullReduction {
        value,
        eliminations,
        initial,
        trace,
    })
}
