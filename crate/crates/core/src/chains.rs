//! Collision chains: equal-energy arc alphabets, the direction-change graph,
//! periodic-chain counts and topological entropy.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::arcs::{arc_family_for, ArcFamily, ArcLabel, ArcOptions, CollisionArc};
use crate::dynamics::{Centre, Params};
use crate::error::{Error, Result};
use crate::periods::solve_beta_for_energy;
use crate::rational::ResonanceClass;

pub const DEFAULT_ANGULAR_TOL: f64 = 1e-6;

/// Arc families of every class in `classes`, each at the β giving energy `energy`.
pub fn build_alphabet(
    centre: &Centre,
    classes: &[ResonanceClass],
    energy: f64,
    a: f64,
    opts: &ArcOptions,
) -> Result<Vec<ArcFamily>> {
    if classes.is_empty() {
        return Err(Error::domain("the class set I must not be empty"));
    }
    classes
        .iter()
        .map(|&q| {
            let sol = solve_beta_for_energy(q, energy, a, 1e-12).map_err(|e| match e {
                Error::Range(msg) => Error::Refused(format!("class {q}: {msg}")),
                other => other,
            })?;
            let prm = Params::new(a, sol.beta, sol.a1_hat)?
                .with_class(q)
                .with_centre(*centre);
            arc_family_for(&prm, sol, opts)
        })
        .collect()
}

/// Direction-change graph `Γ` over a set of arcs.
#[derive(Debug, Clone, Serialize)]
pub struct ChainGraph {
    pub nodes: Vec<ArcLabel>,
    pub adjacency: Vec<Vec<bool>>,
    #[serde(skip)]
    pub arcs: Vec<CollisionArc>,
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Edge `(k, k′)` iff the arrival direction of `k` is not parallel (up to
/// sign) to the departure direction of `k′`.
pub fn build_graph(arcs: &[CollisionArc], angular_tol: f64) -> ChainGraph {
    let outs: Vec<[f64; 2]> = arcs
        .iter()
        .map(|a| unit(a.final_cartesian_velocity()))
        .collect();
    let ins: Vec<[f64; 2]> = arcs
        .iter()
        .map(|a| unit(a.initial_cartesian_velocity()))
        .collect();
    let adjacency = outs
        .iter()
        .map(|o| {
            ins.iter()
                .map(|i| (o[0] * i[1] - o[1] * i[0]).abs() > angular_tol)
                .collect()
        })
        .collect();
    ChainGraph {
        nodes: arcs.iter().map(|a| a.label).collect(),
        adjacency,
        arcs: arcs.to_vec(),
    }
}

impl ChainGraph {
    /// A bare graph, for experiments on the combinatorics alone.
    pub fn from_adjacency(nodes: Vec<ArcLabel>, adjacency: Vec<Vec<bool>>) -> Result<Self> {
        let n = nodes.len();
        if adjacency.len() != n || adjacency.iter().any(|r| r.len() != n) {
            return Err(Error::domain(
                "adjacency matrix must be square and match the node list",
            ));
        }
        Ok(Self {
            nodes,
            adjacency,
            arcs: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j]
    }

    /// Adjacency list keyed by label strings.
    pub fn to_json(&self) -> serde_json::Value {
        let list: Vec<_> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let succ: Vec<String> = (0..self.len())
                    .filter(|&j| self.adjacency[i][j])
                    .map(|j| self.nodes[j].to_string())
                    .collect();
                serde_json::json!({ "node": l.to_string(), "successors": succ })
            })
            .collect();
        serde_json::json!({ "nodes": self.nodes.iter().map(|l| l.to_string()).collect::<Vec<_>>(), "adjacency": list })
    }
}

type BigMatrix = Vec<Vec<BigUint>>;

fn big_identity(n: usize) -> BigMatrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        BigUint::one()
                    } else {
                        BigUint::zero()
                    }
                })
                .collect()
        })
        .collect()
}

fn big_mul(a: &BigMatrix, b: &BigMatrix) -> BigMatrix {
    let n = a.len();
    let mut c = vec![vec![BigUint::zero(); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..n {
                if !b[k][j].is_zero() {
                    c[i][j] += &a[i][k] * &b[k][j];
                }
            }
        }
    }
    c
}

/// `P_n = trace(Aⁿ)`, the number of periodic chains of period `n`, exactly.
pub fn count_periodic_chains(g: &ChainGraph, n: u32) -> Result<BigUint> {
    if n == 0 {
        return Err(Error::domain("period n must be at least 1"));
    }
    let mut base: BigMatrix = g
        .adjacency
        .iter()
        .map(|r| {
            r.iter()
                .map(|&e| if e { BigUint::one() } else { BigUint::zero() })
                .collect()
        })
        .collect();
    let mut acc = big_identity(g.len());
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            acc = big_mul(&acc, &base);
        }
        e >>= 1;
        if e > 0 {
            base = big_mul(&base, &base);
        }
    }
    Ok((0..g.len()).map(|i| acc[i][i].clone()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyEstimate {
    /// `log ρ(A)`, or 0 when the graph has no cycle.
    pub value: f64,
    pub spectral_radius: f64,
    /// Set when the adjacency matrix is nilpotent (no infinite chains).
    pub nilpotent: bool,
}

/// Strongly connected components that contain at least one cycle.
fn cyclic_components(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut reach: Vec<Vec<bool>> = adj.to_vec();
    for k in 0..n {
        let via = reach[k].clone();
        for row in reach.iter_mut() {
            if row[k] {
                for (r, &v) in row.iter_mut().zip(&via) {
                    *r |= v;
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if seen[i] || !reach[i][i] {
            continue;
        }
        let comp: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &comp {
            seen[j] = true;
        }
        out.push(comp);
    }
    out
}

/// Perron root of an irreducible 0/1 matrix by power iteration on `A + I`,
/// which is primitive; stops when the Collatz–Wielandt bounds meet.
fn perron_root(adj: &[Vec<bool>], nodes: &[usize], tol: f64) -> f64 {
    let k = nodes.len();
    let mut x = vec![1.0; k];
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for _ in 0..100_000 {
        let y: Vec<f64> = (0..k)
            .map(|i| {
                x[i] + (0..k)
                    .filter(|&j| adj[nodes[i]][nodes[j]])
                    .map(|j| x[j])
                    .sum::<f64>()
            })
            .collect();
        let ratios = (0..k).map(|i| y[i] / x[i]);
        lo = ratios.clone().fold(f64::INFINITY, f64::min);
        hi = ratios.fold(0.0, f64::max);
        let norm = y.iter().cloned().fold(0.0, f64::max);
        x = y.into_iter().map(|v| v / norm).collect();
        if hi - lo <= tol * lo {
            break;
        }
    }
    0.5 * (lo + hi) - 1.0
}

/// Topological entropy `log ρ(A)` of the chain graph.
pub fn entropy_estimate(g: &ChainGraph) -> Result<EntropyEstimate> {
    if g.is_empty() {
        return Err(Error::domain("entropy of an empty graph is undefined"));
    }
    let comps = cyclic_components(&g.adjacency);
    if comps.is_empty() {
        return Ok(EntropyEstimate {
            value: 0.0,
            spectral_radius: 0.0,
            nilpotent: true,
        });
    }
    let rho = comps
        .iter()
        .map(|c| perron_root(&g.adjacency, c, 1e-14))
        .fold(0.0, f64::max);
    Ok(EntropyEstimate {
        value: rho.ln().max(0.0),
        spectral_radius: rho,
        nilpotent: false,
    })
}

/// A finite collision chain, as node indices and their labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionChain {
    pub indices: Vec<usize>,
    pub labels: Vec<ArcLabel>,
}

/// A chain of length `len` whose `k`-th arc has class `word[k mod |word|]`,
/// choosing the first admissible arc at each step and backtracking on dead ends.
pub fn enumerate_chains(
    g: &ChainGraph,
    word: &[ResonanceClass],
    len: usize,
) -> Result<CollisionChain> {
    if word.is_empty() || len == 0 {
        return Err(Error::domain("chain word and length must be non-empty"));
    }
    let class_at = |k: usize| word[k % word.len()];
    let candidates = |k: usize| -> Vec<usize> {
        (0..g.len())
            .filter(|&i| g.nodes[i].q == class_at(k))
            .collect()
    };
    for q in word {
        if !g.nodes.iter().any(|l| l.q == *q) {
            return Err(Error::Structural(format!(
                "class {q} has no arcs in the alphabet"
            )));
        }
    }
    // iterative depth-first search; stack holds the next candidate position per level
    let mut path: Vec<usize> = Vec::with_capacity(len);
    let mut next: Vec<usize> = vec![0];
    while let Some(pos) = next.last_mut() {
        let k = path.len();
        let cands = candidates(k);
        let choice = cands[*pos..]
            .iter()
            .position(|&i| path.last().is_none_or(|&p| g.has_edge(p, i)))
            .map(|off| *pos + off);
        match choice {
            Some(c) => {
                *pos = c + 1;
                path.push(cands[c]);
                if path.len() == len {
                    let labels = path.iter().map(|&i| g.nodes[i]).collect();
                    return Ok(CollisionChain {
                        indices: path,
                        labels,
                    });
                }
                next.push(0);
            }
            None => {
                next.pop();
                path.pop();
            }
        }
    }
    Err(Error::Structural(format!(
        "no chain of length {len} follows the class word {:?}",
        word.iter().map(|q| q.to_string()).collect::<Vec<_>>()
    )))
}
