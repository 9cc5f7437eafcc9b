//! Spanning-tree counts, uniform spanning-tree sampling and the resulting
//! recombination proposal probabilities.
//!
//! For a plan `P = V1 ∪ V2` the number of spanning trees of the whole graph
//! that produce `P` when one edge is cut is
//! `sp(P) = sp(V1) · sp(V2) · ER(P)`: pick a tree inside each district and
//! one of the cut edges to join them. When every tree has at most one
//! admissible cut, a recombination step proposes `P` with probability
//! `sp(P) / Σ_Q sp(Q)` over the admissible plans `Q`.

use std::collections::{BTreeMap, HashSet};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::DualGraph;
use crate::linalg::determinant;
use crate::metrics::edges_removed;
use crate::plan::Plan;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("graph is not connected")]
    Disconnected,
    #[error("graph has no nodes")]
    Empty,
    #[error("plan set is empty")]
    EmptyEnsemble,
    #[error("plan is not a valid bipartition of this graph")]
    InvalidPlan,
}

/// Exact number of spanning trees.
pub type TreeCount = BigUint;

/// Matrix-tree theorem on a neighbor-list graph: determinant of the
/// Laplacian with the last row and column removed. Zero if disconnected.
pub fn count_spanning_trees(neighbors: &[Vec<usize>]) -> TreeCount {
    let n = neighbors.len();
    if n <= 1 {
        return BigUint::from(n as u32);
    }
    let mut lap = vec![vec![0i64; n - 1]; n - 1];
    for (v, nb) in neighbors.iter().enumerate().take(n - 1) {
        lap[v][v] = nb.len() as i64;
        for &w in nb {
            if w < n - 1 {
                lap[v][w] -= 1;
            }
        }
    }
    determinant(&lap).to_biguint().unwrap_or_default()
}

pub fn spanning_tree_count(g: &DualGraph) -> TreeCount {
    let nb: Vec<Vec<usize>> = (0..g.n()).map(|v| g.neighbors(v).to_vec()).collect();
    count_spanning_trees(&nb)
}

/// Spanning trees of the subgraph induced by `nodes`.
pub fn induced_tree_count(g: &DualGraph, nodes: &[usize]) -> TreeCount {
    count_spanning_trees(&g.induced_neighbors(nodes))
}

/// `sp(V1) · sp(V2) · ER(P)`.
pub fn sp_partition(g: &DualGraph, p: &Plan) -> Result<TreeCount, TreeError> {
    if !p.is_valid_for(g) {
        return Err(TreeError::InvalidPlan);
    }
    let a = induced_tree_count(g, &p.members(0));
    let b = induced_tree_count(g, &p.members(1));
    Ok(a * b * BigUint::from(edges_removed(g, p)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErShare {
    pub probability: BigRational,
    pub num_plans: u64,
}

/// Proposal probabilities over an admissible plan set `E`.
#[derive(Clone, Debug)]
pub struct ProposalDistribution {
    /// `sp(P) / Σ sp(Q)` for each distinct plan, in first-seen order.
    pub per_plan: Vec<(Plan, BigRational)>,
    /// Probability that the proposed plan has cut size `C`, i.e.
    /// `Σ_{P ∈ E_C} sp(P) / Σ_{Q ∈ E} sp(Q)`, with the size of `E_C`.
    pub per_er: BTreeMap<u32, ErShare>,
    pub total_weight: BigUint,
}

impl ProposalDistribution {
    pub fn probability_of(&self, plan: &Plan) -> Option<&BigRational> {
        let c = plan.canonical();
        self.per_plan.iter().find(|(p, _)| *p == c).map(|(_, r)| r)
    }
}

/// `E` is treated as a set: plans are canonicalised and repeats dropped.
pub fn proposal_distribution(g: &DualGraph, plans: &[Plan]) -> Result<ProposalDistribution, TreeError> {
    let mut seen = HashSet::new();
    let distinct: Vec<Plan> = plans
        .iter()
        .map(Plan::canonical)
        .filter(|p| seen.insert(p.clone()))
        .collect();
    if distinct.is_empty() {
        return Err(TreeError::EmptyEnsemble);
    }
    let weights: Vec<(u32, BigUint)> = distinct
        .par_iter()
        .map(|p| Ok((edges_removed(g, p), sp_partition(g, p)?)))
        .collect::<Result<_, TreeError>>()?;
    let total: BigUint = weights.iter().map(|(_, w)| w).sum();
    if total.is_zero() {
        return Err(TreeError::EmptyEnsemble);
    }
    let denom = BigInt::from(total.clone());
    let mut per_er: BTreeMap<u32, (BigUint, u64)> = BTreeMap::new();
    for (er, w) in &weights {
        let e = per_er.entry(*er).or_insert((BigUint::zero(), 0));
        e.0 += w;
        e.1 += 1;
    }
    let per_plan = distinct
        .into_iter()
        .zip(&weights)
        .map(|(p, (_, w))| (p, BigRational::new(BigInt::from(w.clone()), denom.clone())))
        .collect();
    let per_er = per_er
        .into_iter()
        .map(|(er, (w, k))| {
            (
                er,
                ErShare {
                    probability: BigRational::new(BigInt::from(w), denom.clone()),
                    num_plans: k,
                },
            )
        })
        .collect();
    Ok(ProposalDistribution {
        per_plan,
        per_er,
        total_weight: total,
    })
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Uniform spanning tree by loop-erased random walks (Wilson's algorithm).
/// Edges are returned as `(a, b)` with `a < b`, sorted.
pub fn sample_spanning_tree<R: Rng + ?Sized>(
    g: &DualGraph,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>, TreeError> {
    if g.n() == 0 {
        return Err(TreeError::Empty);
    }
    if !g.is_connected() {
        return Err(TreeError::Disconnected);
    }
    let mut buf = WilsonBuffer::new(g.n());
    wilson(g, &mut buf, rng);
    let mut edges: Vec<(usize, usize)> = (0..g.n())
        .filter(|&v| buf.next[v] != usize::MAX)
        .map(|v| (v.min(buf.next[v]), v.max(buf.next[v])))
        .collect();
    edges.sort_unstable();
    Ok(edges)
}

/// Scratch space reused across draws.
pub(crate) struct WilsonBuffer {
    pub in_tree: Vec<bool>,
    /// Parent pointer toward the root; `usize::MAX` at the root.
    pub next: Vec<usize>,
    pub root: usize,
}

impl WilsonBuffer {
    pub fn new(n: usize) -> Self {
        WilsonBuffer {
            in_tree: vec![false; n],
            next: vec![usize::MAX; n],
            root: 0,
        }
    }
}

/// Fills `buf.next` with parent pointers of a uniform spanning tree.
/// `g` must be connected.
pub(crate) fn wilson<R: Rng + ?Sized>(g: &DualGraph, buf: &mut WilsonBuffer, rng: &mut R) {
    let n = g.n();
    buf.in_tree.iter_mut().for_each(|x| *x = false);
    buf.next.iter_mut().for_each(|x| *x = usize::MAX);
    let root = rng.gen_range(0..n);
    buf.root = root;
    buf.in_tree[root] = true;
    for i in 0..n {
        let mut u = i;
        while !buf.in_tree[u] {
            let nb = g.neighbors(u);
            buf.next[u] = nb[rng.gen_range(0..nb.len())];
            u = buf.next[u];
        }
        u = i;
        while !buf.in_tree[u] {
            buf.in_tree[u] = true;
            u = buf.next[u];
        }
    }
}
