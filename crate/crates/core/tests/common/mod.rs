//! Graph families and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redist_core::{DualGraph, Plan};

pub fn path(n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (i - 1, i)).collect()
}

pub fn cycle(n: usize) -> Vec<(usize, usize)> {
    let mut e = path(n);
    e.push((n - 1, 0));
    e
}

pub fn complete(n: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            e.push((a, b));
        }
    }
    e
}

/// `rows × cols` grid, row-major labels.
pub fn grid(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                e.push((i, i + 1));
            }
            if r + 1 < rows {
                e.push((i, i + cols));
            }
        }
    }
    e
}

/// Random connected simple graph: a random recursive tree plus each other
/// pair with probability `p`.
pub fn random_connected(n: usize, p: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut adj = vec![vec![false; n]; n];
    let mut e = Vec::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        adj[u][v] = true;
        e.push((u, v));
    }
    for a in 0..n {
        for b in a + 1..n {
            if !adj[a][b] && rng.gen_bool(p) {
                adj[a][b] = true;
                e.push((a, b));
            }
        }
    }
    // scramble labels so unit 0 is not always the tree root
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    e.into_iter().map(|(a, b)| (perm[a], perm[b])).collect()
}

pub fn graph(pops: &[u64], edges: &[(usize, usize)]) -> DualGraph {
    DualGraph::from_edges(pops, edges).expect("valid test graph")
}

/// Named fixed families with n ≤ 10.
pub fn families() -> Vec<(String, Vec<(usize, usize)>, usize)> {
    let mut out = Vec::new();
    for n in 2..=10 {
        out.push((format!("path{n}"), path(n), n));
        out.push((format!("K{n}"), complete(n), n));
    }
    for n in 3..=10 {
        out.push((format!("cycle{n}"), cycle(n), n));
    }
    for (r, c) in [(2, 2), (2, 3), (2, 4), (3, 3), (2, 5), (3, 4), (3, 3)] {
        out.push((format!("grid{r}x{c}"), grid(r, c), r * c));
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut x = x;
    while parent[x] != r {
        let next = parent[x];
        parent[x] = r;
        x = next;
    }
    r
}

/// Every spanning tree as a sorted edge list, by testing all
/// `(n-1)`-subsets of the edges. Only for small graphs.
pub fn all_spanning_trees(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    let m = edges.len();
    assert!(m <= 24, "too many edges for exhaustive tree search");
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(n - 1);
    fn rec(
        start: usize,
        n: usize,
        edges: &[(usize, usize)],
        pick: &mut Vec<usize>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if pick.len() == n - 1 {
            let mut parent: Vec<usize> = (0..n).collect();
            for &i in pick.iter() {
                let (a, b) = edges[i];
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra == rb {
                    return;
                }
                parent[ra] = rb;
            }
            let mut t: Vec<(usize, usize)> = pick
                .iter()
                .map(|&i| {
                    let (a, b) = edges[i];
                    (a.min(b), a.max(b))
                })
                .collect();
            t.sort_unstable();
            out.push(t);
            return;
        }
        for i in start..edges.len() {
            if edges.len() - i < n - 1 - pick.len() {
                break;
            }
            pick.push(i);
            rec(i + 1, n, edges, pick, out);
            pick.pop();
        }
    }
    rec(0, n, edges, &mut pick, &mut out);
    out
}

/// Tally of partitions obtained by cutting each edge of each spanning tree,
/// keyed by canonical plan.
pub fn tree_cut_tally(n: usize, edges: &[(usize, usize)]) -> BTreeMap<Plan, u64> {
    let mut tally = BTreeMap::new();
    for t in all_spanning_trees(n, edges) {
        for skip in 0..t.len() {
            let mut parent: Vec<usize> = (0..n).collect();
            for (j, &(a, b)) in t.iter().enumerate() {
                if j != skip {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[ra] = rb;
                }
            }
            let r0 = find(&mut parent, 0);
            let side: Vec<usize> = (0..n).filter(|&v| find(&mut parent, v) != r0).collect();
            *tally.entry(Plan::from_district1(n, side)).or_insert(0) += 1;
        }
    }
    tally
}

/// Spanning-tree count by deletion–contraction on a multigraph given as a
/// symmetric multiplicity matrix. Leaves are peeled off and parallel edges
/// are handled in one step, which keeps small sparse graphs fast.
pub fn deletion_contraction(n: usize, edges: &[(usize, usize)]) -> BigUint {
    let mut m = vec![vec![0u32; n]; n];
    for &(a, b) in edges {
        m[a][b] += 1;
        m[b][a] += 1;
    }
    let alive: Vec<usize> = (0..n).collect();
    dc(m, alive)
}

fn dc(mut m: Vec<Vec<u32>>, mut alive: Vec<usize>) -> BigUint {
    let mut factor = BigUint::from(1u32);
    // peel degree-one vertices
    loop {
        if alive.len() == 1 {
            return factor;
        }
        let leaf = alive.iter().position(|&v| {
            alive.iter().filter(|&&w| m[v][w] > 0).count() == 1
        });
        match leaf {
            Some(i) => {
                let v = alive[i];
                let w = *alive.iter().find(|&&w| m[v][w] > 0).unwrap();
                factor *= m[v][w];
                m[v][w] = 0;
                m[w][v] = 0;
                alive.remove(i);
            }
            None => break,
        }
    }
    if alive.iter().any(|&v| alive.iter().all(|&w| m[v][w] == 0)) {
        return BigUint::from(0u32);
    }
    let u = alive[0];
    let v = *alive.iter().find(|&&w| m[u][w] > 0).unwrap();
    let k = m[u][v];

    let mut del = m.clone();
    del[u][v] = 0;
    del[v][u] = 0;
    let deleted = dc(del, alive.clone());

    // contract v into u, dropping the loops
    let mut con = m;
    for &w in &alive {
        if w != u && w != v {
            con[u][w] += con[v][w];
            con[w][u] = con[u][w];
        }
        con[v][w] = 0;
        con[w][v] = 0;
    }
    con[u][v] = 0;
    con[v][u] = 0;
    let rest: Vec<usize> = alive.into_iter().filter(|&w| w != v).collect();
    let contracted = dc(con, rest);
    factor * (deleted + contracted * k)
}
