//! Frontier decision diagram over vertex colourings.
//!
//! Level `k` decides the colour of `order[k]`. A node summarises a partial
//! colouring by, for each frontier vertex (processed, with an unprocessed
//! neighbour), its colour and the connected component of its colour class
//! among processed vertices, plus which colours already own a finished
//! component. A finished component can never grow again, so a colour with a
//! finished component admits no further vertices and no other component.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::{EnumError, PopWindow};
use crate::graph::DualGraph;
use crate::plan::Plan;

pub(crate) const ZERO: u32 = u32::MAX;
pub(crate) const ONE: u32 = u32::MAX - 1;

/// Frontier labels are packed into a byte next to the colour bit.
const MAX_WIDTH: usize = 120;
const FRESH: u8 = 127;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Node {
    pub child: [u32; 2],
    /// Edges cut by giving the level's vertex colour 0 / 1.
    pub cut: [u32; 2],
}

pub(crate) struct Diagram {
    n: usize,
    order: Vec<usize>,
    levels: Vec<Vec<Node>>,
}

/// Precomputed frontier bookkeeping for one level.
struct Step {
    vertex: usize,
    /// Old frontier slots adjacent to `vertex`.
    nbr_slots: Vec<usize>,
    /// For each new frontier slot, the index into `old slots ++ [vertex]`.
    keep: Vec<usize>,
    /// Indices into `old slots ++ [vertex]` that leave the frontier.
    leave: Vec<usize>,
}

/// Vertex order minimising the widest frontier over breadth-first orders.
pub(crate) fn choose_order(g: &DualGraph) -> Vec<usize> {
    let n = g.n();
    let starts: Vec<usize> = if n <= 400 {
        (0..n).collect()
    } else {
        (0..32).map(|i| i * n / 32).collect()
    };
    let mut best: Option<((usize, usize), Vec<usize>)> = None;
    for s in starts {
        let order = bfs_order(g, s);
        let cost = frontier_cost(g, &order);
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, order));
        }
    }
    best.map(|(_, o)| o).unwrap_or_default()
}

fn bfs_order(g: &DualGraph, start: usize) -> Vec<usize> {
    let n = g.n();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &w in g.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    order
}

/// (max width, sum of widths)
fn frontier_cost(g: &DualGraph, order: &[usize]) -> (usize, usize) {
    let widths = frontier_widths(g, order);
    (
        widths.iter().copied().max().unwrap_or(0),
        widths.iter().sum(),
    )
}

fn last_neighbor_rank(g: &DualGraph, rank: &[usize]) -> Vec<usize> {
    (0..g.n())
        .map(|v| {
            g.neighbors(v)
                .iter()
                .map(|&w| rank[w])
                .max()
                .unwrap_or(0)
        })
        .collect()
}

fn frontier_widths(g: &DualGraph, order: &[usize]) -> Vec<usize> {
    let mut rank = vec![0; g.n()];
    for (k, &v) in order.iter().enumerate() {
        rank[v] = k;
    }
    let last = last_neighbor_rank(g, &rank);
    // vertex at rank r sits in the frontier after steps r..last-1
    let mut delta = vec![0isize; g.n() + 1];
    for v in 0..g.n() {
        if last[v] > rank[v] {
            delta[rank[v]] += 1;
            delta[last[v]] -= 1;
        }
    }
    let mut acc = 0isize;
    delta[..g.n()]
        .iter()
        .map(|d| {
            acc += d;
            acc as usize
        })
        .collect()
}

fn plan_steps(g: &DualGraph, order: &[usize]) -> Vec<Step> {
    let n = g.n();
    let mut rank = vec![0; n];
    for (k, &v) in order.iter().enumerate() {
        rank[v] = k;
    }
    let last = last_neighbor_rank(g, &rank);
    let mut frontier: Vec<usize> = Vec::new();
    let mut steps = Vec::with_capacity(n);
    for (k, &v) in order.iter().enumerate() {
        let nbr_slots = frontier
            .iter()
            .enumerate()
            .filter(|(_, &u)| g.neighbors(v).contains(&u))
            .map(|(i, _)| i)
            .collect();
        let mut extended = frontier.clone();
        extended.push(v);
        let (mut keep, mut leave) = (Vec::new(), Vec::new());
        for (i, &u) in extended.iter().enumerate() {
            if last[u] > k {
                keep.push(i);
            } else {
                leave.push(i);
            }
        }
        frontier = keep.iter().map(|&i| extended[i]).collect();
        steps.push(Step {
            vertex: v,
            nbr_slots,
            keep,
            leave,
        });
    }
    steps
}

/// Outcome of colouring the level vertex.
enum Next {
    Dead,
    Done,
    State(Vec<u8>),
}

fn transition(state: &[u8], step: &Step, colour: u8, is_root: bool, last_level: bool) -> (Next, u32) {
    let w = state.len() - 1;
    let mut closed = state[w];
    let cut = step
        .nbr_slots
        .iter()
        .filter(|&&i| state[i] & 1 != colour)
        .count() as u32;
    if closed & (1 << colour) != 0 || (is_root && colour != 0) {
        return (Next::Dead, cut);
    }

    let mut colours: Vec<u8> = state[..w].iter().map(|s| s & 1).collect();
    let mut labels: Vec<u8> = state[..w].iter().map(|s| s >> 1).collect();
    let merge: Vec<u8> = step
        .nbr_slots
        .iter()
        .filter(|&&i| colours[i] == colour)
        .map(|&i| labels[i])
        .collect();
    let target = merge.iter().copied().min().unwrap_or(FRESH);
    if merge.len() > 1 {
        for i in 0..w {
            if colours[i] == colour && merge.contains(&labels[i]) {
                labels[i] = target;
            }
        }
    }
    colours.push(colour);
    labels.push(target);

    let mut finished: Vec<u8> = Vec::new();
    for &i in &step.leave {
        let lab = labels[i];
        if finished.contains(&lab) || step.keep.iter().any(|&j| labels[j] == lab) {
            continue;
        }
        finished.push(lab);
        let bit = 1 << colours[i];
        if closed & bit != 0 {
            return (Next::Dead, cut);
        }
        closed |= bit;
    }
    for c in 0..2u8 {
        if closed & (1 << c) != 0 && step.keep.iter().any(|&j| colours[j] == c) {
            return (Next::Dead, cut);
        }
    }
    if last_level {
        return (if closed == 3 { Next::Done } else { Next::Dead }, cut);
    }
    if closed == 3 {
        return (Next::Dead, cut);
    }

    let mut relabel: Vec<(u8, u8)> = Vec::new();
    let mut next = Vec::with_capacity(step.keep.len() + 1);
    for &j in &step.keep {
        let lab = labels[j];
        let canon = match relabel.iter().find(|(old, _)| *old == lab) {
            Some(&(_, c)) => c,
            None => {
                let c = relabel.len() as u8;
                relabel.push((lab, c));
                c
            }
        };
        next.push(colours[j] | (canon << 1));
    }
    next.push(closed);
    (Next::State(next), cut)
}

/// `(population added to district 0, edges cut)` → number of paths.
type Hist = Vec<(u64, u32, u128)>;

fn merge_hist(mut h: Hist) -> Hist {
    h.sort_unstable_by_key(|&(p, e, _)| (p, e));
    let mut out: Hist = Vec::with_capacity(h.len());
    for (p, e, c) in h {
        match out.last_mut() {
            Some(last) if last.0 == p && last.1 == e => last.2 += c,
            _ => out.push((p, e, c)),
        }
    }
    out
}

impl Diagram {
    pub fn build(g: &DualGraph) -> Result<Self, EnumError> {
        let order = choose_order(g);
        let width = frontier_widths(g, &order).into_iter().max().unwrap_or(0);
        if width > MAX_WIDTH {
            return Err(EnumError::FrontierTooWide(width));
        }
        let steps = plan_steps(g, &order);
        let n = g.n();
        let mut levels: Vec<Vec<Node>> = Vec::with_capacity(n);
        let mut states: Vec<Vec<u8>> = vec![vec![0u8]];
        for (k, step) in steps.iter().enumerate() {
            let last_level = k + 1 == n;
            let mut next_index: HashMap<Vec<u8>, u32> = HashMap::new();
            let mut next_states: Vec<Vec<u8>> = Vec::new();
            let mut nodes = Vec::with_capacity(states.len());
            for state in &states {
                let mut node = Node {
                    child: [ZERO; 2],
                    cut: [0; 2],
                };
                for colour in 0..2u8 {
                    let (next, cut) =
                        transition(state, step, colour, step.vertex == 0, last_level);
                    node.cut[colour as usize] = cut;
                    node.child[colour as usize] = match next {
                        Next::Dead => ZERO,
                        Next::Done => ONE,
                        Next::State(s) => {
                            let len = next_states.len() as u32;
                            *next_index.entry(s).or_insert_with_key(|s| {
                                next_states.push(s.clone());
                                len
                            })
                        }
                    };
                }
                nodes.push(node);
            }
            levels.push(nodes);
            states = next_states;
        }
        Ok(Diagram { n, order, levels })
    }

    #[cfg(test)]
    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Completions from each node, bottom-up.
    fn backward_counts<T>(&self) -> Vec<Vec<T>>
    where
        T: Clone + Zero + One + for<'a> std::ops::AddAssign<&'a T>,
    {
        let mut counts: Vec<Vec<T>> = vec![Vec::new(); self.n];
        for k in (0..self.n).rev() {
            let mut here = Vec::with_capacity(self.levels[k].len());
            for node in &self.levels[k] {
                let mut total = T::zero();
                for &c in &node.child {
                    match c {
                        ZERO => {}
                        ONE => total += &T::one(),
                        i => total += &counts[k + 1][i as usize],
                    }
                }
                here.push(total);
            }
            counts[k] = here;
        }
        counts
    }

    pub fn count(&self) -> BigUint {
        if self.n < 127 {
            BigUint::from(self.backward_counts::<u128>()[0][0])
        } else {
            self.backward_counts::<BigUint>()[0][0].clone()
        }
    }

    /// Root-to-node path counts, saturating.
    fn forward_paths(&self) -> Vec<Vec<u128>> {
        let mut paths: Vec<Vec<u128>> = self.levels.iter().map(|l| vec![0; l.len()]).collect();
        paths[0][0] = 1;
        for k in 0..self.n - 1 {
            let (here, rest) = paths.split_at_mut(k + 1);
            for (i, node) in self.levels[k].iter().enumerate() {
                let p = here[k][i];
                if p == 0 {
                    continue;
                }
                for &c in &node.child {
                    if c != ZERO && c != ONE {
                        let slot = &mut rest[0][c as usize];
                        *slot = slot.saturating_add(p);
                    }
                }
            }
        }
        paths
    }

    fn saturating_backward(&self) -> Vec<Vec<u128>> {
        let mut counts: Vec<Vec<u128>> = vec![Vec::new(); self.n];
        for k in (0..self.n).rev() {
            counts[k] = self.levels[k]
                .iter()
                .map(|node| {
                    node.child.iter().fold(0u128, |acc, &c| match c {
                        ZERO => acc,
                        ONE => acc.saturating_add(1),
                        i => acc.saturating_add(counts[k + 1][i as usize]),
                    })
                })
                .collect();
        }
        counts
    }

    /// Level where forward and backward histogram work balance.
    fn meeting_level(&self) -> usize {
        let fwd = self.forward_paths();
        let bwd = self.saturating_backward();
        (1..self.n)
            .min_by_key(|&k| {
                let (mut f, mut b) = (0u128, 0u128);
                for i in 0..self.levels[k].len() {
                    if fwd[k][i] > 0 && bwd[k][i] > 0 {
                        f = f.saturating_add(fwd[k][i]);
                        b = b.saturating_add(bwd[k][i]);
                    }
                }
                f.max(b)
            })
            .unwrap_or(1)
    }

    fn arc_weights(&self, k: usize, node: &Node, colour: usize, pops: &[u64], use_pop: bool, use_er: bool) -> (u64, u32) {
        let pop = if use_pop && colour == 0 {
            pops[self.order[k]]
        } else {
            0
        };
        let er = if use_er { node.cut[colour] } else { 0 };
        (pop, er)
    }

    /// Number of plans with district-0 population inside `window` (if any)
    /// and cut size below `max_er` (if any).
    pub fn count_constrained(
        &self,
        pops: &[u64],
        window: Option<PopWindow>,
        max_er: Option<u32>,
    ) -> Result<BigUint, EnumError> {
        if let Some(w) = window {
            if w.lo > w.hi {
                return Ok(BigUint::zero());
            }
        }
        let use_pop = window.is_some();
        let use_er = max_er.is_some();
        let total: u64 = pops.iter().sum();
        let (lo, hi) = window.map(|w| (w.lo, w.hi)).unwrap_or((0, u64::MAX));
        let er_cap = max_er.unwrap_or(u32::MAX);
        // district 1 can hold at most total - lo
        let hi1 = total - lo.min(total);
        let admissible = |p0: u64, p1: u64, er: u32| {
            er < er_cap && (!use_pop || (p0 <= hi && p1 <= hi1))
        };

        let mid = self.meeting_level();

        // prefix[k] = population of order[..k]
        let mut prefix = vec![0u64; self.n + 1];
        for k in 0..self.n {
            prefix[k + 1] = prefix[k] + pops[self.order[k]];
        }

        let mut fwd: Vec<Hist> = vec![Vec::new(); self.levels[0].len()];
        fwd[0] = vec![(0, 0, 1)];
        for k in 0..mid {
            let mut next: Vec<Hist> = vec![Vec::new(); self.levels[k + 1].len()];
            for (i, node) in self.levels[k].iter().enumerate() {
                for colour in 0..2 {
                    let c = node.child[colour];
                    if c == ZERO || c == ONE {
                        continue;
                    }
                    let (dp, de) = self.arc_weights(k, node, colour, pops, use_pop, use_er);
                    let dst = &mut next[c as usize];
                    for &(p, e, cnt) in &fwd[i] {
                        let (p, e) = (p + dp, e + de);
                        let p1 = if use_pop { prefix[k + 1] - p } else { 0 };
                        if admissible(p, p1, e) {
                            dst.push((p, e, cnt));
                        }
                    }
                }
            }
            fwd = next.into_iter().map(merge_hist).collect();
        }

        let mut bwd: Vec<Hist> = Vec::new();
        for k in (mid..self.n).rev() {
            let mut here: Vec<Hist> = Vec::with_capacity(self.levels[k].len());
            for node in &self.levels[k] {
                let mut h: Hist = Vec::new();
                for colour in 0..2 {
                    let c = node.child[colour];
                    let (dp, de) = self.arc_weights(k, node, colour, pops, use_pop, use_er);
                    let src: &[(u64, u32, u128)] = match c {
                        ZERO => continue,
                        ONE => &[(0, 0, 1)],
                        i => &bwd[i as usize],
                    };
                    for &(p, e, cnt) in src {
                        let (p, e) = (p + dp, e + de);
                        let p1 = if use_pop { prefix[self.n] - prefix[k] - p } else { 0 };
                        if admissible(p, p1, e) {
                            h.push((p, e, cnt));
                        }
                    }
                }
                here.push(merge_hist(h));
            }
            bwd = here;
        }

        let mut total_count: u128 = 0;
        for (f, b) in fwd.iter().zip(&bwd) {
            if f.is_empty() || b.is_empty() {
                continue;
            }
            // per cut size: sorted populations with prefix sums of counts
            let mut groups: BTreeMap<u32, (Vec<u64>, Vec<u128>)> = BTreeMap::new();
            for &(p, e, cnt) in b {
                let g = groups.entry(e).or_default();
                let acc = g.1.last().copied().unwrap_or(0);
                g.0.push(p);
                g.1.push(acc.checked_add(cnt).ok_or(EnumError::Overflow)?);
            }
            for &(pf, ef, cf) in f {
                for (&eb, (ps, acc)) in groups.range(..er_cap.saturating_sub(ef)) {
                    debug_assert!(ef + eb < er_cap);
                    let a = ps.partition_point(|&p| p + pf < lo);
                    let z = ps.partition_point(|&p| p + pf <= hi);
                    if z > a {
                        let matched = acc[z - 1] - if a > 0 { acc[a - 1] } else { 0 };
                        let add = matched.checked_mul(cf).ok_or(EnumError::Overflow)?;
                        total_count = total_count.checked_add(add).ok_or(EnumError::Overflow)?;
                    }
                }
            }
        }
        Ok(BigUint::from(total_count))
    }

    /// Depth-first walk over every admissible plan. `visit` returns `false`
    /// to stop early.
    pub fn walk(
        &self,
        pops: &[u64],
        window: Option<PopWindow>,
        max_er: Option<u32>,
        visit: &mut dyn FnMut(&Plan) -> bool,
    ) {
        if let Some(w) = window {
            if w.lo > w.hi {
                return;
            }
        }
        let bounds = self.completion_bounds(pops);
        let mut ctx = Walk {
            d: self,
            pops,
            window,
            er_cap: max_er.unwrap_or(u32::MAX),
            bounds: &bounds,
            plan: Plan::empty(self.n),
            visit,
            stopped: false,
        };
        ctx.descend(0, 0, 0, 0);
    }

    /// Per node: (min future district-0 population, max future district-0
    /// population, min future cut) over completions; `None` for dead nodes.
    fn completion_bounds(&self, pops: &[u64]) -> Vec<Vec<Option<(u64, u64, u32)>>> {
        let mut b: Vec<Vec<Option<(u64, u64, u32)>>> = vec![Vec::new(); self.n];
        for k in (0..self.n).rev() {
            b[k] = self.levels[k]
                .iter()
                .map(|node| {
                    let mut acc: Option<(u64, u64, u32)> = None;
                    for colour in 0..2 {
                        let (dp, de) = self.arc_weights(k, node, colour, pops, true, true);
                        let sub = match node.child[colour] {
                            ZERO => None,
                            ONE => Some((0, 0, 0)),
                            i => b[k + 1][i as usize],
                        };
                        if let Some((lo, hi, e)) = sub {
                            let cand = (lo + dp, hi + dp, e + de);
                            acc = Some(match acc {
                                None => cand,
                                Some(a) => (a.0.min(cand.0), a.1.max(cand.1), a.2.min(cand.2)),
                            });
                        }
                    }
                    acc
                })
                .collect();
        }
        b
    }
}

struct Walk<'a> {
    d: &'a Diagram,
    pops: &'a [u64],
    window: Option<PopWindow>,
    er_cap: u32,
    bounds: &'a [Vec<Option<(u64, u64, u32)>>],
    plan: Plan,
    visit: &'a mut dyn FnMut(&Plan) -> bool,
    stopped: bool,
}

impl Walk<'_> {
    fn descend(&mut self, k: usize, i: usize, pop0: u64, er: u32) {
        let Some((min_p, max_p, min_e)) = self.bounds[k][i] else {
            return;
        };
        if er + min_e >= self.er_cap {
            return;
        }
        if let Some(w) = self.window {
            if pop0 + min_p > w.hi || pop0 + max_p < w.lo {
                return;
            }
        }
        let node = self.d.levels[k][i];
        let v = self.d.order[k];
        for colour in 0..2u8 {
            if self.stopped {
                return;
            }
            let child = node.child[colour as usize];
            if child == ZERO {
                continue;
            }
            let p = pop0 + if colour == 0 { self.pops[v] } else { 0 };
            let e = er + node.cut[colour as usize];
            self.plan.set(v, colour);
            if child == ONE {
                let ok = e < self.er_cap && self.window.is_none_or(|w| w.contains(p));
                if ok && !(self.visit)(&self.plan) {
                    self.stopped = true;
                }
            } else {
                self.descend(k + 1, child as usize, p, e);
            }
        }
        self.plan.set(v, 0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: usize, cols: usize) -> DualGraph {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        DualGraph::from_edges(&vec![1; rows * cols], &edges).unwrap()
    }

    #[test]
    fn order_is_a_permutation() {
        let g = grid(4, 5);
        let mut o = choose_order(&g);
        o.sort_unstable();
        assert_eq!(o, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn grid_frontier_stays_narrow() {
        let g = grid(6, 6);
        let order = choose_order(&g);
        let w = frontier_widths(&g, &order).into_iter().max().unwrap();
        assert!(w <= 8, "width {w}");
    }

    #[test]
    fn diagram_is_compact_on_grids() {
        let g = grid(5, 5);
        let d = Diagram::build(&g).unwrap();
        assert!(d.node_count() < 20_000, "{}", d.node_count());
    }

    #[test]
    fn constrained_count_without_constraints_matches_plain_count() {
        let g = grid(4, 4);
        let d = Diagram::build(&g).unwrap();
        let plain = d.count();
        let c = d.count_constrained(&g.populations(), None, None).unwrap();
        assert_eq!(plain, c);
    }
}
