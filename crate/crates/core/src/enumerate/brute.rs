//! Exhaustive subset search, used as the ground truth for small graphs.

use super::{ConstraintSet, EnumError};
use crate::graph::DualGraph;
use crate::plan::Plan;

pub const BRUTE_FORCE_MAX_N: usize = 25;

fn connected(mask: u32, adj: &[u32]) -> bool {
    if mask == 0 {
        return false;
    }
    let mut reach = mask & mask.wrapping_neg();
    loop {
        let mut next = reach;
        let mut bits = reach;
        while bits != 0 {
            let v = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            next |= adj[v] & mask;
        }
        if next == reach {
            return reach == mask;
        }
        reach = next;
    }
}

/// Every contiguous bipartition satisfying `c`, found by testing all
/// `2^(n-1)` subsets that keep unit 0 in district 0.
pub fn brute_force_plans(g: &DualGraph, c: &ConstraintSet) -> Result<Vec<Plan>, EnumError> {
    let n = g.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(EnumError::TooLarge(n));
    }
    if n < 2 {
        return Err(EnumError::TooSmall(n));
    }
    let total = g.total_population();
    if c.max_pop_dev.is_some() && total == 0 {
        return Err(EnumError::ZeroPopulation);
    }
    let mut adj = vec![0u32; n];
    for e in g.edges() {
        adj[e.a] |= 1 << e.b;
        adj[e.b] |= 1 << e.a;
    }
    let pops = g.populations();
    let full: u32 = if n == 32 { u32::MAX } else { (1 << n) - 1 };

    let mut out = Vec::new();
    for rest in 1u32..(1 << (n - 1)) {
        let d1 = rest << 1;
        let d0 = full & !d1;
        if !connected(d0, &adj) || !connected(d1, &adj) {
            continue;
        }
        let pop0: u64 = (0..n).filter(|&i| d0 >> i & 1 == 1).map(|i| pops[i]).sum();
        let er = g
            .edges()
            .iter()
            .filter(|e| (d1 >> e.a & 1) != (d1 >> e.b & 1))
            .count() as u32;
        if c.admits(pop0, total, er) {
            out.push(Plan::from_district1(n, (0..n).filter(|&i| d1 >> i & 1 == 1)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_of_four() {
        let g = DualGraph::from_edges(&[1; 4], &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(brute_force_plans(&g, &ConstraintSet::none()).unwrap().len(), 3);
    }

    #[test]
    fn k4_has_seven() {
        let g = DualGraph::from_edges(
            &[1; 4],
            &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        )
        .unwrap();
        assert_eq!(brute_force_plans(&g, &ConstraintSet::none()).unwrap().len(), 7);
    }

    #[test]
    fn c5_has_ten() {
        let edges: Vec<_> = (0..5).map(|i| (i, (i + 1) % 5)).collect();
        let g = DualGraph::from_edges(&[1; 5], &edges).unwrap();
        let plans = brute_force_plans(&g, &ConstraintSet::none()).unwrap();
        let ones = plans.iter().filter(|p| p.size(1) == 1 || p.size(0) == 1).count();
        assert_eq!((plans.len(), ones), (10, 5));
    }

    #[test]
    fn size_cap() {
        let n = BRUTE_FORCE_MAX_N + 1;
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        let g = DualGraph::from_edges(&vec![1; n], &edges).unwrap();
        assert!(matches!(
            brute_force_plans(&g, &ConstraintSet::none()),
            Err(EnumError::TooLarge(26))
        ));
    }
}
