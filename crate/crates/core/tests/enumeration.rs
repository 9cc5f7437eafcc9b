mod common;

use std::collections::BTreeSet;

use num_bigint::BigUint;
use proptest::prelude::*;
use rand::Rng;
use redist_core::enumerate::{brute_force_plans, collect_plans, count_plans, enumerate_plans, EnumError};
use redist_core::{ConstraintSet, DevBound, DualGraph, Plan};

use common::*;

fn as_set(plans: Vec<Plan>) -> BTreeSet<Plan> {
    let n = plans.len();
    let s: BTreeSet<Plan> = plans.into_iter().collect();
    assert_eq!(s.len(), n, "duplicate plan emitted");
    s
}

fn check_equivalent(g: &DualGraph, c: &ConstraintSet, label: &str) {
    let fast = collect_plans(g, c).unwrap();
    for p in &fast {
        assert!(p.is_canonical(), "{label}: non-canonical plan");
        assert!(p.is_valid_for(g), "{label}: invalid plan {p:?}");
        assert!(c.admits_plan(g, p), "{label}: plan outside constraints");
    }
    let fast = as_set(fast);
    let slow = as_set(brute_force_plans(g, c).unwrap());
    assert_eq!(fast, slow, "{label}: plan sets differ under {c:?}");
    assert_eq!(count_plans(g, c).unwrap(), BigUint::from(slow.len()), "{label}: count");
}

fn constraint_grid() -> Vec<ConstraintSet> {
    let mut out = vec![ConstraintSet::none()];
    for dev in ["0.02", "0.1", "0.25", "0.6"] {
        for er in [None, Some(2), Some(4)] {
            out.push(ConstraintSet {
                max_pop_dev: Some(DevBound::from_decimal(dev).unwrap()),
                max_er: er,
            });
        }
    }
    out.push(ConstraintSet::new(None, Some(3)).unwrap());
    out
}

#[test]
fn families_match_brute_force() {
    let mut r = rng(1);
    for (name, edges, n) in families() {
        let flat = graph(&vec![1; n], &edges);
        let pops: Vec<u64> = (0..n).map(|_| r.gen_range(0..40)).collect();
        let weighted = graph(&pops, &edges);
        for c in constraint_grid() {
            check_equivalent(&flat, &c, &name);
            if weighted.total_population() > 0 {
                check_equivalent(&weighted, &c, &name);
            }
        }
    }
}

#[test]
fn random_graphs_match_brute_force() {
    let mut r = rng(2);
    let cs = constraint_grid();
    for i in 0..240 {
        let n = r.gen_range(2..=10);
        let p = [0.1, 0.25, 0.5][i % 3];
        let edges = random_connected(n, p, &mut r);
        let pops: Vec<u64> = (0..n).map(|_| r.gen_range(1..100)).collect();
        let g = graph(&pops, &edges);
        check_equivalent(&g, &ConstraintSet::none(), &format!("random#{i}"));
        check_equivalent(&g, &cs[1 + i % (cs.len() - 1)], &format!("random#{i}"));
    }
}

#[test]
fn four_by_four_grid_counts_match_subset_search() {
    let g = graph(&[1; 16], &grid(4, 4));
    let brute = brute_force_plans(&g, &ConstraintSet::none()).unwrap().len();
    assert_eq!(count_plans(&g, &ConstraintSet::none()).unwrap(), BigUint::from(brute));
    let half = ConstraintSet::new(Some(0.01), None).unwrap();
    let brute = brute_force_plans(&g, &half).unwrap();
    assert!(brute.iter().all(|p| p.size(0) == 8));
    check_equivalent(&g, &half, "grid4x4");
}

#[test]
fn trivial_counts() {
    let g = graph(&[1, 1], &[(0, 1)]);
    assert_eq!(count_plans(&g, &ConstraintSet::none()).unwrap(), BigUint::from(1u32));
    let g = graph(&[1; 3], &path(3));
    assert_eq!(count_plans(&g, &ConstraintSet::none()).unwrap(), BigUint::from(2u32));
}

#[test]
fn larger_graphs_agree_between_count_and_walk() {
    // beyond brute force: count and materialisation must still agree
    let mut r = rng(3);
    for _ in 0..6 {
        let n = r.gen_range(26..40);
        let edges = random_connected(n, 0.08, &mut r);
        let pops: Vec<u64> = (0..n).map(|_| r.gen_range(1_000..20_000)).collect();
        let g = graph(&pops, &edges);
        let c = ConstraintSet::new(Some(0.05), Some(12)).unwrap();
        let counted = count_plans(&g, &c).unwrap();
        let mut seen = BTreeSet::new();
        let emitted = enumerate_plans(&g, &c, |p| {
            assert!(p.is_valid_for(&g) && c.admits_plan(&g, p));
            seen.insert(p.clone());
            Ok::<(), std::io::Error>(())
        })
        .unwrap();
        assert_eq!(BigUint::from(emitted), counted);
        assert_eq!(seen.len() as u64, emitted);
    }
}

#[test]
fn upper_bound_on_count() {
    for n in 2..=12 {
        let g = graph(&vec![1; n], &complete(n));
        let bound = (BigUint::from(1u32) << (n - 1)) - 1u32;
        assert_eq!(count_plans(&g, &ConstraintSet::none()).unwrap(), bound);
    }
}

#[test]
fn sink_failure_reports_progress() {
    let g = graph(&[1; 6], &cycle(6));
    let mut k = 0;
    let err = enumerate_plans(&g, &ConstraintSet::none(), |_| {
        k += 1;
        if k == 4 {
            Err(std::io::Error::other("disk full"))
        } else {
            Ok(())
        }
    })
    .unwrap_err();
    assert!(matches!(err, EnumError::Sink { emitted: 3, .. }), "{err}");
}

#[test]
fn disconnected_graph_is_rejected() {
    let g = graph(&[1; 4], &[(0, 1), (2, 3)]);
    assert!(matches!(count_plans(&g, &ConstraintSet::none()), Err(EnumError::Disconnected)));
}

#[test]
fn pruned_graph_plans_are_a_subset() {
    // dropping an edge can only remove plans: contiguity on fewer edges is harder
    let mut r = rng(4);
    for _ in 0..40 {
        let n = r.gen_range(4..=9);
        let edges = random_connected(n, 0.4, &mut r);
        let full = graph(&vec![1; n], &edges);
        let tree_edges = n - 1;
        let kept: Vec<_> = edges
            .iter()
            .enumerate()
            .filter(|(i, _)| *i < tree_edges || r.gen_bool(0.5))
            .map(|(_, e)| *e)
            .collect();
        let sub = graph(&vec![1; n], &kept);
        if !sub.is_connected() {
            continue;
        }
        let a = as_set(collect_plans(&full, &ConstraintSet::none()).unwrap());
        let b = as_set(collect_plans(&sub, &ConstraintSet::none()).unwrap());
        assert!(b.is_subset(&a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tightening_never_increases_count(
        seed in any::<u64>(),
        n in 3usize..=9,
        dev_wide in 10u32..100,
        dev_narrow_frac in 1u32..100,
        er_wide in 2u32..12,
        er_drop in 0u32..6,
    ) {
        let mut r = rng(seed);
        let edges = random_connected(n, 0.35, &mut r);
        let pops: Vec<u64> = (0..n).map(|_| r.gen_range(1..50)).collect();
        let g = graph(&pops, &edges);
        let wide = DevBound::new(dev_wide as u128, 100).unwrap();
        let narrow = DevBound::new((dev_wide * dev_narrow_frac).max(1) as u128, 10_000).unwrap();
        let er_narrow = er_wide.saturating_sub(er_drop).max(1);
        let loose = ConstraintSet { max_pop_dev: Some(wide), max_er: Some(er_wide) };
        let tight_dev = ConstraintSet { max_pop_dev: Some(narrow), max_er: Some(er_wide) };
        let tight_er = ConstraintSet { max_pop_dev: Some(wide), max_er: Some(er_narrow) };
        let all = count_plans(&g, &ConstraintSet::none()).unwrap();
        let base = count_plans(&g, &loose).unwrap();
        prop_assert!(base <= all);
        prop_assert!(count_plans(&g, &tight_dev).unwrap() <= base.clone());
        prop_assert!(count_plans(&g, &tight_er).unwrap() <= base);
    }

    #[test]
    fn relabelling_preserves_count(seed in any::<u64>(), n in 3usize..=10) {
        let mut r = rng(seed);
        let edges = random_connected(n, 0.3, &mut r);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, r.gen_range(0..=i));
        }
        let moved: Vec<_> = edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let a = count_plans(&graph(&vec![1; n], &edges), &ConstraintSet::none()).unwrap();
        let b = count_plans(&graph(&vec![1; n], &moved), &ConstraintSet::none()).unwrap();
        prop_assert_eq!(a, b);
    }
}
