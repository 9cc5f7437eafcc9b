mod common;

use std::collections::{BTreeMap, HashMap};

use redist_core::enumerate::collect_plans;
use redist_core::metrics::edges_removed;
use redist_core::recom::{run_chain, run_chain_with, unique_plans, AcceptPolicy, ChainConfig, Provenance};
use redist_core::trees::{proposal_distribution, ratio_to_f64};
use redist_core::{ConstraintSet, DualGraph, Ensemble, Plan};

use common::*;

/// 2×3 grid with one diagonal; unit populations force 3|3 splits.
fn six_node() -> (DualGraph, ConstraintSet) {
    let mut e = grid(2, 3);
    e.push((0, 4));
    (graph(&[1; 6], &e), ConstraintSet::new(Some(0.1), None).unwrap())
}

fn visit_frequencies(e: &Ensemble) -> HashMap<Plan, f64> {
    let mut f = HashMap::new();
    for p in e.plans() {
        *f.entry(p.clone()).or_insert(0.0) += 1.0 / e.len() as f64;
    }
    f
}

fn tv_to_proposal(g: &DualGraph, c: &ConstraintSet, e: &Ensemble) -> f64 {
    let plans = collect_plans(g, c).unwrap();
    let dist = proposal_distribution(g, &plans).unwrap();
    let freq = visit_frequencies(e);
    assert!(freq.keys().all(|p| dist.probability_of(p).is_some()), "visited a plan outside E");
    dist.per_plan
        .iter()
        .map(|(p, pr)| (ratio_to_f64(pr) - freq.get(p).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
        / 2.0
}

#[test]
fn six_node_visits_match_proposal_distribution() {
    let (g, c) = six_node();
    let seed = Plan::from_districts(&[0, 0, 0, 1, 1, 1]);
    let cfg = ChainConfig::new(50_000, c, vec![seed], 2024);
    let e = run_chain(&g, &cfg).unwrap();
    assert_eq!(e.len(), 50_000);
    let tv = tv_to_proposal(&g, &c, &e);
    assert!(tv <= 0.05, "total variation {tv}");
}

#[test]
fn five_node_visits_match_proposal_distribution() {
    // one heavy unit so that a 3|3 population split is a 2|3 unit split
    let g = graph(&[2, 1, 1, 1, 1], &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]);
    let c = ConstraintSet::new(Some(0.1), None).unwrap();
    let seed = Plan::from_districts(&[0, 0, 1, 1, 1]);
    let cfg = ChainConfig::new(50_000, c, vec![seed], 99);
    let e = run_chain(&g, &cfg).unwrap();
    let tv = tv_to_proposal(&g, &c, &e);
    assert!(tv <= 0.05, "total variation {tv}");
}

#[test]
fn runs_are_reproducible() {
    let (g, c) = six_node();
    let seeds = vec![
        Plan::from_districts(&[0, 0, 0, 1, 1, 1]),
        Plan::from_districts(&[0, 1, 1, 0, 0, 1]),
    ];
    let cfg = ChainConfig::new(2_001, c, seeds, 5);
    let a = run_chain(&g, &cfg).unwrap();
    let (b, _) = run_chain_with(&g, &cfg, 3).unwrap();
    assert_eq!(a.entries, b.entries);
    let other = ChainConfig { rng_seed: 6, ..cfg };
    assert_ne!(a.entries, run_chain(&g, &other).unwrap().entries);
}

#[test]
fn always_policy_records_only_admissible_plans() {
    let mut r = rng(31);
    for _ in 0..10 {
        let n = 9;
        let edges = random_connected(n, 0.3, &mut r);
        let pops: Vec<u64> = (0..n as u64).map(|i| 10 + i % 3).collect();
        let g = graph(&pops, &edges);
        let c = ConstraintSet::new(Some(0.3), Some(6)).unwrap();
        let Some(seed) = collect_plans(&g, &c).unwrap().into_iter().next() else {
            continue;
        };
        let e = run_chain(&g, &ChainConfig::new(500, c, vec![seed], 1)).unwrap();
        assert_eq!(e.len(), 500);
        for p in e.plans() {
            assert!(p.is_valid_for(&g) && c.admits_plan(&g, p));
        }
    }
}

#[test]
fn thresholded_policy_keeps_hard_constraints() {
    let (g, _) = six_node();
    let hard = ConstraintSet::new(Some(0.5), Some(6)).unwrap();
    let inner = ConstraintSet::new(Some(0.1), Some(4)).unwrap();
    let mut cfg = ChainConfig::new(3_000, hard, vec![Plan::from_districts(&[0, 0, 0, 1, 1, 1])], 8);
    cfg.accept = AcceptPolicy::Thresholded {
        inner,
        fallback_prob: 0.05,
    };
    let e = run_chain(&g, &cfg).unwrap();
    assert!(e.plans().all(|p| hard.admits_plan(&g, p)));
    let outside = e.plans().filter(|p| !inner.admits_plan(&g, p)).count();
    assert!(outside > 0 && outside < e.len() / 2, "{outside} plans outside the soft bounds");
}

fn er_distribution<'a>(g: &DualGraph, plans: impl Iterator<Item = &'a Plan>) -> BTreeMap<u32, f64> {
    let mut d = BTreeMap::new();
    let mut n = 0.0;
    for p in plans {
        *d.entry(edges_removed(g, p)).or_insert(0.0) += 1.0;
        n += 1.0;
    }
    d.values_mut().for_each(|v| *v /= n);
    d
}

fn tv(a: &BTreeMap<u32, f64>, b: &BTreeMap<u32, f64>) -> f64 {
    let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
        / 2.0
}

#[test]
fn unique_plans_track_uniform_er_better_than_raw_visits() {
    let (g, c) = six_node();
    let all = collect_plans(&g, &c).unwrap();
    let uniform = er_distribution(&g, all.iter());
    let e = run_chain(&g, &ChainConfig::new(20_000, c, vec![all[0].clone()], 3)).unwrap();
    let u = unique_plans(&e);
    let raw_tv = tv(&er_distribution(&g, e.plans()), &uniform);
    let unique_tv = tv(&er_distribution(&g, u.plans()), &uniform);
    assert!(unique_tv < raw_tv, "unique {unique_tv} vs raw {raw_tv}");
    assert!(u.unique_count() <= e.len());
}

#[test]
fn enumerated_ensembles_are_already_unique() {
    let (g, c) = six_node();
    let plans = collect_plans(&g, &c).unwrap();
    let e = Ensemble::from_plans(g.id(), Provenance::Enumerated, plans);
    let u = unique_plans(&e);
    assert_eq!(u.entries, e.entries);
}
