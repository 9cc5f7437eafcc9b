//! Two-district recombination (ReCom) chain and ensemble bookkeeping.
//!
//! With two districts the merged region is the whole graph, so every step
//! draws a uniform spanning tree of `g`, collects the tree edges whose
//! removal leaves district 0 inside the hard population window, and cuts one
//! of them uniformly at random. The candidate must then satisfy the hard cut
//! size bound and the acceptance policy; otherwise the step repeats the
//! current plan. Every step records exactly one plan.

use std::collections::HashSet;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::enumerate::{ConstraintSet, EnumError, PopWindow};
use crate::graph::DualGraph;
use crate::metrics::edges_removed;
use crate::plan::Plan;
use crate::trees::{wilson, WilsonBuffer};

pub const DEFAULT_MAX_TREE_RETRIES: u32 = 100;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("steps must be at least 1")]
    NoSteps,
    #[error("at least one seed plan is required")]
    NoSeeds,
    #[error("seed plan {0} is not a valid contiguous bipartition of the graph")]
    InvalidSeed(usize),
    #[error("seed plan {0} violates the hard constraints")]
    SeedViolatesConstraints(usize),
    #[error("fallback probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("max_tree_retries must be at least 1")]
    NoRetries,
    #[error("graph is not connected")]
    Disconnected,
    #[error(transparent)]
    Constraint(#[from] EnumError),
    #[error("thread pool: {0}")]
    Threads(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum AcceptPolicy {
    /// Accept every proposal that satisfies the hard constraints.
    Always,
    /// Accept proposals satisfying `inner`; accept others with probability
    /// `fallback_prob`.
    Thresholded {
        inner: ConstraintSet,
        fallback_prob: f64,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainConfig {
    pub steps: u64,
    pub hard_constraints: ConstraintSet,
    pub accept: AcceptPolicy,
    pub seeds: Vec<Plan>,
    pub rng_seed: u64,
    pub max_tree_retries: u32,
}

impl ChainConfig {
    pub fn new(steps: u64, hard_constraints: ConstraintSet, seeds: Vec<Plan>, rng_seed: u64) -> Self {
        ChainConfig {
            steps,
            hard_constraints,
            accept: AcceptPolicy::Always,
            seeds,
            rng_seed,
            max_tree_retries: DEFAULT_MAX_TREE_RETRIES,
        }
    }

    pub fn validate(&self, g: &DualGraph) -> Result<(), ChainError> {
        if self.steps == 0 {
            return Err(ChainError::NoSteps);
        }
        if self.seeds.is_empty() {
            return Err(ChainError::NoSeeds);
        }
        if self.max_tree_retries == 0 {
            return Err(ChainError::NoRetries);
        }
        if let AcceptPolicy::Thresholded { fallback_prob, .. } = self.accept {
            if !(0.0..=1.0).contains(&fallback_prob) {
                return Err(ChainError::BadProbability(fallback_prob));
            }
        }
        if !g.is_connected() {
            return Err(ChainError::Disconnected);
        }
        self.hard_constraints.window(g.total_population())?;
        for (i, s) in self.seeds.iter().enumerate() {
            if !s.is_valid_for(g) {
                return Err(ChainError::InvalidSeed(i));
            }
            if !self.hard_constraints.admits_plan(g, s) {
                return Err(ChainError::SeedViolatesConstraints(i));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Enumerated,
    Chain,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnsembleEntry {
    pub step: u64,
    pub plan: Plan,
}

/// Ordered multiset of plans.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub graph_id: String,
    pub provenance: Provenance,
    pub entries: Vec<EnsembleEntry>,
    unique: OnceLock<Vec<usize>>,
}

impl Ensemble {
    pub fn new(graph_id: impl Into<String>, provenance: Provenance, entries: Vec<EnsembleEntry>) -> Self {
        Ensemble {
            graph_id: graph_id.into(),
            provenance,
            entries,
            unique: OnceLock::new(),
        }
    }

    pub fn from_plans(graph_id: impl Into<String>, provenance: Provenance, plans: Vec<Plan>) -> Self {
        let entries = plans
            .into_iter()
            .enumerate()
            .map(|(i, plan)| EnsembleEntry {
                step: i as u64,
                plan,
            })
            .collect();
        Self::new(graph_id, provenance, entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn plans(&self) -> impl Iterator<Item = &Plan> {
        self.entries.iter().map(|e| &e.plan)
    }

    fn unique_indices(&self) -> &[usize] {
        self.unique.get_or_init(|| {
            let mut seen = HashSet::new();
            self.entries
                .iter()
                .enumerate()
                .filter(|(_, e)| seen.insert(e.plan.canonical()))
                .map(|(i, _)| i)
                .collect()
        })
    }

    pub fn unique_count(&self) -> usize {
        self.unique_indices().len()
    }

    /// First occurrence of each distinct plan, in order.
    pub fn unique_plans(&self) -> Ensemble {
        let entries = self
            .unique_indices()
            .iter()
            .map(|&i| self.entries[i].clone())
            .collect();
        Ensemble::new(self.graph_id.clone(), self.provenance, entries)
    }
}

pub fn unique_plans(e: &Ensemble) -> Ensemble {
    e.unique_plans()
}

/// What happened during one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Accepted,
    /// No tree among the retries had a balanced edge.
    NoBalancedCut,
    /// The cut candidate failed the hard cut-size bound.
    HardReject,
    /// The acceptance policy declined the candidate.
    PolicyReject,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    /// Candidate produced by the balanced cut, if any.
    pub proposal: Option<Plan>,
    pub kind: StepKind,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ChainStats {
    pub accepted: u64,
    pub no_balanced_cut: u64,
    pub hard_rejects: u64,
    pub policy_rejects: u64,
}

impl ChainStats {
    fn record(&mut self, kind: StepKind) {
        match kind {
            StepKind::Accepted => self.accepted += 1,
            StepKind::NoBalancedCut => self.no_balanced_cut += 1,
            StepKind::HardReject => self.hard_rejects += 1,
            StepKind::PolicyReject => self.policy_rejects += 1,
        }
    }

    fn merge(&mut self, o: &ChainStats) {
        self.accepted += o.accepted;
        self.no_balanced_cut += o.no_balanced_cut;
        self.hard_rejects += o.hard_rejects;
        self.policy_rejects += o.policy_rejects;
    }
}

/// Reusable per-chain state for drawing and cutting trees.
struct Proposer<'g> {
    g: &'g DualGraph,
    window: Option<PopWindow>,
    total: u64,
    buf: WilsonBuffer,
    children: Vec<Vec<usize>>,
    order: Vec<usize>,
    sub_pop: Vec<u64>,
    has_zero: Vec<bool>,
    cuttable: Vec<usize>,
}

impl<'g> Proposer<'g> {
    fn new(g: &'g DualGraph, hard: &ConstraintSet) -> Result<Self, ChainError> {
        let n = g.n();
        Ok(Proposer {
            g,
            window: hard.window(g.total_population())?,
            total: g.total_population(),
            buf: WilsonBuffer::new(n),
            children: vec![Vec::new(); n],
            order: Vec::with_capacity(n),
            sub_pop: vec![0; n],
            has_zero: vec![false; n],
            cuttable: Vec::new(),
        })
    }

    /// Draws trees until one has a balanced edge, then cuts one of those
    /// edges uniformly at random.
    fn propose<R: Rng + ?Sized>(&mut self, retries: u32, rng: &mut R) -> Option<Plan> {
        for _ in 0..retries {
            wilson(self.g, &mut self.buf, rng);
            self.measure_subtrees();
            self.cuttable.clear();
            for &v in &self.order[1..] {
                let pop0 = if self.has_zero[v] {
                    self.sub_pop[v]
                } else {
                    self.total - self.sub_pop[v]
                };
                if self.window.is_none_or(|w| w.contains(pop0)) {
                    self.cuttable.push(v);
                }
            }
            if self.cuttable.is_empty() {
                continue;
            }
            let v = self.cuttable[rng.gen_range(0..self.cuttable.len())];
            return Some(self.split_at(v));
        }
        None
    }

    fn measure_subtrees(&mut self) {
        let n = self.g.n();
        for c in &mut self.children {
            c.clear();
        }
        for v in 0..n {
            let p = self.buf.next[v];
            if p != usize::MAX {
                self.children[p].push(v);
            }
        }
        self.order.clear();
        self.order.push(self.buf.root);
        let mut i = 0;
        while i < self.order.len() {
            let v = self.order[i];
            self.order.extend_from_slice(&self.children[v]);
            i += 1;
        }
        for &v in self.order.iter().rev() {
            let mut pop = self.g.units()[v].population;
            let mut zero = v == 0;
            for &c in &self.children[v] {
                pop += self.sub_pop[c];
                zero |= self.has_zero[c];
            }
            self.sub_pop[v] = pop;
            self.has_zero[v] = zero;
        }
    }

    /// Plan from cutting the edge between `v` and its parent.
    fn split_at(&self, v: usize) -> Plan {
        let mut below = vec![v];
        let mut i = 0;
        while i < below.len() {
            below.extend_from_slice(&self.children[below[i]]);
            i += 1;
        }
        let plan = Plan::from_district1(self.g.n(), below);
        // the side holding unit 0 is district 0
        plan.canonical()
    }
}

fn decide<R: Rng + ?Sized>(
    g: &DualGraph,
    candidate: &Plan,
    hard: &ConstraintSet,
    accept: &AcceptPolicy,
    rng: &mut R,
) -> StepKind {
    if let Some(max_er) = hard.max_er {
        if edges_removed(g, candidate) >= max_er {
            return StepKind::HardReject;
        }
    }
    match accept {
        AcceptPolicy::Always => StepKind::Accepted,
        AcceptPolicy::Thresholded {
            inner,
            fallback_prob,
        } => {
            if inner.admits_plan(g, candidate) || rng.gen::<f64>() < *fallback_prob {
                StepKind::Accepted
            } else {
                StepKind::PolicyReject
            }
        }
    }
}

/// A single chain started from one seed plan.
pub struct RecomChain<'g> {
    g: &'g DualGraph,
    proposer: Proposer<'g>,
    hard: ConstraintSet,
    accept: AcceptPolicy,
    retries: u32,
    state: Plan,
    rng: ChaCha8Rng,
    stats: ChainStats,
}

impl<'g> RecomChain<'g> {
    /// Chain `index` of a run draws from ChaCha8 stream `index` under
    /// `cfg.rng_seed`.
    pub fn new(g: &'g DualGraph, cfg: &ChainConfig, seed: Plan, index: u64) -> Result<Self, ChainError> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(index);
        Ok(RecomChain {
            g,
            proposer: Proposer::new(g, &cfg.hard_constraints)?,
            hard: cfg.hard_constraints,
            accept: cfg.accept.clone(),
            retries: cfg.max_tree_retries,
            state: seed.canonical(),
            rng,
            stats: ChainStats::default(),
        })
    }

    pub fn state(&self) -> &Plan {
        &self.state
    }

    pub fn stats(&self) -> ChainStats {
        self.stats
    }

    pub fn step(&mut self) -> StepOutcome {
        let proposal = self.proposer.propose(self.retries, &mut self.rng);
        let kind = match &proposal {
            None => StepKind::NoBalancedCut,
            Some(p) => decide(self.g, p, &self.hard, &self.accept, &mut self.rng),
        };
        if kind == StepKind::Accepted {
            self.state = proposal.clone().expect("accepted step has a proposal");
        }
        self.stats.record(kind);
        StepOutcome { proposal, kind }
    }
}

/// One recombination step from `current`.
pub fn recom_step<R: Rng + ?Sized>(
    g: &DualGraph,
    current: &Plan,
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<Plan, ChainError> {
    let mut proposer = Proposer::new(g, &cfg.hard_constraints)?;
    Ok(match proposer.propose(cfg.max_tree_retries, rng) {
        Some(p) if decide(g, &p, &cfg.hard_constraints, &cfg.accept, rng) == StepKind::Accepted => p,
        _ => current.clone(),
    })
}

/// Steps per chain: equal shares, remainder to the first chains.
fn chain_lengths(steps: u64, k: usize) -> Vec<u64> {
    let k64 = k as u64;
    (0..k64)
        .map(|i| steps / k64 + u64::from(i < steps % k64))
        .collect()
}

pub fn run_chain(g: &DualGraph, cfg: &ChainConfig) -> Result<Ensemble, ChainError> {
    run_chain_with(g, cfg, 1).map(|(e, _)| e)
}

/// Runs one chain per seed, `steps / seeds` steps each, on up to `threads`
/// worker threads, and concatenates them in seed order. Output does not
/// depend on `threads`.
pub fn run_chain_with(
    g: &DualGraph,
    cfg: &ChainConfig,
    threads: usize,
) -> Result<(Ensemble, ChainStats), ChainError> {
    cfg.validate(g)?;
    let lengths = chain_lengths(cfg.steps, cfg.seeds.len());
    let mut offsets = Vec::with_capacity(lengths.len());
    let mut acc = 0;
    for &l in &lengths {
        offsets.push(acc);
        acc += l;
    }
    let run_one = |i: usize| -> Result<(Vec<EnsembleEntry>, ChainStats), ChainError> {
        let mut chain = RecomChain::new(g, cfg, cfg.seeds[i].clone(), i as u64)?;
        let entries = (0..lengths[i])
            .map(|s| {
                chain.step();
                EnsembleEntry {
                    step: offsets[i] + s,
                    plan: chain.state().clone(),
                }
            })
            .collect();
        Ok((entries, chain.stats()))
    };
    let results: Vec<_> = if threads > 1 && lengths.len() > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| ChainError::Threads(e.to_string()))?;
        pool.install(|| (0..lengths.len()).into_par_iter().map(run_one).collect())
    } else {
        (0..lengths.len()).map(run_one).collect()
    };
    let mut entries = Vec::with_capacity(cfg.steps as usize);
    let mut stats = ChainStats::default();
    for r in results {
        let (e, s) = r?;
        entries.extend(e);
        stats.merge(&s);
    }
    Ok((Ensemble::new(g.id(), Provenance::Chain, entries), stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(pops: &[u64]) -> DualGraph {
        let edges: Vec<_> = (1..pops.len()).map(|i| (i - 1, i)).collect();
        DualGraph::from_edges(pops, &edges).unwrap()
    }

    fn cfg(steps: u64, hard: ConstraintSet, seeds: Vec<Plan>) -> ChainConfig {
        ChainConfig::new(steps, hard, seeds, 11)
    }

    #[test]
    fn four_path_forces_middle_cut() {
        let g = path(&[1, 1, 1, 1]);
        let hard = ConstraintSet::new(Some(0.03), None).unwrap();
        let seed = Plan::from_districts(&[0, 0, 1, 1]);
        let c = cfg(1, hard, vec![seed.clone()]);
        let mut chain = RecomChain::new(&g, &c, seed.clone(), 0).unwrap();
        for _ in 0..200 {
            let out = chain.step();
            assert_eq!(out.kind, StepKind::Accepted);
            assert_eq!(out.proposal.as_ref(), Some(&seed));
        }
    }

    #[test]
    fn single_step_records_one_plan() {
        let g = path(&[1, 1, 1, 1]);
        let c = cfg(1, ConstraintSet::none(), vec![Plan::from_districts(&[0, 1, 1, 1])]);
        let e = run_chain(&g, &c).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e.entries[0].step, 0);
    }

    #[test]
    fn seeds_are_checked() {
        let g = path(&[1, 1, 1, 1]);
        let hard = ConstraintSet::new(Some(0.03), None).unwrap();
        let c = cfg(10, hard, vec![Plan::from_districts(&[0, 1, 1, 1])]);
        assert!(matches!(
            run_chain(&g, &c),
            Err(ChainError::SeedViolatesConstraints(0))
        ));
        let c = cfg(10, hard, vec![Plan::from_districts(&[0, 1, 0, 1])]);
        assert!(matches!(run_chain(&g, &c), Err(ChainError::InvalidSeed(0))));
        let c = cfg(10, hard, vec![]);
        assert!(matches!(run_chain(&g, &c), Err(ChainError::NoSeeds)));
        let c = cfg(0, hard, vec![Plan::from_districts(&[0, 0, 1, 1])]);
        assert!(matches!(run_chain(&g, &c), Err(ChainError::NoSteps)));
    }

    #[test]
    fn steps_split_across_seeds() {
        assert_eq!(chain_lengths(10, 3), vec![4, 3, 3]);
        assert_eq!(chain_lengths(100_000, 5), vec![20_000; 5]);
        let g = path(&[1, 1, 1, 1, 1, 1]);
        let seeds = vec![
            Plan::from_districts(&[0, 0, 0, 1, 1, 1]),
            Plan::from_districts(&[0, 1, 1, 1, 1, 1]),
        ];
        let c = cfg(7, ConstraintSet::none(), seeds);
        let e = run_chain(&g, &c).unwrap();
        assert_eq!(e.len(), 7);
        let steps: Vec<u64> = e.entries.iter().map(|x| x.step).collect();
        assert_eq!(steps, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn unique_keeps_first_occurrence() {
        let p = Plan::from_districts(&[0, 1, 1]);
        let q = Plan::from_districts(&[0, 0, 1]);
        let e = Ensemble::from_plans("g", Provenance::Chain, vec![p.clone(), p.clone(), q.clone(), p.clone()]);
        let u = e.unique_plans();
        assert_eq!(u.plans().cloned().collect::<Vec<_>>(), vec![p, q]);
        assert_eq!(u.entries[1].step, 2);
        assert_eq!(e.unique_count(), 2);
    }

    #[test]
    fn threads_do_not_change_output() {
        let g = path(&[1; 8]);
        let seeds: Vec<Plan> = (1..5)
            .map(|k| Plan::from_district1(8, k..8))
            .collect();
        let c = cfg(403, ConstraintSet::none(), seeds);
        let (a, sa) = run_chain_with(&g, &c, 1).unwrap();
        let (b, sb) = run_chain_with(&g, &c, 4).unwrap();
        assert_eq!(a.entries, b.entries);
        assert_eq!(sa, sb);
    }

    #[test]
    fn thresholded_policy_accepts_at_fallback_rate() {
        // every proposal on a path cuts one edge; inner demands ER < 1 so
        // nothing passes and acceptance rests on the fallback coin
        let g = path(&[1; 6]);
        let inner = ConstraintSet::new(None, Some(1)).unwrap();
        let policy = AcceptPolicy::Thresholded {
            inner,
            fallback_prob: 0.05,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let candidate = Plan::from_districts(&[0, 0, 0, 1, 1, 1]);
        let trials = 10_000;
        let accepted = (0..trials)
            .filter(|_| decide(&g, &candidate, &ConstraintSet::none(), &policy, &mut rng) == StepKind::Accepted)
            .count();
        let rate = accepted as f64 / trials as f64;
        assert!((rate - 0.05).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn hard_er_violation_repeats() {
        // on a 4-cycle every bipartition cuts 2 edges
        let g = DualGraph::from_edges(&[1; 4], &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let seed = Plan::from_districts(&[0, 0, 1, 1]);
        let ok = ConstraintSet::new(None, Some(3)).unwrap();
        let c = cfg(50, ok, vec![seed.clone()]);
        let mut chain = RecomChain::new(&g, &c, seed.clone(), 0).unwrap();
        assert_eq!(chain.step().kind, StepKind::Accepted);

        let strict = ConstraintSet::new(None, Some(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = ChainConfig::new(1, strict, vec![seed.clone()], 0);
        assert_eq!(recom_step(&g, &seed, &c, &mut rng).unwrap(), seed);
    }
}
