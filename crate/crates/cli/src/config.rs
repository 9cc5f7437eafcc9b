//! Run configuration: a TOML file overlaid with command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use redist_core::{DevBound, ShareMode};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Count,
    Enumerate,
    Chain,
    Analyze,
    Treeprob,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub data: DataPaths,
    #[serde(default)]
    pub graph: GraphOptions,
    #[serde(default)]
    pub constraints: Constraints,
    #[serde(default)]
    pub chain: ChainOptions,
    #[serde(default)]
    pub analyze: AnalyzeOptions,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub units: Option<PathBuf>,
    pub adjacency: Option<PathBuf>,
    pub elections: Option<PathBuf>,
    pub plans: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphOptions {
    pub prune_min_length: Option<f64>,
    pub prune_min_fraction: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraints {
    pub max_pop_dev: Option<DevBound>,
    pub max_er: Option<u32>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainOptions {
    pub steps: Option<u64>,
    pub rng_seed: Option<u64>,
    /// Assignment CSVs or `.pbm1` files; every plan in them starts a chain.
    #[serde(default)]
    pub seeds: Vec<PathBuf>,
    pub max_tree_retries: Option<u32>,
    pub accept: Option<AcceptOptions>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptOptions {
    pub max_pop_dev: Option<DevBound>,
    pub max_er: Option<u32>,
    pub fallback_prob: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeOptions {
    /// Defaults to every contest present in the data.
    #[serde(default)]
    pub contests: Vec<String>,
    /// Defaults to two-party shares only.
    #[serde(default)]
    pub modes: Vec<ShareMode>,
    pub bins: Option<usize>,
}

/// Flags shared by every subcommand. Any flag given overrides the config
/// file.
#[derive(Args, Debug, Default)]
pub struct Flags {
    /// TOML run configuration
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub units: Option<PathBuf>,
    #[arg(long)]
    pub adjacency: Option<PathBuf>,
    /// Vote table keyed by unit_id, merged into the unit records
    #[arg(long)]
    pub elections: Option<PathBuf>,
    /// Plan file (.pbm1) to analyze
    #[arg(long)]
    pub plans: Option<PathBuf>,
    /// Drop edges whose shared border is shorter than this (km)...
    #[arg(long)]
    pub prune_min_length: Option<f64>,
    /// ...and below this fraction of both units' perimeters
    #[arg(long)]
    pub prune_min_fraction: Option<f64>,
    /// Exclusive upper bound on population deviation, e.g. 0.03
    #[arg(long)]
    pub max_pop_dev: Option<DevBound>,
    /// Exclusive upper bound on edges removed
    #[arg(long)]
    pub max_er: Option<u32>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub rng_seed: Option<u64>,
    /// Seed plan file; repeat for several chains
    #[arg(long = "seed-plan")]
    pub seed_plans: Vec<PathBuf>,
    #[arg(long)]
    pub max_tree_retries: Option<u32>,
    /// Soft population bound for the thresholded acceptance policy
    #[arg(long)]
    pub accept_max_pop_dev: Option<DevBound>,
    /// Soft cut-size bound for the thresholded acceptance policy
    #[arg(long)]
    pub accept_max_er: Option<u32>,
    /// Probability of accepting a proposal outside the soft bounds
    #[arg(long)]
    pub fallback_prob: Option<f64>,
    /// Contest to score; repeatable
    #[arg(long = "contest")]
    pub contests: Vec<String>,
    /// Share convention; repeatable
    #[arg(long = "share-mode")]
    pub share_modes: Vec<ShareMode>,
    /// Histogram bin count
    #[arg(long)]
    pub bins: Option<usize>,
}

impl RunConfig {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut cfg.output);
        fix(&mut cfg.data.units);
        fix(&mut cfg.data.adjacency);
        fix(&mut cfg.data.elections);
        fix(&mut cfg.data.plans);
        for s in &mut cfg.chain.seeds {
            if s.is_relative() {
                *s = base.join(&*s);
            }
        }
        Ok(cfg)
    }

    pub fn overlay(&mut self, f: Flags, threads: Option<usize>) {
        fn set<T>(slot: &mut Option<T>, v: Option<T>) {
            if v.is_some() {
                *slot = v;
            }
        }
        set(&mut self.threads, threads);
        set(&mut self.output, f.out);
        set(&mut self.data.units, f.units);
        set(&mut self.data.adjacency, f.adjacency);
        set(&mut self.data.elections, f.elections);
        set(&mut self.data.plans, f.plans);
        set(&mut self.graph.prune_min_length, f.prune_min_length);
        set(&mut self.graph.prune_min_fraction, f.prune_min_fraction);
        set(&mut self.constraints.max_pop_dev, f.max_pop_dev);
        set(&mut self.constraints.max_er, f.max_er);
        set(&mut self.chain.steps, f.steps);
        set(&mut self.chain.rng_seed, f.rng_seed);
        set(&mut self.chain.max_tree_retries, f.max_tree_retries);
        if !f.seed_plans.is_empty() {
            self.chain.seeds = f.seed_plans;
        }
        if f.accept_max_pop_dev.is_some() || f.accept_max_er.is_some() || f.fallback_prob.is_some() {
            let a = self.chain.accept.get_or_insert_with(AcceptOptions::default);
            set(&mut a.max_pop_dev, f.accept_max_pop_dev);
            set(&mut a.max_er, f.accept_max_er);
            if let Some(p) = f.fallback_prob {
                a.fallback_prob = p;
            }
        }
        if !f.contests.is_empty() {
            self.analyze.contests = f.contests;
        }
        if !f.share_modes.is_empty() {
            self.analyze.modes = f.share_modes;
        }
        set(&mut self.analyze.bins, f.bins);
    }

    pub fn output_dir(&self) -> Result<&Path, Failure> {
        self.output
            .as_deref()
            .ok_or_else(|| Failure::Config("no output directory (set `output` or pass --out)".into()))
    }
}
