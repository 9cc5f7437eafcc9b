mod config;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use redist_core::elections::{ensemble_outcomes, ElectionDataset, ElectionError, OutcomeTable};
use redist_core::enumerate::{count_plans, enumerate_plans, EnumError};
use redist_core::export::{
    write_histogram_csv, write_metrics_csv, write_outcomes_csv, write_treeprob_csv, ExportError,
};
use redist_core::graph::{build_graph, load_adjacency, load_units, load_votes, GeoError};
use redist_core::plan::{read_assignment_csv, read_pbm1, Pbm1Writer, PlanError};
use redist_core::recom::{run_chain_with, AcceptPolicy, ChainConfig, ChainError, Provenance};
use redist_core::stats::{five_number, Histogram, DEFAULT_BINS};
use redist_core::trees::{proposal_distribution, TreeError};
use redist_core::{ConstraintSet, DualGraph, Ensemble, Plan, ShareMode};
use serde_json::{json, Value};

use config::{Flags, Mode, RunConfig};

#[derive(Parser)]
#[command(name = "redist", version, about = "Enumerate, sample and score two-district plans")]
struct Cli {
    /// Worker threads for parallel stages (output does not depend on it)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the exact number of admissible plans
    Count(Flags),
    /// Write every admissible plan to plans.pbm1
    Enumerate(Flags),
    /// Run a ReCom chain and write the visited plans
    Chain(Flags),
    /// Score a plan file: metrics, election outcomes, summaries
    Analyze(Flags),
    /// Tree-drawing proposal probability by cut size over a plan file
    Treeprob(Flags),
    /// Run whatever `mode` the config file names
    Run(Flags),
}

/// Exit status 2 for bad input data, 3 for bad constraints, configuration
/// or command-line usage.
#[derive(Debug)]
pub enum Failure {
    Data(String),
    Config(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 2,
            Failure::Config(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Data(m) | Failure::Config(m) => f.write_str(m),
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

impl From<GeoError> for Failure {
    fn from(e: GeoError) -> Self {
        data(e)
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        data(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        data(e)
    }
}

impl From<ExportError> for Failure {
    fn from(e: ExportError) -> Self {
        data(e)
    }
}

impl From<EnumError> for Failure {
    fn from(e: EnumError) -> Self {
        match e {
            EnumError::ZeroPopulation | EnumError::FrontierTooWide(_) | EnumError::Overflow => {
                Failure::Config(e.to_string())
            }
            _ => data(e),
        }
    }
}

impl From<ChainError> for Failure {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::Disconnected => data(e),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<ElectionError> for Failure {
    fn from(e: ElectionError) -> Self {
        match e {
            ElectionError::EmptyEnsemble => Failure::Config(e.to_string()),
            _ => data(e),
        }
    }
}

impl From<TreeError> for Failure {
    fn from(e: TreeError) -> Self {
        match e {
            TreeError::EmptyEnsemble => Failure::Config("empty ensemble".into()),
            _ => data(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (mode, flags) = match cli.command {
        Command::Count(f) => (Some(Mode::Count), f),
        Command::Enumerate(f) => (Some(Mode::Enumerate), f),
        Command::Chain(f) => (Some(Mode::Chain), f),
        Command::Analyze(f) => (Some(Mode::Analyze), f),
        Command::Treeprob(f) => (Some(Mode::Treeprob), f),
        Command::Run(f) => (None, f),
    };
    match run(mode, flags, cli.threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(mode: Option<Mode>, flags: Flags, threads: Option<usize>) -> Result<(), Failure> {
    let mut cfg = match &flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.overlay(flags, threads);
    if mode.is_some() {
        cfg.mode = mode;
    }
    let mode = cfg
        .mode
        .ok_or_else(|| Failure::Config("no mode (use a subcommand or set `mode` in the config)".into()))?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        // ignore a second initialisation; the first pool stays in effect
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match mode {
        Mode::Count => cmd_count(&cfg),
        Mode::Enumerate => cmd_enumerate(&cfg),
        Mode::Chain => cmd_chain(&cfg),
        Mode::Analyze => cmd_analyze(&cfg),
        Mode::Treeprob => cmd_treeprob(&cfg),
    }
}

fn load_graph(cfg: &RunConfig) -> Result<DualGraph, Failure> {
    let units_path = cfg
        .data
        .units
        .as_ref()
        .ok_or_else(|| Failure::Config("no units file (set data.units or pass --units)".into()))?;
    let adj_path = cfg
        .data
        .adjacency
        .as_ref()
        .ok_or_else(|| Failure::Config("no adjacency file (set data.adjacency or pass --adjacency)".into()))?;
    let is_geojson = units_path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("geojson") || e.eq_ignore_ascii_case("json"));
    let units = if is_geojson {
        redist_core::graph::load_units_geojson(units_path)?
    } else {
        load_units(units_path)?
    };
    let mut g = build_graph(units, &load_adjacency(adj_path)?)?;
    if !g.is_connected() {
        return Err(Failure::Data(GeoError::Disconnected.to_string()));
    }
    if let Some(p) = &cfg.data.elections {
        g.attach_votes(&load_votes(p)?)?;
    }
    match (cfg.graph.prune_min_length, cfg.graph.prune_min_fraction) {
        (None, None) => Ok(g),
        (Some(len), Some(frac)) => {
            if !(len >= 0.0) || !(0.0..=1.0).contains(&frac) {
                return Err(Failure::Config(format!(
                    "prune thresholds must be a length >= 0 and a fraction in [0, 1], got {len} and {frac}"
                )));
            }
            Ok(g.prune_short_borders(len, frac)?)
        }
        _ => Err(Failure::Config(
            "pruning needs both prune_min_length and prune_min_fraction".into(),
        )),
    }
}

fn constraints(cfg: &RunConfig) -> ConstraintSet {
    ConstraintSet {
        max_pop_dev: cfg.constraints.max_pop_dev,
        max_er: cfg.constraints.max_er,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write_json(dir: &Path, name: &str, v: &Value) -> Result<(), Failure> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, v).map_err(data)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Wall-clock details kept apart from the reproducible part of a manifest.
fn timing(started: SystemTime, clock: Instant) -> Value {
    json!({
        "started_unix": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        "wall_seconds": clock.elapsed().as_secs_f64(),
    })
}

fn cmd_count(cfg: &RunConfig) -> Result<(), Failure> {
    let g = load_graph(cfg)?;
    let n = count_plans(&g, &constraints(cfg))?;
    println!("{n}");
    if let Some(dir) = &cfg.output {
        let mut w = create(dir, "count.txt")?;
        writeln!(w, "{n}")?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_enumerate(cfg: &RunConfig) -> Result<(), Failure> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let dir = cfg.output_dir()?;
    let g = load_graph(cfg)?;
    let c = constraints(cfg);
    let mut w = Pbm1Writer::new(create(dir, "plans.pbm1")?, g.n(), g.id())?;
    let n = enumerate_plans(&g, &c, |p| w.write(p))?;
    w.finish()?;
    let mut out = create(dir, "count.txt")?;
    writeln!(out, "{n}")?;
    out.flush()?;
    println!("{n}");
    write_json(
        dir,
        "manifest.json",
        &json!({
            "command": "enumerate",
            "version": env!("CARGO_PKG_VERSION"),
            "graph_id": g.id(),
            "units": g.n(),
            "edges": g.m(),
            "config": cfg,
            "plans": n,
            "run": timing(started, clock),
        }),
    )
}

/// Seed plans from assignment CSVs or `.pbm1` files.
fn load_seeds(g: &DualGraph, paths: &[PathBuf]) -> Result<Vec<Plan>, Failure> {
    let mut seeds = Vec::new();
    for p in paths {
        let f = File::open(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
        if p.extension().is_some_and(|e| e == "pbm1") {
            let file = read_pbm1(BufReader::new(f))?;
            file.validate_against(g)?;
            seeds.extend(file.plans);
        } else {
            seeds.push(read_assignment_csv(g, f)?);
        }
    }
    Ok(seeds)
}

fn cmd_chain(cfg: &RunConfig) -> Result<(), Failure> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let dir = cfg.output_dir()?;
    let g = load_graph(cfg)?;
    let steps = cfg
        .chain
        .steps
        .ok_or_else(|| Failure::Config("chain needs `steps`".into()))?;
    let rng_seed = cfg
        .chain
        .rng_seed
        .ok_or_else(|| Failure::Config("chain needs an explicit `rng_seed`".into()))?;
    let mut chain = ChainConfig::new(steps, constraints(cfg), load_seeds(&g, &cfg.chain.seeds)?, rng_seed);
    if let Some(r) = cfg.chain.max_tree_retries {
        chain.max_tree_retries = r;
    }
    if let Some(a) = &cfg.chain.accept {
        chain.accept = AcceptPolicy::Thresholded {
            inner: ConstraintSet {
                max_pop_dev: a.max_pop_dev,
                max_er: a.max_er,
            },
            fallback_prob: a.fallback_prob,
        };
    }
    let (ensemble, stats) = run_chain_with(&g, &chain, cfg.threads.unwrap_or(1))?;
    let mut w = Pbm1Writer::new(create(dir, "plans.pbm1")?, g.n(), g.id())?;
    for p in ensemble.plans() {
        w.write(p)?;
    }
    w.finish()?;
    let unique = ensemble.unique_count();
    println!("{} plans, {unique} unique", ensemble.len());
    write_json(
        dir,
        "manifest.json",
        &json!({
            "command": "chain",
            "version": env!("CARGO_PKG_VERSION"),
            "graph_id": g.id(),
            "units": g.n(),
            "edges": g.m(),
            "config": cfg,
            "chain": chain,
            "rng_seed": rng_seed,
            "plans": ensemble.len(),
            "unique_plans": unique,
            "steps": stats,
            "run": timing(started, clock),
        }),
    )
}

fn load_plan_ensemble(cfg: &RunConfig, g: &DualGraph) -> Result<Ensemble, Failure> {
    let path = cfg
        .data
        .plans
        .as_ref()
        .ok_or_else(|| Failure::Config("no plan file (set data.plans or pass --plans)".into()))?;
    let f = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let file = read_pbm1(BufReader::new(f))?;
    file.validate_against(g)?;
    if file.plans.is_empty() {
        return Err(Failure::Config("empty ensemble".into()));
    }
    Ok(Ensemble::from_plans(file.graph_id, Provenance::Enumerated, file.plans))
}

fn cmd_analyze(cfg: &RunConfig) -> Result<(), Failure> {
    let dir = cfg.output_dir()?;
    let g = load_graph(cfg)?;
    let ensemble = load_plan_ensemble(cfg, &g)?;
    let bins = cfg.analyze.bins.unwrap_or(DEFAULT_BINS);
    if bins == 0 {
        return Err(Failure::Config("bins must be at least 1".into()));
    }

    let metrics = write_metrics_csv(create(dir, "metrics.csv")?, &g, &ensemble)?;
    let columns: [(&str, Vec<f64>); 4] = [
        ("pop_dev", metrics.iter().map(|m| m.pop_dev).collect()),
        ("pbp_min", metrics.iter().map(|m| m.pbp_min).collect()),
        ("pbp_mean", metrics.iter().map(|m| m.pbp_mean).collect()),
        ("lw_min", metrics.iter().map(|m| m.lw_min).collect()),
    ];
    let mut metric_summary = serde_json::Map::new();
    for (name, values) in &columns {
        let h = Histogram::build(values, bins).expect("non-empty finite metrics");
        write_histogram_csv(create(dir, &format!("hist_{name}.csv"))?, &h)?;
        metric_summary.insert(name.to_string(), json!(five_number(values)));
    }
    let mut er_counts: BTreeMap<u32, u64> = BTreeMap::new();
    for m in &metrics {
        *er_counts.entry(m.er).or_default() += 1;
    }

    let contests = if cfg.analyze.contests.is_empty() {
        g.contests()
    } else {
        cfg.analyze.contests.clone()
    };
    let modes = if cfg.analyze.modes.is_empty() {
        vec![ShareMode::TwoParty]
    } else {
        cfg.analyze.modes.clone()
    };
    let mut tables: Vec<OutcomeTable> = Vec::new();
    for contest in &contests {
        let base = ElectionDataset::from_graph(&g, contest, modes[0])?;
        let mut w = create(dir, &format!("outcomes_{contest}.csv"))?;
        let mut first = true;
        for &mode in &modes {
            let t = ensemble_outcomes(&g, &ensemble, &base.with_mode(mode))?;
            let mut buf = Vec::new();
            write_outcomes_csv(&mut buf, &ensemble, &t)?;
            // one header per file when several modes share it
            let body = if first {
                &buf[..]
            } else {
                let nl = buf.iter().position(|&b| b == b'\n').map_or(buf.len(), |i| i + 1);
                &buf[nl..]
            };
            w.write_all(body)?;
            first = false;
            tables.push(t);
        }
        w.flush()?;
    }

    write_json(
        dir,
        "summary.json",
        &json!({
            "graph_id": g.id(),
            "plans": ensemble.len(),
            "unique_plans": ensemble.unique_count(),
            "histogram_bins": bins,
            "metrics": metric_summary,
            "er_counts": er_counts,
            "elections": tables,
        }),
    )?;
    println!("analyzed {} plans", ensemble.len());
    Ok(())
}

fn cmd_treeprob(cfg: &RunConfig) -> Result<(), Failure> {
    let dir = cfg.output_dir()?;
    let g = load_graph(cfg)?;
    let ensemble = load_plan_ensemble(cfg, &g)?;
    let plans: Vec<Plan> = ensemble.plans().cloned().collect();
    let dist = proposal_distribution(&g, &plans)?;
    write_treeprob_csv(create(dir, "treeprob.csv")?, &dist)?;
    println!("{} cut sizes over {} plans", dist.per_er.len(), dist.per_plan.len());
    Ok(())
}
