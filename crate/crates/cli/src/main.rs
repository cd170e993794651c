use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use icmen_core::pipeline::{
    collect_cell_metrics, compare_modes, metrics_csv, run_on_dataset, speedup_report, AlphaStrategy, BaseMethod,
    Dataset, RunConfig,
};
use icmen_core::synth::{temporal_sbm, two_cliques, write_edge_list, SbmConfig};

const WORKERS_ENV: &str = "ICMEN_WORKERS";

#[derive(Parser)]
#[command(name = "icmen", version, about = "Incremental embeddings for temporal graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed, calibrate, estimate, combine and evaluate one configuration.
    Run(RunArgs),
    /// Run the incremental procedure next to a whole-history retrain and report the difference.
    Compare(RunArgs),
    /// Time the last incremental step against a full retrain for several snapshot counts.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Snapshot counts to time (overrides --splits).
        #[arg(long, value_delimiter = ',', default_value = "2,3,5")]
        splits_list: Vec<usize>,
    },
    /// Flatten every cell metrics.json under a directory into CSV.
    Aggregate {
        root: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Write a synthetic temporal edge list.
    Generate(GenerateArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// TOML configuration; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Temporal edge list: `src dst timestamp` per line.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Dataset name used in the output layout (default: input file stem).
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    directed: bool,
    /// `whitespace`, `tab`, `comma` or a single character.
    #[arg(long)]
    delimiter: Option<String>,
    /// Number of snapshots the training history is cut into.
    #[arg(long)]
    splits: Option<usize>,
    /// Number of embeddings combined (default: splits).
    #[arg(long)]
    k: Option<usize>,
    /// static-walk or temporal-walk.
    #[arg(long)]
    method: Option<BaseMethod>,
    /// fixed, grid, dirichlet-uniform or dirichlet-increasing.
    #[arg(long)]
    strategy: Option<AlphaStrategy>,
    /// Fixed weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Grid candidates for the older weight, comma separated.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long)]
    walk_length: Option<usize>,
    #[arg(long)]
    min_walk_length: Option<usize>,
    #[arg(long)]
    walks_per_node: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// Reference node count; several comma-separated values are swept. `auto` uses the default rule.
    #[arg(long)]
    ref_count: Option<String>,
    #[arg(long)]
    ridge_lambda: Option<f64>,
    /// Fit the calibration map without an intercept.
    #[arg(long)]
    no_intercept: bool,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single-threaded, bit-reproducible training; timings go to a separate file.
    #[arg(long)]
    deterministic: bool,
    /// Only train and evaluate the whole-history embedding.
    #[arg(long)]
    baseline_only: bool,
    /// Also retrain on the whole history and report the AUC gap and speedup.
    #[arg(long)]
    compare_baseline: bool,
}

fn parse_ref_count(s: &str) -> Result<Vec<usize>> {
    if s == "auto" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|v| v.trim().parse::<usize>().with_context(|| format!("bad reference count `{v}`")))
        .collect()
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.input {
            cfg.input.path = v.clone();
        }
        if let Some(v) = &self.dataset {
            cfg.dataset = Some(v.clone());
        }
        if self.directed {
            cfg.input.directed = true;
        }
        if let Some(v) = &self.delimiter {
            cfg.input.delimiter = v.clone();
        }
        if let Some(v) = self.splits {
            cfg.splits = v;
        }
        if let Some(v) = self.k {
            cfg.k = Some(v);
        }
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.strategy {
            cfg.strategy = v;
        }
        if let Some(v) = &self.alpha {
            cfg.alpha = v.clone();
        }
        if let Some(v) = &self.grid {
            cfg.grid = v.clone();
        }
        if let Some(v) = self.dims {
            cfg.train.dim = v;
        }
        if let Some(v) = self.walk_length {
            cfg.walk.walk_length = v;
        }
        if let Some(v) = self.min_walk_length {
            cfg.walk.min_length = v;
        }
        if let Some(v) = self.walks_per_node {
            cfg.walk.walks_per_node = v;
        }
        if let Some(v) = self.window {
            cfg.train.window = v;
        }
        if let Some(v) = self.negatives {
            cfg.train.negatives = v;
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.p {
            cfg.walk.p = v;
        }
        if let Some(v) = self.q {
            cfg.walk.q = v;
        }
        if let Some(v) = &self.ref_count {
            cfg.calibration.ref_count = parse_ref_count(v)?;
        }
        if let Some(v) = self.ridge_lambda {
            cfg.calibration.lambda = v;
        }
        if self.no_intercept {
            cfg.calibration.intercept = false;
        }
        if let Some(v) = self.reps {
            cfg.reps = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if self.deterministic {
            cfg.deterministic = true;
        }
        if self.baseline_only {
            cfg.baseline_only = true;
        }
        if self.compare_baseline {
            cfg.compare_baseline = true;
        }
        if let Some(w) = workers_from_env()? {
            cfg.workers = Some(w);
        }
        if cfg.input.path.as_os_str().is_empty() {
            bail!("no input file given (use --input or set input.path in the config)");
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("{WORKERS_ENV}={v} is not a count"))?;
            if n == 0 {
                bail!("{WORKERS_ENV} must be >= 1");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// `sbm` or `cliques`.
    kind: String,
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, default_value_t = 100)]
    nodes: usize,
    #[arg(long, default_value_t = 4)]
    communities: usize,
    #[arg(long, default_value_t = 5000)]
    events: usize,
    #[arg(long, default_value_t = 0.3)]
    p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    #[arg(long)]
    directed: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load(cfg: &RunConfig) -> Result<Dataset> {
    Dataset::load(&cfg.input, cfg.dataset.as_deref()).with_context(|| format!("loading {}", cfg.input.path.display()))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = workers_from_env()? {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let data = load(&cfg)?;
            let report = run_on_dataset(&data, &cfg)?;
            if let Some(dir) = &report.cell_dir {
                info!("artifacts in {}", dir.display());
            }
            let mut summary = report.metrics.clone();
            summary.reps.clear();
            print_json(&summary)?;
        }
        Command::Compare(args) => {
            let cfg = args.resolve()?;
            let data = load(&cfg)?;
            let (cmp, _) = compare_modes(&data, &cfg)?;
            print_json(&cmp)?;
        }
        Command::Bench { run, splits_list } => {
            let base = run.resolve()?;
            let data = load(&base)?;
            let mut reports = Vec::new();
            for n in splits_list {
                let cfg = RunConfig {
                    splits: n,
                    k: base.k.map(|k| k.min(n)),
                    ..base.clone()
                };
                reports.push(speedup_report(&data, &cfg)?);
            }
            print_json(&reports)?;
        }
        Command::Aggregate { root, output: path } => {
            let cells = collect_cell_metrics(&root)?;
            if cells.is_empty() {
                bail!("no metrics.json found under {}", root.display());
            }
            let mut out = output(path.as_deref())?;
            metrics_csv(&cells, &mut out)?;
            out.flush()?;
        }
        Command::Generate(g) => {
            let graph = match g.kind.as_str() {
                "sbm" => temporal_sbm(&SbmConfig {
                    nodes: g.nodes,
                    communities: g.communities,
                    p_in: g.p_in,
                    p_out: g.p_out,
                    events: g.events,
                    directed: g.directed,
                    seed: g.seed,
                }),
                "cliques" => {
                    let size = (g.nodes / 2).max(2);
                    let pairs = size * (size - 1) + 1;
                    two_cliques(size, (g.events / pairs).max(1), g.seed)
                }
                other => bail!("unknown generator `{other}` (expected sbm or cliques)"),
            };
            let mut out = output(Some(&g.output))?;
            write_edge_list(&graph, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}
