use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use flagmetrics::experiment::{with_workers, CollectionConfig, Experiment, ExperimentConfig};
use flagmetrics::graphlets::OrbitCounting;
use flagmetrics::pseudometrics::Metric;
use flagmetrics::random::{IntervalCollectionSpec, PointCollectionSpec};

#[derive(Parser)]
#[command(name = "flagmetrics", version, about = "Compare directed-graph pseudometrics on random graph collections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the collection manifest and one edge list per graph.
    Generate(Common),
    /// Compute (or refresh) per-graph features under `<out>/features`.
    Features(Common),
    /// Write distance matrices for the whole collection and for each model.
    Dist(Common),
    /// Fowlkes-Mallows and distance-correlation tables.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Row pseudometrics (comma separated); defaults to every configured one.
        #[arg(long, value_delimiter = ',')]
        row: Vec<String>,
        /// Column pseudometrics (comma separated); defaults to dbeta,ddelta.
        #[arg(long, value_delimiter = ',')]
        col: Vec<String>,
        /// Only this scope: all, er, gr or pa.
        #[arg(long)]
        scope: Option<String>,
    },
    /// Permutation tests with Bonferroni and Benjamini-Yekutieli verdicts.
    Permtest(Common),
    /// Leave-one-out k-NN classification and regression tables.
    Knn(Common),
    /// Every stage in order.
    Pipeline(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the point-drawn collection.
    #[arg(long, conflicts_with_all = ["interval", "manifest"])]
    point: bool,
    /// Use the interval-drawn collection.
    #[arg(long, conflicts_with = "manifest")]
    interval: bool,
    /// Use an existing manifest JSON.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Vertices per generated graph.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Top homology dimension.
    #[arg(long)]
    p: Option<usize>,
    /// Betti budget behind dbeta: a column-addition count or `exact`.
    #[arg(long)]
    eps: Option<String>,
    /// Extra approximate dbeta variants (comma separated budgets).
    #[arg(long, value_delimiter = ',')]
    eps_variants: Option<Vec<u64>>,
    /// Pseudometrics to compute (comma separated).
    #[arg(long, value_delimiter = ',')]
    metric: Option<Vec<Metric>>,
    /// Count induced instead of non-induced orbit embeddings.
    #[arg(long)]
    induced: bool,
    #[arg(long)]
    perms: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    knn_k: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if self.point {
            cfg.collection = CollectionConfig::Point(PointCollectionSpec::default());
        }
        if self.interval {
            cfg.collection = CollectionConfig::Interval(IntervalCollectionSpec::default());
        }
        if let Some(path) = &self.manifest {
            cfg.collection = CollectionConfig::Custom { path: path.clone() };
        }
        if let Some(n) = self.n {
            cfg.collection.set_n(n);
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(eps) = &self.eps {
            cfg.betti_eps = match eps.as_str() {
                "exact" | "inf" => None,
                e => Some(e.parse().with_context(|| format!("--eps `{e}`"))?),
            };
        }
        if let Some(v) = &self.eps_variants {
            cfg.eps = v.clone();
        }
        if let Some(m) = &self.metric {
            cfg.metrics = m.clone();
        }
        if self.induced {
            cfg.counting = OrbitCounting::Induced;
        }
        if let Some(perms) = self.perms {
            cfg.stats.perms = perms;
        }
        if let Some(alpha) = self.alpha {
            cfg.stats.alpha = alpha;
        }
        if let Some(k) = self.knn_k {
            cfg.stats.knn_k = k;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Metrics named by `--row`/`--col`, with `dbeta-epsN` variants.
fn requested(names: &[String], cfg: &mut ExperimentConfig) -> Result<()> {
    for name in names {
        if let Some(e) = name.strip_prefix("dbeta-eps") {
            let e: u64 = e.parse().with_context(|| format!("metric `{name}`"))?;
            if !cfg.eps.contains(&e) {
                cfg.eps.push(e);
            }
            continue;
        }
        let m: Metric = name.parse()?;
        if !cfg.metrics.contains(&m) {
            cfg.metrics.push(m);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(c) => {
            let cfg = c.config()?;
            with_workers(cfg.workers, || -> Result<()> {
                let mut exp = Experiment::new(cfg)?;
                exp.write_config()?;
                exp.write_collection()?;
                exp.write_log()?;
                println!("{} graphs -> {}", exp.manifest.len(), exp.out().join("manifest.json").display());
                Ok(())
            })?
        }
        Command::Features(c) => {
            let cfg = c.config()?;
            with_workers(cfg.workers, || -> Result<()> {
                let mut exp = Experiment::new(cfg)?;
                let features = exp.features()?;
                exp.write_log()?;
                println!("features for {} graphs in {}", features.graphs.len(), exp.out().join("features").display());
                Ok(())
            })?
        }
        Command::Dist(c) => {
            let cfg = c.config()?;
            with_workers(cfg.workers, || -> Result<()> {
                let mut exp = Experiment::new(cfg)?;
                let features = exp.features()?;
                let all = exp.matrices(&features)?;
                exp.write_distances(&all)?;
                exp.write_log()?;
                println!("{} distance matrices in {}", all.len(), exp.out().join("dist").display());
                Ok(())
            })?
        }
        Command::Compare { common, row, col, scope } => {
            let mut cfg = common.config()?;
            if common.metric.is_none() && !(row.is_empty() && col.is_empty()) {
                cfg.metrics.clear();
                cfg.eps.clear();
                let default_cols = if col.is_empty() { vec!["dbeta".to_string(), "ddelta".to_string()] } else { Vec::new() };
                requested(&row, &mut cfg)?;
                requested(&col, &mut cfg)?;
                requested(&default_cols, &mut cfg)?;
            }
            with_workers(cfg.workers, || -> Result<()> {
                let mut exp = Experiment::new(cfg)?;
                let features = exp.features()?;
                let all = exp.matrices(&features)?;
                let rows = if row.is_empty() { exp.row_names() } else { row.clone() };
                let cols = if col.is_empty() { exp.default_columns(&all) } else { col.clone() };
                if cols.is_empty() {
                    bail!("no column pseudometric available");
                }
                for table in exp.write_compare(&all, &rows, &cols, scope.as_deref())? {
                    print!("{}", table.to_csv());
                }
                exp.write_log()?;
                Ok(())
            })?
        }
        Command::Permtest(c) => {
            let cfg = c.config()?;
            with_workers(cfg.workers, || -> Result<()> {
                let mut exp = Experiment::new(cfg)?;
                let features = exp.features()?;
                let all = exp.matrices(&features)?;
                let records = exp.write_permtest(&all)?;
                exp.write_log()?;
                println!("{} tests -> {}", records.len(), exp.out().join("tables/permtest.csv").display());
                Ok(())
            })?
        }
        Command::Knn(c) => {
            let cfg = c.config()?;
            with_workers(cfg.workers, || -> Result<()> {
                let mut exp = Experiment::new(cfg)?;
                let features = exp.features()?;
                let all = exp.matrices(&features)?;
                for table in exp.write_knn(&all, &features)? {
                    print!("{}", table.to_csv());
                }
                exp.write_log()?;
                Ok(())
            })?
        }
        Command::Pipeline(c) => {
            let cfg = c.config()?;
            with_workers(cfg.workers, || -> Result<()> {
                let mut exp = Experiment::new(cfg)?;
                exp.run()?;
                println!("done -> {}", exp.out().display());
                Ok(())
            })?
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("error: {}", chain.join(": "));
            ExitCode::FAILURE
        }
    }
}
