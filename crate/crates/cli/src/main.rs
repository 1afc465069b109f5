//! Command-line driver for the simulator: dataset generation, single runs
//! with oracle verification, experiment sweeps, and cost-model queries.
//!
//! Configuration is a flat key=value file; every flag here is sugar over
//! those keys and explicit `--set key=value` pairs override everything.

mod sweep;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use tascade_core::config::{parse_kv, RunConfig};
use tascade_core::models;
use tascade_core::report::Report;
use tascade_core::workloads::rmat::generate_rmat;
use tascade_core::Simulator;

#[derive(Parser)]
#[command(
    name = "tascade",
    about = "Cycle-level simulator of a tiled-chiplet manycore with proxy regions and selective cascading",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an RMAT dataset and write it in TCSR format.
    Gen {
        /// log2 of the vertex count
        #[arg(long)]
        scale: u32,
        /// Edges per vertex
        #[arg(long, default_value_t = 16)]
        ef: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Simulate one configuration to quiescence and emit the report JSON.
    Run(RunArgs),
    /// Run one experiment axis and write a CSV (one row per point).
    Sweep {
        /// iq_ratio | proxy_region | noc_option | grid_scale | packaging
        #[arg(long)]
        axis: String,
        /// Comma-separated axis points (defaults per axis)
        #[arg(long)]
        points: Option<String>,
        #[command(flatten)]
        base: RunArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Evaluate the wafer/yield/packaging cost model for a configuration.
    Cost(RunArgs),
    /// Simulate and compare results against the sequential oracle.
    Verify(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Flat key=value config file (# comments); flags override file keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bfs | sssp | pagerank | wcc | spmv | histogram
    #[arg(long)]
    app: Option<String>,
    /// Generate an RMAT dataset of this scale (2^scale vertices)
    #[arg(long)]
    scale: Option<u32>,
    /// Edge factor for generated datasets
    #[arg(long)]
    ef: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Load a TCSR dataset instead of generating one
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Square grid side (tiles); maps onto the die/package hierarchy
    #[arg(long)]
    grid: Option<u32>,
    /// Proxy region side for the update task ("none" disables)
    #[arg(long)]
    proxy: Option<String>,
    /// Back the dataset with per-tile DRAM partitions (D$ mode)
    #[arg(long)]
    hbm: bool,
    /// Compare final arrays against the sequential oracle; non-zero exit on
    /// mismatch
    #[arg(long)]
    verify: bool,
    /// Raw key=value overrides applied last (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write the report JSON here instead of stdout
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Dump the result array as little-endian u64 words
    #[arg(long)]
    dump_results: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_map(&parse_kv(&text)?)?;
        }
        let mut sugar: BTreeMap<String, String> = BTreeMap::new();
        if let Some(app) = &self.app {
            sugar.insert("app".into(), app.clone());
        }
        if let Some(scale) = self.scale {
            sugar.insert("dataset.scale".into(), scale.to_string());
        }
        if let Some(ef) = self.ef {
            sugar.insert("dataset.edge_factor".into(), ef.to_string());
        }
        if let Some(seed) = self.seed {
            sugar.insert("dataset.seed".into(), seed.to_string());
        }
        if let Some(path) = &self.dataset {
            sugar.insert("dataset.path".into(), path.display().to_string());
        }
        if let Some(grid) = self.grid {
            sugar.insert("grid_side".into(), grid.to_string());
        }
        if let Some(proxy) = &self.proxy {
            sugar.insert("task.update.proxy_region".into(), proxy.clone());
        }
        if self.hbm {
            sugar.insert("hbm.enabled".into(), "true".into());
        }
        cfg.apply_map(&sugar)?;
        let mut overrides = BTreeMap::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            overrides.insert(k.trim().to_string(), v.trim().to_string());
        }
        cfg.apply_map(&overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> anyhow::Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Gen { scale, ef, seed, out } => {
            if scale < 4 {
                bail!("--scale must be >= 4");
            }
            let graph = generate_rmat(scale, ef, seed);
            graph.write_tcsr(&out)?;
            eprintln!(
                "wrote {}: {} vertices, {} edge samples",
                out.display(),
                graph.v,
                graph.e
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Run(args) => run_once(&args),
        Cmd::Verify(mut args) => {
            args.verify = true;
            run_once(&args)
        }
        Cmd::Sweep { axis, points, base, out } => {
            let cfg = base.resolve()?;
            let csv = sweep::run_sweep(&axis, points.as_deref(), &cfg)?;
            std::fs::write(&out, &csv)?;
            eprintln!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Cost(args) => {
            let cfg = args.resolve()?;
            print_cost(&cfg)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_once(args: &RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.resolve()?;
    let mut sim = Simulator::build(&cfg)?;
    sim.run()?;
    let verified = if args.verify {
        match sim.verify() {
            Ok(()) => {
                eprintln!("verify: PASS ({})", cfg.app.name());
                Some(true)
            }
            Err(e) => {
                eprintln!("verify: FAIL ({}): {e}", cfg.app.name());
                Some(false)
            }
        }
    } else {
        None
    };
    if let Some(path) = &args.dump_results {
        let result = sim.result();
        let mut bytes = Vec::with_capacity(result.len() * 8);
        for v in &result {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(path, bytes)?;
    }
    let report = Report::from_sim(&mut sim, verified);
    let json = report.to_json();
    match &args.out {
        Some(path) => std::fs::write(path, json.as_bytes())?,
        None => println!("{json}"),
    }
    if verified == Some(false) {
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn print_cost(cfg: &RunConfig) -> anyhow::Result<()> {
    let tiles_per_die = cfg.tiles_per_die_side * cfg.tiles_per_die_side;
    let area = models::die_area_mm2(tiles_per_die, cfg.sram_kib * 1024, &cfg.cost);
    let die = models::die_cost(area, &cfg.cost).map_err(anyhow::Error::from)?;
    let grid_dies = cfg.dies_per_package_side * cfg.dies_per_package_side;
    let packages = cfg.packages_x * cfg.packages_y;
    let hbm_dies = if cfg.hbm.enabled { grid_dies } else { 0 };
    let package_usd =
        models::package_cost(grid_dies, hbm_dies, die.usd_per_die, area, &cfg.cost);
    let doc = serde_json::json!({
        "tile_area_mm2": models::tile_area_mm2(cfg.sram_kib * 1024, &cfg.cost),
        "die_area_mm2": area,
        "die_yield": die.yield_frac,
        "dies_per_wafer": die.dies_per_wafer,
        "good_dies_per_wafer": die.good_dies_per_wafer,
        "usd_per_die": die.usd_per_die,
        "tca_dies_per_package": grid_dies,
        "hbm_dies_per_package": hbm_dies,
        "package_usd": package_usd,
        "packages": packages,
        "total_usd": package_usd * packages as f64,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}
