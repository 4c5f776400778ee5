//! Batch front-end: parse scenario configs, dispatch experiments, emit
//! CSV/NDJSON/SVG artifacts.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use driftsearch_core::flow::IntegrationOptions;
use driftsearch_core::scenario::ScenarioConfig;
use driftsearch_core::sim;
use driftsearch_core::transport::{advect, density, merge_ensembles, seed_halton};
use driftsearch_core::{hypergraph, Error};

/// Batch simulator for multi-agent search over drifting target distributions.
#[derive(Parser)]
#[command(
    name = "driftsearch",
    version,
    about = "Plan and evaluate multi-agent search over drifting target distributions",
    long_about = "Plan and evaluate multi-agent search over drifting target distributions.\n\
        Scenario defaults: sigma_km=3, speed_kmh=380, detection radius_km=1.5,\n\
        detection mean_time_s=2, beta_mdsmc=-0.5, beta_dsmc=-1.5, grid 128x128,\n\
        32 modes, control step 60 s.\n\
        Set SEARCH_SIM_LOG=error|info|debug to control logging."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured Monte Carlo ensemble and write curves, rates and logs.
    Simulate(RunArgs),
    /// Advect the splash tracers and dump ensemble/density snapshots.
    Drift(DriftArgs),
    /// Classify the domain into mesoelliptic/mesohyperbolic mixing regions.
    Hypergraph(HypergraphArgs),
    /// Run the delayed-start experiment over several start offsets.
    Delayed(DelayedArgs),
    /// Render SVG plots from prior outputs.
    Plot(PlotArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (must be empty unless --overwrite).
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Bound the number of worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Override scalar config keys, e.g. --set controller.kind=dsmc.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct DriftArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Snapshot times in hours since the day-0 midnight, e.g. 0,24,48.
    #[arg(long, value_delimiter = ',', required = true)]
    times: Vec<f64>,
}

#[derive(Args)]
struct HypergraphArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Interval start (hours).
    #[arg(long)]
    t1: f64,
    /// Interval end (hours).
    #[arg(long)]
    t2: f64,
    /// Classification grid cells per axis.
    #[arg(long, default_value_t = 64)]
    nx: usize,
    #[arg(long, default_value_t = 64)]
    ny: usize,
    /// Finite-difference stencil width in km.
    #[arg(long, default_value_t = 0.5)]
    stencil: f64,
    /// Also write an SVG raster.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct DelayedArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Start offsets in days, e.g. 0,5,10.
    #[arg(long, value_delimiter = ',', required = true)]
    offsets: Vec<u32>,
}

#[derive(Args)]
struct PlotArgs {
    /// What to render.
    #[arg(long, value_parser = ["curve", "trajectories", "field", "hypergraph"])]
    kind: String,
    /// Input artifact (CSV or NDJSON from a prior run).
    #[arg(long)]
    input: PathBuf,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter_or("SEARCH_SIM_LOG", "error")
            .write_style("SEARCH_SIM_LOG_STYLE"),
    )
    .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Drift(args) => drift(args),
        Command::Hypergraph(args) => hypergraph_cmd(args),
        Command::Delayed(args) => delayed(args),
        Command::Plot(args) => plot_cmd(args),
    }
}

fn load_config(common: &CommonArgs) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(&common.config)
        .with_context(|| format!("reading config {}", common.config.display()))?;
    let mut overrides: Vec<(String, String)> = Vec::new();
    for kv in &common.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("--set needs SECTION.KEY=VALUE, got `{kv}`"))?;
        overrides.push((key.trim().to_string(), value.trim().to_string()));
    }
    if let Some(seed) = common.seed {
        overrides.push(("ensemble.seed".into(), seed.to_string()));
    }
    let cfg = ScenarioConfig::parse_with_overrides(&text, &overrides).map_err(|e| match e {
        Error::Parse { line, message } => {
            anyhow::anyhow!("{}:{line}: {message}", common.config.display())
        }
        other => anyhow::anyhow!("{}: {other}", common.config.display()),
    })?;
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    Ok(cfg)
}

fn prepare_out_dir(path: &Path, overwrite: bool) -> Result<()> {
    if path.exists() {
        let non_empty = path.read_dir()?.next().is_some();
        if non_empty && !overwrite {
            bail!(
                "output directory {} is not empty (pass --overwrite to reuse it)",
                path.display()
            );
        }
    }
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn simulate(args: RunArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    prepare_out_dir(&args.common.out, args.common.overwrite)?;
    log::info!(
        "simulate: controller={}, {} runs, seed {}",
        cfg.controller.name(),
        cfg.n_runs,
        cfg.seed
    );
    let (trace, stats) = sim::run_ensemble(&cfg)?;
    sim::write_ensemble_outputs(&args.common.out, &cfg, &trace, &stats)?;
    println!(
        "{} runs, mean final detection rate {:.4}",
        stats.runs.len(),
        stats.mean_final()
    );
    Ok(())
}

fn drift(args: DriftArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    prepare_out_dir(&args.common.out, args.common.overwrite)?;
    let mut times = args.times.clone();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if times.first().copied().unwrap_or(0.0) < cfg.splash_t0_hours {
        bail!("snapshot times must not precede the splash time");
    }
    let field = cfg.flow.build(cfg.domain)?;
    let regions = cfg.splash_regions()?;
    let parts: Result<Vec<_>, _> = regions
        .iter()
        .map(|r| seed_halton(r, cfg.n_tracers))
        .collect();
    let mut tracers = merge_ensembles(&parts?)?;
    let opts = IntegrationOptions::default();
    for t in times {
        tracers = advect(&tracers, field.as_ref(), t, opts)?;
        let p = density(
            &tracers,
            cfg.domain,
            cfg.grid_nx,
            cfg.grid_ny,
            cfg.bandwidth_km,
        )?;
        tracers.write_csv(&args.common.out.join(format!("ensemble_t{t:.1}h.csv")))?;
        p.write_csv(&args.common.out.join(format!("density_t{t:.1}h.csv")))?;
        log::info!("drift snapshot at t={t:.1} h written");
    }
    Ok(())
}

fn hypergraph_cmd(args: HypergraphArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    prepare_out_dir(&args.common.out, args.common.overwrite)?;
    let field = cfg.flow.build(cfg.domain)?;
    let hg = hypergraph::classify(
        field.as_ref(),
        cfg.domain,
        args.nx,
        args.ny,
        args.t1,
        args.t2,
        args.stencil,
        IntegrationOptions::default(),
    )?;
    hg.write_csv(&args.common.out.join("hypergraph.csv"))?;
    if args.svg {
        hg.write_svg(&args.common.out.join("hypergraph.svg"))?;
    }
    println!(
        "hypergraph over [{}, {}] h: {:.1}% mesohyperbolic",
        args.t1,
        args.t2,
        100.0 * hg.hyperbolic_fraction()
    );
    Ok(())
}

fn delayed(args: DelayedArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    prepare_out_dir(&args.common.out, args.common.overwrite)?;
    let cmp = sim::delayed_start_experiment(&cfg, &args.offsets)?;
    sim::write_delayed_outputs(&args.common.out, &cfg, &cmp)?;
    for (off, stats) in cmp.offsets_days.iter().zip(&cmp.ensembles) {
        println!(
            "offset {off} days: mean final detection rate {:.4}",
            stats.mean_final()
        );
    }
    Ok(())
}

fn plot_cmd(args: PlotArgs) -> Result<()> {
    match args.kind.as_str() {
        "curve" => plot::plot_curve(&args.input, &args.out),
        "trajectories" => plot::plot_trajectories(&args.input, &args.out),
        "field" => plot::plot_field(&args.input, &args.out),
        "hypergraph" => plot::plot_hypergraph(&args.input, &args.out),
        other => bail!("unknown plot kind `{other}`"),
    }
}
