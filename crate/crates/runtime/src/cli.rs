//! Command-line front end for the benchmarks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use resilience_core::snapshot::GridSnapshot;
use resilience_core::stencil::InitialProfile;
use resilience_core::{FaultMode, FaultSpec, LocalityId, StencilConfig};

use crate::bench::{
    run_stencil_distributed, run_stencil_local, run_synthetic_distributed, run_synthetic_local, BenchError, Mode,
    RunOutcome, StencilDistributedConfig, StencilLocalConfig, SyntheticDistributedConfig, SyntheticLocalConfig,
};
use crate::locality::NetConfig;
use crate::report::{read_csv, write_csv, write_ratio_file, RunReport};

#[derive(Debug, Parser)]
#[command(name = "resilience-bench", version, about = "Task replay/replicate resilience benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Busy-wait tasks on one pool.
    SyntheticLocal(SyntheticLocalArgs),
    /// Remote actions, each fanning out into local busy-wait tasks.
    SyntheticDistributed(SyntheticDistributedArgs),
    /// Dataflow advection stencil on one pool.
    StencilLocal(StencilLocalArgs),
    /// Lockstep advection stencil over simulated localities.
    StencilDistributed(StencilDistributedArgs),
    /// Wall-time ratios against a baseline mode from an existing CSV.
    Ratio(RatioArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FaultArgs {
    /// Base failure probability per task attempt, a fraction in [0, 1].
    #[arg(long, default_value_t = 0.0, value_parser = parse_fraction)]
    pub error_rate: f64,
    /// Comma-separated faulty locality ids.
    #[arg(long, value_delimiter = ',', conflicts_with = "faulty_random")]
    pub faulty_nodes: Vec<LocalityId>,
    /// Pick this many faulty localities from the seed.
    #[arg(long)]
    pub faulty_random: Option<usize>,
    /// `throw` raises a simulated SDC; `corrupt` flips one mantissa bit.
    #[arg(long, default_value = "throw")]
    pub fault_mode: FaultMode,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Runs per configuration.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub repeat: u32,
    /// Report every repeat instead of the fastest one.
    #[arg(long)]
    pub all_repeats: bool,
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModeArgs {
    #[arg(long, default_value = "none")]
    pub mode: Mode,
    /// Attempts (replay) or replicas (replicate).
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub n: u32,
}

#[derive(Debug, Clone, Args)]
pub struct NetArgs {
    /// Simulated per-message latency in microseconds.
    #[arg(long, default_value_t = 0.0, value_parser = parse_non_negative)]
    pub latency_us: f64,
    /// Simulated per-byte transfer cost in microseconds.
    #[arg(long, default_value_t = 0.0, value_parser = parse_non_negative)]
    pub per_byte_us: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SyntheticLocalArgs {
    #[arg(long, default_value_t = 20_000)]
    pub tasks: u64,
    #[arg(long, default_value_t = 200)]
    pub grain_us: u64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub cores: u64,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[command(flatten)]
    pub faults: FaultArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SyntheticDistributedArgs {
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub localities: u64,
    /// Number of remote actions.
    #[arg(long, default_value_t = 200)]
    pub tasks: u64,
    /// Local tasks spawned by each action.
    #[arg(long, default_value_t = 50)]
    pub tasks_per_action: u64,
    #[arg(long, default_value_t = 500)]
    pub grain_us: u64,
    /// Workers per locality.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub cores: u64,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[command(flatten)]
    pub faults: FaultArgs,
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StencilArgs {
    #[arg(long, default_value_t = 16)]
    pub subdomains: usize,
    #[arg(long, default_value_t = 256)]
    pub points: usize,
    #[arg(long, default_value_t = 64)]
    pub iterations: usize,
    #[arg(long, default_value_t = 8)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub courant: f64,
    /// Write the final grid here (24-byte header, then little-endian f64).
    #[arg(long)]
    pub snapshot_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StencilLocalArgs {
    #[command(flatten)]
    pub stencil: StencilArgs,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub cores: u64,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[command(flatten)]
    pub faults: FaultArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StencilDistributedArgs {
    #[command(flatten)]
    pub stencil: StencilArgs,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub localities: u64,
    /// Workers per locality.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub cores: u64,
    /// Local attempts per iteration before falling back to other localities.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub n: u32,
    /// Backup locality list length; defaults to every other locality.
    #[arg(long)]
    pub backups: Option<usize>,
    #[command(flatten)]
    pub faults: FaultArgs,
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RatioArgs {
    /// CSV produced by one of the run subcommands.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "none")]
    pub baseline: String,
    /// Only ratios for this mode; defaults to every non-baseline mode.
    #[arg(long)]
    pub mode: Option<String>,
    /// Column used as the x value: cores, localities, tasks, grain_us, n or error_rate.
    #[arg(long, default_value = "cores")]
    pub x: String,
    /// Output file; one `x ratio` line per point. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not a fraction in [0, 1]"))
    }
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be finite and non-negative"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid combination of otherwise well-formed arguments.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("{0}")]
    Io(String),
    #[error("run aborted: {0}")]
    Aborted(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Bench(BenchError::Config(_)) => 2,
            _ => 1,
        }
    }
}

/// Faulty locality ids: the explicit list, or `k` distinct ids drawn from the seed.
pub fn faulty_ids(args: &FaultArgs, localities: usize) -> Result<Vec<LocalityId>, CliError> {
    if let Some(k) = args.faulty_random {
        if k > localities {
            return Err(CliError::Usage(format!(
                "cannot pick {k} faulty localities out of {localities}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let mut ids: Vec<LocalityId> = rand::seq::index::sample(&mut rng, localities, k)
            .into_iter()
            .map(|i| i as LocalityId)
            .collect();
        ids.sort_unstable();
        return Ok(ids);
    }
    if let Some(bad) = args.faulty_nodes.iter().find(|&&id| id as usize >= localities) {
        return Err(CliError::Usage(format!("faulty node {bad} out of range for {localities} localities")));
    }
    Ok(args.faulty_nodes.clone())
}

fn fault_spec(args: &FaultArgs, localities: usize) -> Result<FaultSpec, CliError> {
    let spec = FaultSpec::new(args.error_rate).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec
        .with_faulty_localities(faulty_ids(args, localities)?)
        .with_mode(args.fault_mode)
        .with_seed(args.seed))
}

fn stencil_config(args: &StencilArgs) -> Result<StencilConfig, CliError> {
    let c = StencilConfig::new(args.subdomains, args.points, args.iterations, args.steps).with_courant(args.courant);
    c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(c)
}

fn net_config(args: &NetArgs) -> NetConfig {
    NetConfig::new(args.latency_us, args.per_byte_us)
}

fn repeat(run: &RunArgs, mut once: impl FnMut() -> Result<RunOutcome, CliError>) -> Result<Vec<RunOutcome>, CliError> {
    let mut runs = Vec::new();
    for _ in 0..run.repeat {
        let r = once()?;
        if let Some(e) = &r.error {
            return Err(CliError::Aborted(e.to_string()));
        }
        runs.push(r);
    }
    if !run.all_repeats {
        let best = runs
            .into_iter()
            .min_by(|a, b| a.report.wall_time_s.total_cmp(&b.report.wall_time_s))
            .expect("at least one repeat");
        runs = vec![best];
    }
    Ok(runs)
}

fn write_snapshot(path: &PathBuf, config: &StencilConfig, outcome: &RunOutcome) -> Result<(), CliError> {
    let values = outcome.grid.clone().unwrap_or_default();
    let snap = GridSnapshot {
        subdomains: config.subdomains as u64,
        points: config.points as u64,
        iteration: config.iterations as u64,
        values,
    };
    std::fs::write(path, snap.encode()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Runs one parsed command. Returns the reports that were emitted.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<Vec<RunReport>, CliError> {
    let (outcomes, run) = match &cli.command {
        Command::SyntheticLocal(a) => {
            let cfg = SyntheticLocalConfig {
                tasks: a.tasks,
                grain_us: a.grain_us,
                cores: a.cores as usize,
                mode: a.mode.mode,
                n: a.mode.n,
                faults: fault_spec(&a.faults, 1)?,
            };
            (repeat(&a.run, || Ok(run_synthetic_local(&cfg)?))?, &a.run)
        }
        Command::SyntheticDistributed(a) => {
            let k = a.localities as usize;
            let cfg = SyntheticDistributedConfig {
                localities: k,
                actions: a.tasks,
                tasks_per_action: a.tasks_per_action,
                grain_us: a.grain_us,
                cores: a.cores as usize,
                mode: a.mode.mode,
                n: a.mode.n,
                faults: fault_spec(&a.faults, k)?,
                net: net_config(&a.net),
            };
            (repeat(&a.run, || Ok(run_synthetic_distributed(&cfg)?))?, &a.run)
        }
        Command::StencilLocal(a) => {
            let cfg = StencilLocalConfig {
                stencil: stencil_config(&a.stencil)?,
                cores: a.cores as usize,
                mode: a.mode.mode,
                n: a.mode.n,
                faults: fault_spec(&a.faults, 1)?,
                profile: InitialProfile::default(),
            };
            let runs = repeat(&a.run, || Ok(run_stencil_local(&cfg)?))?;
            if let Some(p) = &a.stencil.snapshot_out {
                write_snapshot(p, &cfg.stencil, &runs[0])?;
            }
            (runs, &a.run)
        }
        Command::StencilDistributed(a) => {
            let k = a.localities as usize;
            let cfg = StencilDistributedConfig {
                stencil: stencil_config(&a.stencil)?,
                localities: k,
                cores: a.cores as usize,
                faults: fault_spec(&a.faults, k)?,
                local_n: a.n,
                backups: a.backups.unwrap_or(k.saturating_sub(1).max(1)),
                net: net_config(&a.net),
                profile: InitialProfile::default(),
            };
            let runs = repeat(&a.run, || Ok(run_stencil_distributed(&cfg)?))?;
            if let Some(p) = &a.stencil.snapshot_out {
                write_snapshot(p, &cfg.stencil, &runs[0])?;
            }
            (runs, &a.run)
        }
        Command::Ratio(a) => {
            ratio(a, stdout)?;
            return Ok(Vec::new());
        }
    };
    let reports: Vec<RunReport> = outcomes.into_iter().map(|o| o.report).collect();
    for r in &reports {
        writeln!(
            stdout,
            "{} mode={} n={} wall={:.4}s launched={} failures={} replays={} replicas={} fallbacks={}",
            r.benchmark, r.mode, r.n, r.wall_time_s, r.tasks_launched, r.failures, r.replays, r.replicas, r.remote_fallbacks
        )
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    if let Some(path) = &run.csv_out {
        let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        write_csv(BufWriter::new(file), &reports).map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(reports)
}

fn x_value(r: &RunReport, column: &str) -> Result<f64, CliError> {
    Ok(match column {
        "cores" => r.cores as f64,
        "localities" => r.localities as f64,
        "tasks" => r.tasks as f64,
        "grain_us" => r.grain_us as f64,
        "n" => r.n as f64,
        "error_rate" => r.error_rate,
        other => return Err(CliError::Usage(format!("unsupported x column {other:?}"))),
    })
}

fn ratio(args: &RatioArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = File::open(&args.input).map_err(|e| CliError::Io(format!("{}: {e}", args.input.display())))?;
    let reports = read_csv(file).map_err(|e| CliError::Io(e.to_string()))?;
    let best = |mode: &str, x: f64| -> Result<Option<f64>, CliError> {
        let mut m: Option<f64> = None;
        for r in reports.iter().filter(|r| r.mode == mode) {
            if x_value(r, &args.x)? == x {
                m = Some(m.map_or(r.wall_time_s, |w| w.min(r.wall_time_s)));
            }
        }
        Ok(m)
    };
    let mut points = Vec::new();
    let mut seen = Vec::new();
    let wanted = |r: &&RunReport| r.mode != args.baseline && args.mode.as_ref().map_or(true, |m| &r.mode == m);
    for r in reports.iter().filter(wanted) {
        let x = x_value(r, &args.x)?;
        if seen.contains(&(r.mode.clone(), x.to_bits())) {
            continue;
        }
        seen.push((r.mode.clone(), x.to_bits()));
        if let (Some(w), Some(base)) = (best(&r.mode, x)?, best(&args.baseline, x)?) {
            points.push((x, w / base));
        }
    }
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match &args.out {
        Some(p) => write_ratio_file(BufWriter::new(File::create(p).map_err(io)?), &points).map_err(io),
        None => write_ratio_file(stdout, &points).map_err(io),
    }
}
