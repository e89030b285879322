use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use resilience_core::stencil::{advance, extend, initial_grid, sum_abs, InitialProfile};
use resilience_core::{
    make_backup_lists, majority_vote, ChecksumWeights, FaultContext, FaultSpec, LocalityId, StencilConfig, Subdomain,
    SubdomainUpdate, TaskError,
};

use super::{BenchError, Mode, RunOutcome};
use crate::distributed::distributed_replay_validate;
use crate::engine::{current_attempt, dataflow, ready, Pool, PoolConfig, TaskFuture, TaskResult};
use crate::local::{
    async_replay_validate, dataflow_replay, dataflow_replay_validate, dataflow_replicate, dataflow_replicate_validate,
    dataflow_replicate_vote, dataflow_replicate_vote_validate,
};
use crate::locality::{spawn_localities, Channel, Locality, NetConfig, SimMetrics};
use crate::report::RunReport;

#[derive(Debug, Clone)]
pub struct StencilLocalConfig {
    pub stencil: StencilConfig,
    pub cores: usize,
    pub mode: Mode,
    pub n: u32,
    pub faults: FaultSpec,
    pub profile: InitialProfile,
}

#[derive(Debug, Clone)]
pub struct StencilDistributedConfig {
    pub stencil: StencilConfig,
    pub localities: usize,
    /// Workers per locality.
    pub cores: usize,
    pub faults: FaultSpec,
    /// Local attempts before falling back to other localities.
    pub local_n: u32,
    /// Length of the backup locality list.
    pub backups: usize,
    pub net: NetConfig,
    pub profile: InitialProfile,
}

type Node = Arc<SubdomainUpdate>;

/// How many iterations of the local DAG may be in flight at once.
const WINDOW: usize = 32;

#[derive(Default)]
struct Probe {
    executed: AtomicU64,
    injected: AtomicU64,
}

impl Probe {
    fn run(
        &self,
        faults: &FaultSpec,
        config: &StencilConfig,
        weights: &ChecksumWeights,
        index: usize,
        ctx: FaultContext,
        ext: &[f64],
    ) -> TaskResult<SubdomainUpdate> {
        self.executed.fetch_add(1, Ordering::Relaxed);
        if faults.sample_failure(ctx) {
            self.injected.fetch_add(1, Ordering::Relaxed);
        }
        advance(index, ext, config.steps, config.courant, weights, faults, ctx)
    }

    fn counts(&self) -> (u64, u64) {
        (self.executed.load(Ordering::Relaxed), self.injected.load(Ordering::Relaxed))
    }
}

fn seed_node(s: Subdomain) -> Node {
    Arc::new(SubdomainUpdate {
        expected_checksum: s.checksum,
        scale: sum_abs(&s.values),
        subdomain: s,
    })
}

fn config_error(e: impl std::fmt::Display) -> BenchError {
    BenchError::Config(e.to_string())
}

fn finish_grid<T>(futures: &[TaskFuture<T>], values: impl Fn(&T) -> &[f64]) -> Result<Vec<f64>, TaskError> {
    let mut grid = Vec::new();
    for f in futures {
        f.inspect(|r| match r {
            Ok(v) => {
                grid.extend_from_slice(values(v));
                Ok(())
            }
            Err(e) => Err(e.clone()),
        })?;
    }
    Ok(grid)
}

/// One dataflow task per subdomain and iteration, each depending on its
/// left, own and right subdomain from the previous iteration, wrapped by
/// `mode`. Validating modes check the physics checksum.
pub fn run_stencil_local(cfg: &StencilLocalConfig) -> Result<RunOutcome, BenchError> {
    let sc = cfg.stencil;
    sc.validate().map_err(config_error)?;
    if cfg.mode != Mode::None && cfg.n == 0 {
        return Err(config_error("n must be at least 1"));
    }
    let pool = Pool::new(PoolConfig::new(cfg.cores).map_err(config_error)?);
    let weights = Arc::new(ChecksumWeights::new(sc.points, sc.steps, sc.courant));
    let probe = Arc::new(Probe::default());
    let s = sc.subdomains;
    let tol = sc.checksum_tolerance;
    let n = cfg.n;

    let start = Instant::now();
    let mut current: Vec<TaskFuture<Node>> = initial_grid(&sc, &cfg.profile)
        .into_iter()
        .map(|sd| ready(seed_node(sd)))
        .collect();
    let mut in_flight: VecDeque<Vec<TaskFuture<Node>>> = VecDeque::new();
    for it in 0..sc.iterations {
        let next: Vec<TaskFuture<Node>> = (0..s)
            .map(|i| {
                let deps = vec![
                    current[(i + s - 1) % s].clone(),
                    current[i].clone(),
                    current[(i + 1) % s].clone(),
                ];
                let task_id = (it * s + i) as u64;
                let (probe, weights, faults) = (Arc::clone(&probe), Arc::clone(&weights), cfg.faults.clone());
                let body = move |d: Vec<Node>| -> TaskResult<Node> {
                    let ext = extend(&d[0].subdomain.values, &d[1].subdomain.values, &d[2].subdomain.values, sc.steps);
                    let ctx = FaultContext::new(0, task_id, current_attempt());
                    probe.run(&faults, &sc, &weights, i, ctx, &ext).map(Arc::new)
                };
                let valid = move |u: &Node| u.is_valid(tol);
                match cfg.mode {
                    Mode::None => dataflow(&pool, deps, body),
                    Mode::Replay => dataflow_replay(&pool, n, deps, body),
                    Mode::ReplayValidate => dataflow_replay_validate(&pool, n, valid, deps, body),
                    Mode::Replicate => dataflow_replicate(&pool, n, deps, body),
                    Mode::ReplicateValidate => dataflow_replicate_validate(&pool, n, valid, deps, body),
                    Mode::ReplicateVote => dataflow_replicate_vote(&pool, n, majority_vote, deps, body),
                    Mode::ReplicateVoteValidate => {
                        dataflow_replicate_vote_validate(&pool, n, majority_vote, valid, deps, body)
                    }
                }
            })
            .collect();
        in_flight.push_back(next.clone());
        if in_flight.len() > WINDOW {
            for f in in_flight.pop_front().unwrap() {
                f.wait();
            }
        }
        current = next;
    }
    let grid = finish_grid(&current, |u| &u.subdomain.values);
    let wall = start.elapsed();
    drop(in_flight);
    pool.shutdown();

    let stats = pool.stats();
    let (executed, injected) = probe.counts();
    let mut out = RunOutcome::new(RunReport {
        benchmark: "stencil-local".into(),
        mode: cfg.mode.to_string(),
        cores: cfg.cores,
        localities: 1,
        tasks: (sc.iterations * s) as u64,
        grain_us: 0,
        n: cfg.mode.effective_n(n),
        error_rate: cfg.faults.base_rate(),
        faulty_nodes: cfg.faults.faulty_localities().to_vec(),
        seed: cfg.faults.seed(),
        wall_time_s: wall.as_secs_f64(),
        tasks_launched: executed,
        failures: injected,
        replays: stats.replays,
        replicas: stats.replicas,
        ..RunReport::default()
    });
    out.exhausted = stats.exhausted;
    out.validation_failures = stats.validation_failures;
    match grid {
        Ok(g) => out.grid = Some(g),
        Err(e) => out.error = Some(e),
    }
    Ok(out)
}

pub(crate) const PARTITION_ACTION: &str = "stencil_partition";

type Wired = (Vec<f64>, f64, f64);

fn wired_valid(tol: f64) -> impl Fn(&Wired) -> bool + Send + Sync + 'static {
    move |(values, expected, scale): &Wired| {
        SubdomainUpdate {
            subdomain: Subdomain::new(0, values.clone()),
            expected_checksum: *expected,
            scale: *scale,
        }
        .is_valid(tol)
    }
}

struct Links {
    to_left: Vec<Channel<Vec<f64>>>,
    to_right: Vec<Channel<Vec<f64>>>,
}

/// Lockstep partitioned stencil over `localities` simulated localities.
///
/// Each locality owns a contiguous block of subdomains. Per iteration it
/// swaps `steps`-wide ghost regions with both neighbours over channels, then
/// advances its block under local replay with checksum validation. When all
/// local attempts fail, the block is shipped to the backup localities in
/// turn, where the action again runs local replay.
pub fn run_stencil_distributed(cfg: &StencilDistributedConfig) -> Result<RunOutcome, BenchError> {
    let sc = cfg.stencil;
    sc.validate().map_err(config_error)?;
    let k = cfg.localities;
    if k == 0 || sc.subdomains % k != 0 {
        return Err(config_error(format!(
            "{} subdomains cannot be split evenly over {k} localities",
            sc.subdomains
        )));
    }
    if cfg.local_n == 0 {
        return Err(config_error("local attempt count must be at least 1"));
    }
    if cfg.backups == 0 || cfg.backups > k {
        return Err(config_error(format!("backup list length must be in 1..={k}")));
    }
    let block = sc.subdomains / k;
    let block_len = block * sc.points;
    let tol = sc.checksum_tolerance;
    let local_n = cfg.local_n;
    let weights = Arc::new(ChecksumWeights::new(block_len, sc.steps, sc.courant));
    let probe = Arc::new(Probe::default());

    let kernel = {
        let (probe, weights, faults) = (Arc::clone(&probe), Arc::clone(&weights), cfg.faults.clone());
        Arc::new(move |rank: LocalityId, task_id: u64, ext: &[f64]| {
            let ctx = FaultContext::new(rank, task_id, current_attempt());
            probe.run(&faults, &sc, &weights, rank as usize, ctx, ext)
        })
    };
    let local_attempts = {
        let kernel = Arc::clone(&kernel);
        move |pool: &Pool, rank: LocalityId, task_id: u64, ext: Arc<Vec<f64>>| {
            let kernel = Arc::clone(&kernel);
            async_replay_validate(
                pool,
                local_n,
                move |u: &SubdomainUpdate| u.is_valid(tol),
                move |e: Arc<Vec<f64>>| kernel(rank, task_id, &e),
                ext,
            )
        }
    };

    let pool = PoolConfig::new(cfg.cores).map_err(config_error)?;
    let mut builder = spawn_localities(k, pool, cfg.net)?;
    {
        let local_attempts = local_attempts.clone();
        builder.register_async_action(PARTITION_ACTION, move |loc: &Locality, (ext, task_id): (Vec<f64>, u64)| {
            local_attempts(loc.pool(), loc.rank(), task_id, Arc::new(ext)).map(|r| {
                r.as_ref()
                    .map(|u| (u.subdomain.values.clone(), u.expected_checksum, u.scale))
                    .map_err(Clone::clone)
            })
        })?;
    }
    let sim = builder.start()?;
    let left = |r: usize| (r + k - 1) % k;
    let right = |r: usize| (r + 1) % k;
    let links = Links {
        to_left: (0..k)
            .map(|r| sim.channel(r as u32, left(r) as u32))
            .collect::<Result<_, _>>()?,
        to_right: (0..k)
            .map(|r| sim.channel(r as u32, right(r) as u32))
            .collect::<Result<_, _>>()?,
    };
    let grid = initial_grid(&sc, &cfg.profile);
    let blocks: Vec<Vec<f64>> = grid
        .chunks(block)
        .map(|c| c.iter().flat_map(|sd| sd.values.iter().copied()).collect())
        .collect();

    let start = Instant::now();
    let results: Vec<Result<Vec<f64>, TaskError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = blocks
            .into_iter()
            .enumerate()
            .map(|(r, mut mine)| {
                let loc = sim.locality(r as u32);
                let (links, local_attempts) = (&links, &local_attempts);
                let (tl, tr) = (&links.to_left[r], &links.to_right[r]);
                scope.spawn(move || -> Result<Vec<f64>, TaskError> {
                    let abort = |e: TaskError| {
                        tl.close();
                        tr.close();
                        Err(e)
                    };
                    let g = sc.steps;
                    for it in 0..sc.iterations {
                        tl.send(&mine[..g].to_vec());
                        tr.send(&mine[mine.len() - g..].to_vec());
                        let lg = links.to_right[left(r)].recv().get();
                        let rg = links.to_left[right(r)].recv().get();
                        let (lg, rg) = match (lg, rg) {
                            (Ok(a), Ok(b)) => (a, b),
                            (Err(e), _) | (_, Err(e)) => return abort(e),
                        };
                        let ext = extend(&lg, &mine, &rg, g);
                        let task_id = (it * k + r) as u64;
                        let ext = Arc::new(ext);
                        match local_attempts(loc.pool(), r as u32, task_id, Arc::clone(&ext)).get() {
                            Ok(u) => mine = u.subdomain.values,
                            Err(_) => {
                                SimMetrics::add(&loc.metrics().remote_fallbacks, 1);
                                let ids = make_backup_lists(r as u32, k as u32, cfg.backups);
                                let args = (Arc::unwrap_or_clone(ext), task_id);
                                let remote: TaskResult<Wired> =
                                    distributed_replay_validate(&loc, &ids, wired_valid(tol), PARTITION_ACTION, &args)
                                        .get();
                                match remote {
                                    Ok((values, _, _)) => mine = values,
                                    Err(e) => return abort(e),
                                }
                            }
                        }
                    }
                    Ok(mine)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("driver thread panicked")).collect()
    });
    let wall = start.elapsed();
    sim.shutdown();

    let stats = sim.stats();
    let pools: Vec<_> = sim.localities().iter().map(|l| l.pool().stats()).collect();
    let sum = |f: fn(&crate::engine::PoolStats) -> u64| pools.iter().map(f).sum::<u64>();
    let (executed, injected) = probe.counts();
    let mut out = RunOutcome::new(RunReport {
        benchmark: "stencil-distributed".into(),
        mode: "replay_validate".into(),
        cores: cfg.cores,
        localities: k,
        tasks: (sc.iterations * k) as u64,
        grain_us: 0,
        n: local_n,
        error_rate: cfg.faults.base_rate(),
        faulty_nodes: cfg.faults.faulty_localities().to_vec(),
        seed: cfg.faults.seed(),
        wall_time_s: wall.as_secs_f64(),
        tasks_launched: executed,
        failures: injected,
        replays: sum(|p| p.replays),
        replicas: 0,
        remote_invocations: stats.remote_invocations,
        remote_fallbacks: stats.remote_fallbacks,
        bytes_moved: stats.bytes_moved,
    });
    out.exhausted = sum(|p| p.exhausted);
    out.validation_failures = sum(|p| p.validation_failures) + stats.validation_failures;
    out.success_by_rank = stats.success_by_rank;
    let mut grid = Vec::with_capacity(sc.total_points());
    for r in results {
        match r {
            Ok(b) => grid.extend(b),
            Err(e) => {
                out.error.get_or_insert(e);
            }
        }
    }
    if out.error.is_none() {
        out.grid = Some(grid);
    }
    Ok(out)
}
