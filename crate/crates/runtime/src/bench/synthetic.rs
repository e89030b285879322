use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use resilience_core::{majority_vote, FaultContext, FaultSpec, LocalityId, TaskError};

use super::{BenchError, Mode, RunOutcome};
use crate::distributed::{
    distributed_replay, distributed_replay_validate, distributed_replicate, distributed_replicate_validate,
    distributed_replicate_vote, distributed_replicate_vote_validate,
};
use crate::engine::{busy_wait, current_attempt, when_all, Pool, PoolConfig, Promise, TaskFuture, TaskResult};
use crate::local::{
    async_replay, async_replay_validate, async_replicate, async_replicate_validate, async_replicate_vote,
    async_replicate_vote_validate,
};
use crate::locality::{spawn_localities, Locality, NetConfig};
use crate::report::RunReport;

#[derive(Debug, Clone)]
pub struct SyntheticLocalConfig {
    pub tasks: u64,
    pub grain_us: u64,
    pub cores: usize,
    pub mode: Mode,
    pub n: u32,
    pub faults: FaultSpec,
}

#[derive(Debug, Clone)]
pub struct SyntheticDistributedConfig {
    pub localities: usize,
    pub actions: u64,
    pub tasks_per_action: u64,
    pub grain_us: u64,
    /// Workers per locality.
    pub cores: usize,
    pub mode: Mode,
    /// Replica count, or length of the locality list for replay.
    pub n: u32,
    pub faults: FaultSpec,
    pub net: NetConfig,
}

/// Value a fault-free task returns for `id`.
fn expected(id: u64) -> u64 {
    id.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0x5bd1_e995
}

fn is_expected(r: &(u64, u64)) -> bool {
    r.1 == expected(r.0)
}

#[derive(Default)]
struct Probe {
    executed: AtomicU64,
    injected: AtomicU64,
}

impl Probe {
    fn load(c: &AtomicU64) -> u64 {
        c.load(Ordering::Relaxed)
    }
}

/// Applies the fault model to a finished synthetic result.
fn finish(faults: &FaultSpec, probe: &Probe, ctx: FaultContext, id: u64) -> TaskResult<(u64, u64)> {
    if faults.sample_failure(ctx) {
        probe.injected.fetch_add(1, Ordering::Relaxed);
    }
    let v = faults.inject(ctx, expected(id), |v, site| v ^ (1 << (site.0 % 64)))?;
    Ok((id, v))
}

fn launch_local<F>(pool: &Pool, mode: Mode, n: u32, body: F, id: u64) -> TaskFuture<(u64, u64)>
where
    F: Fn(u64) -> TaskResult<(u64, u64)> + Send + Sync + 'static,
{
    match mode {
        Mode::None => pool.submit(move || body(id)),
        Mode::Replay => async_replay(pool, n, body, id),
        Mode::ReplayValidate => async_replay_validate(pool, n, is_expected, body, id),
        Mode::Replicate => async_replicate(pool, n, body, id),
        Mode::ReplicateValidate => async_replicate_validate(pool, n, is_expected, body, id),
        Mode::ReplicateVote => async_replicate_vote(pool, n, majority_vote, body, id),
        Mode::ReplicateVoteValidate => async_replicate_vote_validate(pool, n, majority_vote, is_expected, body, id),
    }
}

fn check_common(n: u32, cores: usize, mode: Mode) -> Result<(), BenchError> {
    if cores == 0 {
        return Err(BenchError::Config("cores must be at least 1".into()));
    }
    if mode != Mode::None && n == 0 {
        return Err(BenchError::Config("n must be at least 1".into()));
    }
    Ok(())
}

/// `tasks` busy-wait tasks of `grain_us` each, wrapped by `mode`, on a pool
/// of `cores` workers. Task failures that survive resilience are counted in
/// `exhausted`; the run carries on.
pub fn run_synthetic_local(cfg: &SyntheticLocalConfig) -> Result<RunOutcome, BenchError> {
    check_common(cfg.n, cfg.cores, cfg.mode)?;
    let pool = Pool::new(PoolConfig::new(cfg.cores).map_err(|e| BenchError::Config(e.to_string()))?);
    let probe = Arc::new(Probe::default());
    let grain = Duration::from_micros(cfg.grain_us);
    let body = {
        let probe = Arc::clone(&probe);
        let faults = cfg.faults.clone();
        Arc::new(move |id: u64| {
            probe.executed.fetch_add(1, Ordering::Relaxed);
            busy_wait(grain);
            finish(&faults, &probe, FaultContext::new(0, id, current_attempt()), id)
        })
    };

    let start = Instant::now();
    let futures: Vec<_> = (0..cfg.tasks)
        .map(|id| {
            let body = Arc::clone(&body);
            launch_local(&pool, cfg.mode, cfg.n, move |i| body(i), id)
        })
        .collect();
    let exhausted = futures.iter().filter(|f| f.inspect(|r| r.is_err())).count() as u64;
    let wall = start.elapsed();
    pool.shutdown();

    let stats = pool.stats();
    let mut out = RunOutcome::new(RunReport {
        benchmark: "synthetic-local".into(),
        mode: cfg.mode.to_string(),
        cores: cfg.cores,
        localities: 1,
        tasks: cfg.tasks,
        grain_us: cfg.grain_us,
        n: cfg.mode.effective_n(cfg.n),
        error_rate: cfg.faults.base_rate(),
        faulty_nodes: cfg.faults.faulty_localities().to_vec(),
        seed: cfg.faults.seed(),
        wall_time_s: wall.as_secs_f64(),
        tasks_launched: Probe::load(&probe.executed),
        failures: Probe::load(&probe.injected),
        replays: stats.replays,
        replicas: stats.replicas,
        ..RunReport::default()
    });
    out.exhausted = exhausted;
    out.validation_failures = stats.validation_failures;
    Ok(out)
}

pub(crate) const SYNTHETIC_ACTION: &str = "synthetic";

fn launch_remote(caller: &Locality, mode: Mode, ids: &[LocalityId], args: &(u64, u64, u64)) -> TaskFuture<(u64, u64)> {
    let a = SYNTHETIC_ACTION;
    match mode {
        Mode::None => caller.remote_invoke(ids[0], a, args),
        Mode::Replay => distributed_replay(caller, ids, a, args),
        Mode::ReplayValidate => distributed_replay_validate(caller, ids, is_expected, a, args),
        Mode::Replicate => distributed_replicate(caller, ids, a, args),
        Mode::ReplicateValidate => distributed_replicate_validate(caller, ids, is_expected, a, args),
        Mode::ReplicateVote => distributed_replicate_vote(caller, ids, majority_vote, a, args),
        Mode::ReplicateVoteValidate => {
            distributed_replicate_vote_validate(caller, ids, majority_vote, is_expected, a, args)
        }
    }
}

/// Locality list for an action homed on `home`: `home` first, then the next
/// ranks in order, wrapping when the list is longer than the simulation.
pub(crate) fn round_robin_ids(home: LocalityId, localities: usize, len: u32) -> Vec<LocalityId> {
    let k = localities as u32;
    (0..len).map(|i| (home + i) % k).collect()
}

/// `actions` remote actions dealt round-robin over the localities, each
/// spawning `tasks_per_action` busy-wait tasks on its target. Locality 0
/// drives every action and the resilience protocol.
pub fn run_synthetic_distributed(cfg: &SyntheticDistributedConfig) -> Result<RunOutcome, BenchError> {
    check_common(cfg.n, cfg.cores, cfg.mode)?;
    let pool = PoolConfig::new(cfg.cores).map_err(|e| BenchError::Config(e.to_string()))?;
    let mut builder = spawn_localities(cfg.localities, pool, cfg.net)?;
    let probe = Arc::new(Probe::default());
    {
        let probe = Arc::clone(&probe);
        let faults = cfg.faults.clone();
        builder.register_async_action(
            SYNTHETIC_ACTION,
            move |loc: &Locality, (id, tasks, grain_us): (u64, u64, u64)| {
                probe.executed.fetch_add(1, Ordering::Relaxed);
                let grain = Duration::from_micros(grain_us);
                let work: Vec<TaskFuture<()>> = (0..tasks)
                    .map(|_| {
                        loc.pool().submit(move || {
                            busy_wait(grain);
                            Ok(())
                        })
                    })
                    .collect();
                let (p, fut) = Promise::new();
                let (probe, faults, rank) = (Arc::clone(&probe), faults.clone(), loc.rank());
                when_all(work).on_complete(move |r| {
                    let r: TaskResult<(u64, u64)> = match r {
                        Ok(_) => finish(&faults, &probe, FaultContext::new(rank, id, current_attempt()), id),
                        Err(e) => Err(e.clone()),
                    };
                    p.set(r);
                });
                fut
            },
        )?;
    }
    let sim = builder.start()?;
    let caller = sim.locality(0);
    let list_len = cfg.mode.effective_n(cfg.n);

    let start = Instant::now();
    let futures: Vec<_> = (0..cfg.actions)
        .map(|id| {
            let home = (id % cfg.localities as u64) as LocalityId;
            let ids = round_robin_ids(home, cfg.localities, list_len);
            launch_remote(&caller, cfg.mode, &ids, &(id, cfg.tasks_per_action, cfg.grain_us))
        })
        .collect();
    let outcomes: Vec<Result<(u64, u64), TaskError>> = futures.iter().map(|f| f.inspect(Clone::clone)).collect();
    let wall = start.elapsed();
    sim.shutdown();

    let exhausted = outcomes.iter().filter(|r| r.is_err()).count() as u64;
    let stats = sim.stats();
    let executed = Probe::load(&probe.executed);
    let mut out = RunOutcome::new(RunReport {
        benchmark: "synthetic-distributed".into(),
        mode: cfg.mode.to_string(),
        cores: cfg.cores,
        localities: cfg.localities,
        tasks: cfg.actions,
        grain_us: cfg.grain_us,
        n: list_len,
        error_rate: cfg.faults.base_rate(),
        faulty_nodes: cfg.faults.faulty_localities().to_vec(),
        seed: cfg.faults.seed(),
        wall_time_s: wall.as_secs_f64(),
        tasks_launched: executed,
        failures: Probe::load(&probe.injected),
        replays: if cfg.mode.is_replay() { stats.remote_fallbacks } else { 0 },
        replicas: if cfg.mode.is_replicate() { executed } else { 0 },
        remote_invocations: stats.remote_invocations,
        remote_fallbacks: stats.remote_fallbacks,
        bytes_moved: stats.bytes_moved,
    });
    out.exhausted = exhausted;
    out.validation_failures = stats.validation_failures;
    out.success_by_rank = stats.success_by_rank;
    Ok(out)
}
