use std::sync::Arc;

use resilience_core::{ResilienceError, TaskError};

use super::{policy_or_panic, ReplayPolicy};
use crate::engine::{catch, when_all, with_attempt, Pool, PoolCounters, Promise, TaskFuture, TaskResult};

struct ReplayJob<A, T, F> {
    pool: Pool,
    policy: ReplayPolicy<T>,
    task: F,
    args: A,
}

enum Failure {
    Exception(TaskError),
    Invalid,
}

impl<A, T, F> ReplayJob<A, T, F>
where
    A: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(A) -> TaskResult<T> + Send + Sync + 'static,
{
    fn attempt(self: Arc<Self>, k: u32, promise: Promise<T>) {
        let pool = self.pool.clone();
        // If the pool has shut down the dropped promise resolves the future.
        pool.execute(move || {
            let c = self.pool.counters();
            PoolCounters::bump(&c.attempts);
            if k > 1 {
                PoolCounters::bump(&c.replays);
            }
            let outcome = with_attempt(k, || catch(|| (self.task)(self.args.clone())));
            let failure = match outcome {
                Ok(v) => match self.policy.validate() {
                    Some(validate) if !validate(&v) => {
                        PoolCounters::bump(&c.validation_failures);
                        Failure::Invalid
                    }
                    _ => return promise.set(Ok(v)),
                },
                Err(e) => {
                    PoolCounters::bump(&c.task_failures);
                    Failure::Exception(e)
                }
            };
            if k < self.policy.n() {
                self.attempt(k + 1, promise);
            } else {
                PoolCounters::bump(&c.exhausted);
                let err = match failure {
                    Failure::Exception(e) => ResilienceError::exhausted_with_exception(e, k),
                    Failure::Invalid => ResilienceError::exhausted_with_invalid_result(k),
                };
                promise.set(Err(err.into()));
            }
        });
    }
}

pub(crate) fn start_replay<A, T, F>(pool: &Pool, policy: ReplayPolicy<T>, task: F, args: A, promise: Promise<T>)
where
    A: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(A) -> TaskResult<T> + Send + Sync + 'static,
{
    let job = Arc::new(ReplayJob {
        pool: pool.clone(),
        policy,
        task,
        args,
    });
    job.attempt(1, promise);
}

/// Runs `task(args)` until an attempt succeeds (and validates, if the policy
/// has a validator) or `policy.n()` attempts are used up. Attempts are
/// sequential; each one is scheduled as a fresh task.
pub fn replay_with<A, T, F>(pool: &Pool, policy: ReplayPolicy<T>, task: F, args: A) -> TaskFuture<T>
where
    A: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(A) -> TaskResult<T> + Send + Sync + 'static,
{
    let (p, fut) = Promise::new();
    start_replay(pool, policy, task, args, p);
    fut
}

/// Awaits `deps` once, then replays `continuation` over copies of their
/// values. Dependencies are never re-executed.
pub fn dataflow_replay_with<D, T, F>(
    pool: &Pool,
    policy: ReplayPolicy<T>,
    deps: Vec<TaskFuture<D>>,
    continuation: F,
) -> TaskFuture<T>
where
    D: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(Vec<D>) -> TaskResult<T> + Send + Sync + 'static,
{
    assert!(!deps.is_empty(), "dataflow needs at least one dependency");
    let (p, fut) = Promise::new();
    let pool = pool.clone();
    when_all(deps).on_complete(move |r| match r {
        Ok(values) => start_replay(&pool, policy, continuation, values.clone(), p),
        Err(e) => p.set(Err(e.clone())),
    });
    fut
}

/// Replay on exception, up to `n` total attempts; the last exception is
/// reported on exhaustion.
///
/// # Panics
/// If `n == 0`.
pub fn async_replay<A, T, F>(pool: &Pool, n: u32, task: F, args: A) -> TaskFuture<T>
where
    A: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(A) -> TaskResult<T> + Send + Sync + 'static,
{
    replay_with(pool, policy_or_panic(ReplayPolicy::new(n)), task, args)
}

/// Replay until an attempt neither raises nor fails `validate`.
pub fn async_replay_validate<A, T, F, V>(pool: &Pool, n: u32, validate: V, task: F, args: A) -> TaskFuture<T>
where
    A: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(A) -> TaskResult<T> + Send + Sync + 'static,
    V: Fn(&T) -> bool + Send + Sync + 'static,
{
    replay_with(pool, policy_or_panic(ReplayPolicy::new(n)).with_validate(validate), task, args)
}

pub fn dataflow_replay<D, T, F>(pool: &Pool, n: u32, deps: Vec<TaskFuture<D>>, continuation: F) -> TaskFuture<T>
where
    D: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(Vec<D>) -> TaskResult<T> + Send + Sync + 'static,
{
    dataflow_replay_with(pool, policy_or_panic(ReplayPolicy::new(n)), deps, continuation)
}

pub fn dataflow_replay_validate<D, T, F, V>(
    pool: &Pool,
    n: u32,
    validate: V,
    deps: Vec<TaskFuture<D>>,
    continuation: F,
) -> TaskFuture<T>
where
    D: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(Vec<D>) -> TaskResult<T> + Send + Sync + 'static,
    V: Fn(&T) -> bool + Send + Sync + 'static,
{
    dataflow_replay_with(
        pool,
        policy_or_panic(ReplayPolicy::new(n)).with_validate(validate),
        deps,
        continuation,
    )
}
