use std::sync::{Arc, Mutex};

use resilience_core::ResilienceError;

use super::{policy_or_panic, ReplicatePolicy};
use crate::engine::{catch, when_all, with_attempt, Pool, PoolCounters, Promise, TaskFuture, TaskResult};

struct ReplicaSet<T> {
    pool: Pool,
    policy: ReplicatePolicy<T>,
    state: Mutex<SetState<T>>,
}

struct SetState<T> {
    accepted: Vec<Option<T>>,
    done: u32,
    promise: Option<Promise<T>>,
}

impl<T: Send + Sync + 'static> ReplicaSet<T> {
    fn complete(&self, index: usize, outcome: TaskResult<T>) {
        let c = self.pool.counters();
        let n = self.policy.n();
        let accepted = match outcome {
            Ok(v) => match self.policy.validate() {
                Some(validate) if !validate(&v) => {
                    PoolCounters::bump(&c.validation_failures);
                    None
                }
                _ => Some(v),
            },
            Err(_) => {
                PoolCounters::bump(&c.task_failures);
                None
            }
        };
        let mut st = self.state.lock().unwrap();
        st.done += 1;
        match self.policy.vote() {
            None => {
                if let Some(v) = accepted {
                    if let Some(p) = st.promise.take() {
                        drop(st);
                        p.set(Ok(v));
                        return;
                    }
                }
                if st.done == n {
                    if let Some(p) = st.promise.take() {
                        drop(st);
                        PoolCounters::bump(&c.exhausted);
                        p.set(Err(ResilienceError::no_valid_replica(n).into()));
                    }
                }
            }
            Some(vote) => {
                st.accepted[index] = accepted;
                if st.done == n {
                    let candidates: Vec<T> = st.accepted.iter_mut().filter_map(Option::take).collect();
                    let p = st.promise.take().expect("vote resolves once");
                    drop(st);
                    if candidates.is_empty() {
                        PoolCounters::bump(&c.exhausted);
                        p.set(Err(ResilienceError::no_valid_replica(n).into()));
                    } else {
                        let vote = Arc::clone(vote);
                        p.set(catch(move || Ok(vote(candidates))));
                    }
                }
            }
        }
    }
}

pub(crate) fn start_replicate<A, T, F>(
    pool: &Pool,
    policy: ReplicatePolicy<T>,
    task: F,
    args: A,
    promise: Promise<T>,
) where
    A: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(A) -> TaskResult<T> + Send + Sync + 'static,
{
    let n = policy.n();
    let set = Arc::new(ReplicaSet {
        pool: pool.clone(),
        state: Mutex::new(SetState {
            accepted: (0..n).map(|_| None).collect(),
            done: 0,
            promise: Some(promise),
        }),
        policy,
    });
    let task = Arc::new(task);
    for i in 0..n {
        let (set, task, args) = (Arc::clone(&set), Arc::clone(&task), args.clone());
        pool.execute(move || {
            let c = set.pool.counters();
            PoolCounters::bump(&c.replicas);
            PoolCounters::bump(&c.attempts);
            let outcome = with_attempt(i + 1, || catch(|| task(args)));
            set.complete(i as usize, outcome);
        });
    }
}

/// Launches `policy.n()` concurrent replicas of `task(args)`.
///
/// Without a vote function the first replica to finish successfully (and
/// validate, if a validator is set) wins. With one, every replica is awaited,
/// accepted results are collected in replica-index order and the vote picks
/// the answer. Replicas are never cancelled.
pub fn replicate_with<A, T, F>(pool: &Pool, policy: ReplicatePolicy<T>, task: F, args: A) -> TaskFuture<T>
where
    A: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(A) -> TaskResult<T> + Send + Sync + 'static,
{
    let (p, fut) = Promise::new();
    start_replicate(pool, policy, task, args, p);
    fut
}

/// Awaits `deps` once, then replicates `continuation`; each replica gets its
/// own copy of the values. A failed dependency launches no replicas.
pub fn dataflow_replicate_with<D, T, F>(
    pool: &Pool,
    policy: ReplicatePolicy<T>,
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
        Ok(values) => start_replicate(&pool, policy, continuation, values.clone(), p),
        Err(e) => p.set(Err(e.clone())),
    });
    fut
}

pub fn async_replicate<A, T, F>(pool: &Pool, n: u32, task: F, args: A) -> TaskFuture<T>
where
    A: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(A) -> TaskResult<T> + Send + Sync + 'static,
{
    replicate_with(pool, policy_or_panic(ReplicatePolicy::new(n)), task, args)
}

pub fn async_replicate_validate<A, T, F, V>(pool: &Pool, n: u32, validate: V, task: F, args: A) -> TaskFuture<T>
where
    A: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(A) -> TaskResult<T> + Send + Sync + 'static,
    V: Fn(&T) -> bool + Send + Sync + 'static,
{
    replicate_with(pool, policy_or_panic(ReplicatePolicy::new(n)).with_validate(validate), task, args)
}

pub fn async_replicate_vote<A, T, F, W>(pool: &Pool, n: u32, vote: W, task: F, args: A) -> TaskFuture<T>
where
    A: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(A) -> TaskResult<T> + Send + Sync + 'static,
    W: Fn(Vec<T>) -> T + Send + Sync + 'static,
{
    replicate_with(pool, policy_or_panic(ReplicatePolicy::new(n)).with_vote(vote), task, args)
}

pub fn async_replicate_vote_validate<A, T, F, W, V>(
    pool: &Pool,
    n: u32,
    vote: W,
    validate: V,
    task: F,
    args: A,
) -> TaskFuture<T>
where
    A: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(A) -> TaskResult<T> + Send + Sync + 'static,
    W: Fn(Vec<T>) -> T + Send + Sync + 'static,
    V: Fn(&T) -> bool + Send + Sync + 'static,
{
    let policy = policy_or_panic(ReplicatePolicy::new(n))
        .with_vote(vote)
        .with_validate(validate);
    replicate_with(pool, policy, task, args)
}

pub fn dataflow_replicate<D, T, F>(pool: &Pool, n: u32, deps: Vec<TaskFuture<D>>, continuation: F) -> TaskFuture<T>
where
    D: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(Vec<D>) -> TaskResult<T> + Send + Sync + 'static,
{
    dataflow_replicate_with(pool, policy_or_panic(ReplicatePolicy::new(n)), deps, continuation)
}

pub fn dataflow_replicate_validate<D, T, F, V>(
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
    let policy = policy_or_panic(ReplicatePolicy::new(n)).with_validate(validate);
    dataflow_replicate_with(pool, policy, deps, continuation)
}

pub fn dataflow_replicate_vote<D, T, F, W>(
    pool: &Pool,
    n: u32,
    vote: W,
    deps: Vec<TaskFuture<D>>,
    continuation: F,
) -> TaskFuture<T>
where
    D: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(Vec<D>) -> TaskResult<T> + Send + Sync + 'static,
    W: Fn(Vec<T>) -> T + Send + Sync + 'static,
{
    let policy = policy_or_panic(ReplicatePolicy::new(n)).with_vote(vote);
    dataflow_replicate_with(pool, policy, deps, continuation)
}

pub fn dataflow_replicate_vote_validate<D, T, F, W, V>(
    pool: &Pool,
    n: u32,
    vote: W,
    validate: V,
    deps: Vec<TaskFuture<D>>,
    continuation: F,
) -> TaskFuture<T>
where
    D: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: Fn(Vec<D>) -> TaskResult<T> + Send + Sync + 'static,
    W: Fn(Vec<T>) -> T + Send + Sync + 'static,
    V: Fn(&T) -> bool + Send + Sync + 'static,
{
    let policy = policy_or_panic(ReplicatePolicy::new(n))
        .with_vote(vote)
        .with_validate(validate);
    dataflow_replicate_with(pool, policy, deps, continuation)
}
