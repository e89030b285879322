use std::sync::Arc;

use super::{replay_with, replicate_with, PolicyError, ReplayPolicy, ReplicatePolicy, Validate, Vote};
use crate::engine::{Pool, TaskFuture, TaskResult};

/// Something that runs tasks and hands back futures.
pub trait Executor<T: Send + Sync + 'static> {
    fn execute<F>(&self, task: F) -> TaskFuture<T>
    where
        F: Fn() -> TaskResult<T> + Send + Sync + 'static;

    /// One task per index in `0..count`.
    fn bulk_execute<F>(&self, count: usize, task: F) -> Vec<TaskFuture<T>>
    where
        F: Fn(usize) -> TaskResult<T> + Send + Sync + 'static,
    {
        let task = Arc::new(task);
        (0..count)
            .map(|i| {
                let task = Arc::clone(&task);
                self.execute(move || task(i))
            })
            .collect()
    }
}

impl<T: Send + Sync + 'static> Executor<T> for Pool {
    fn execute<F>(&self, task: F) -> TaskFuture<T>
    where
        F: Fn() -> TaskResult<T> + Send + Sync + 'static,
    {
        self.submit(task)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResilienceMode {
    Replay,
    Replicate,
}

/// Wraps every submitted task in replay or replicate over a base pool.
pub struct ResilientExecutor<T> {
    base: Pool,
    mode: ResilienceMode,
    n: u32,
    validate: Option<Validate<T>>,
    vote: Option<Vote<T>>,
}

impl<T> Clone for ResilientExecutor<T> {
    fn clone(&self) -> Self {
        ResilientExecutor {
            base: self.base.clone(),
            mode: self.mode,
            n: self.n,
            validate: self.validate.clone(),
            vote: self.vote.clone(),
        }
    }
}

impl<T> ResilientExecutor<T> {
    pub fn base(&self) -> &Pool {
        &self.base
    }

    pub fn mode(&self) -> ResilienceMode {
        self.mode
    }

    pub fn n(&self) -> u32 {
        self.n
    }
}

/// `vote` is ignored in replay mode.
pub fn make_resilient_executor<T>(
    base: &Pool,
    mode: ResilienceMode,
    n: u32,
    validate: Option<Validate<T>>,
    vote: Option<Vote<T>>,
) -> Result<ResilientExecutor<T>, PolicyError> {
    if n == 0 {
        return Err(PolicyError::ZeroCount);
    }
    Ok(ResilientExecutor {
        base: base.clone(),
        mode,
        n,
        validate,
        vote,
    })
}

impl<T: Send + Sync + 'static> Executor<T> for ResilientExecutor<T> {
    fn execute<F>(&self, task: F) -> TaskFuture<T>
    where
        F: Fn() -> TaskResult<T> + Send + Sync + 'static,
    {
        let body = move |()| task();
        match self.mode {
            ResilienceMode::Replay => {
                let policy = ReplayPolicy::new(self.n)
                    .expect("checked at construction")
                    .with_validate_arc(self.validate.clone());
                replay_with(&self.base, policy, body, ())
            }
            ResilienceMode::Replicate => {
                let policy = ReplicatePolicy::new(self.n)
                    .expect("checked at construction")
                    .with_validate_arc(self.validate.clone())
                    .with_vote_arc(self.vote.clone());
                replicate_with(&self.base, policy, body, ())
            }
        }
    }
}

/// Applies `f` to every item through `exec` and waits for all of them.
/// The first error (in item order) is returned.
pub fn parallel_for_each<I, T, E, F>(exec: &E, items: Vec<I>, f: F) -> TaskResult<Vec<T>>
where
    I: Send + Sync + 'static,
    T: Clone + Send + Sync + 'static,
    E: Executor<T>,
    F: Fn(&I) -> TaskResult<T> + Send + Sync + 'static,
{
    let items = Arc::new(items);
    let f = Arc::new(f);
    let futures = {
        let items = Arc::clone(&items);
        exec.bulk_execute(items.len(), move |i| f(&items[i]))
    };
    let all: Vec<TaskResult<T>> = futures.iter().map(TaskFuture::get).collect();
    all.into_iter().collect()
}
