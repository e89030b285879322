//! Minimal asynchronous task substrate: a worker pool returning futures,
//! plus a dataflow join.

mod future;
mod pool;
mod spin;

pub use future::{failed, ready, when_all, Promise, TaskFuture, TaskResult};
pub use pool::{current_attempt, current_pool_tag, Pool, PoolConfig, PoolCounters, PoolError, PoolStats};
pub use spin::{busy_wait, busy_wait_wall};

pub(crate) use pool::{catch, with_attempt};

/// Runs `continuation` on `pool` once every dependency has resolved,
/// passing copies of their values in order. A failed dependency skips the
/// continuation and its error propagates.
///
/// # Panics
/// If `deps` is empty.
pub fn dataflow<D, T, F>(pool: &Pool, deps: Vec<TaskFuture<D>>, continuation: F) -> TaskFuture<T>
where
    D: Clone + Send + Sync + 'static,
    T: Send + Sync + 'static,
    F: FnOnce(Vec<D>) -> TaskResult<T> + Send + 'static,
{
    assert!(!deps.is_empty(), "dataflow needs at least one dependency");
    let (p, fut) = Promise::new();
    let pool = pool.clone();
    when_all(deps).on_complete(move |r| match r {
        Ok(values) => {
            let values = values.clone();
            pool.execute(move || p.set(catch(move || continuation(values))));
        }
        Err(e) => p.set(Err(e.clone())),
    });
    fut
}
