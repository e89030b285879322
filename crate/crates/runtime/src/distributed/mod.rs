//! Replay and replicate across localities. The calling locality drives the
//! protocol: it picks targets, validates results and votes, all on its own
//! pool. Remote targets only run the action.

use std::sync::{Arc, Mutex};

use resilience_core::{LocalityId, ResilienceError, TaskError, Value, Wire};

use crate::engine::{catch, current_pool_tag, Promise, TaskFuture, TaskResult};
use crate::local::{Validate, Vote};
use crate::locality::{Locality, SimMetrics, WireArgs};

pub use resilience_core::make_backup_lists;

/// Runs `f` on the caller's pool, hopping there if needed.
fn on_caller(caller: &Locality, f: impl FnOnce() + Send + 'static) {
    if current_pool_tag() == Some(caller.rank()) {
        f();
    } else {
        caller.pool().execute(f);
    }
}

fn accept<R: Wire>(
    caller: &Locality,
    rank: LocalityId,
    outcome: &TaskResult<Value>,
    validate: Option<&Validate<R>>,
) -> Result<R, Option<TaskError>> {
    let value = match outcome {
        Ok(v) => R::from_value(v.clone()).map_err(|e| Some(e.into()))?,
        Err(e) => return Err(Some(e.clone())),
    };
    if let Some(validate) = validate {
        if !validate(&value) {
            SimMetrics::add(&caller.metrics().validation_failures, 1);
            return Err(None);
        }
    }
    caller.metrics().record_success(rank);
    Ok(value)
}

struct ReplayRun<R> {
    caller: Locality,
    ids: Vec<LocalityId>,
    action: String,
    args: Value,
    validate: Option<Validate<R>>,
}

impl<R: Wire + Send + Sync + 'static> ReplayRun<R> {
    fn step(self: Arc<Self>, i: usize, promise: Promise<R>) {
        let fut = self.caller.invoke_value(self.ids[i], &self.action, self.args.clone());
        fut.on_complete(move |outcome| {
            let outcome = outcome.clone();
            let run = Arc::clone(&self);
            on_caller(&self.caller, move || run.settle(i, outcome, promise));
        });
    }

    fn settle(self: Arc<Self>, i: usize, outcome: TaskResult<Value>, promise: Promise<R>) {
        let verdict = catch(|| Ok(accept(&self.caller, self.ids[i], &outcome, self.validate.as_ref())))
            .unwrap_or_else(|e| Err(Some(e)));
        let last_failure = match verdict {
            Ok(v) => return promise.set(Ok(v)),
            Err(f) => f,
        };
        if i + 1 < self.ids.len() {
            SimMetrics::add(&self.caller.metrics().remote_fallbacks, 1);
            self.step(i + 1, promise);
        } else {
            let attempts = self.ids.len() as u32;
            let err = match last_failure {
                Some(e) => ResilienceError::exhausted_with_exception(e, attempts),
                None => ResilienceError::exhausted_with_invalid_result(attempts),
            };
            promise.set(Err(err.into()));
        }
    }
}

/// Tries `action` on `ids[0]`, then `ids[1]`, and so on, until one returns a
/// result that decodes and passes `validate`. Ranks may repeat.
///
/// # Panics
/// If `ids` is empty.
pub fn distributed_replay_with<A, R>(
    caller: &Locality,
    ids: &[LocalityId],
    validate: Option<Validate<R>>,
    action: &str,
    args: &A,
) -> TaskFuture<R>
where
    A: WireArgs,
    R: Wire + Send + Sync + 'static,
{
    assert!(!ids.is_empty(), "locality list must not be empty");
    let run = Arc::new(ReplayRun {
        caller: caller.clone(),
        ids: ids.to_vec(),
        action: action.to_string(),
        args: args.to_value(),
        validate,
    });
    let (p, fut) = Promise::new();
    run.step(0, p);
    fut
}

pub fn distributed_replay<A, R>(caller: &Locality, ids: &[LocalityId], action: &str, args: &A) -> TaskFuture<R>
where
    A: WireArgs,
    R: Wire + Send + Sync + 'static,
{
    distributed_replay_with(caller, ids, None, action, args)
}

pub fn distributed_replay_validate<A, R, V>(
    caller: &Locality,
    ids: &[LocalityId],
    validate: V,
    action: &str,
    args: &A,
) -> TaskFuture<R>
where
    A: WireArgs,
    R: Wire + Send + Sync + 'static,
    V: Fn(&R) -> bool + Send + Sync + 'static,
{
    distributed_replay_with(caller, ids, Some(Arc::new(validate)), action, args)
}

struct Fanout<R> {
    caller: Locality,
    ids: Vec<LocalityId>,
    validate: Option<Validate<R>>,
    vote: Option<Vote<R>>,
    state: Mutex<FanoutState<R>>,
}

struct FanoutState<R> {
    accepted: Vec<Option<R>>,
    done: usize,
    promise: Option<Promise<R>>,
}

impl<R: Wire + Send + Sync + 'static> Fanout<R> {
    fn settle(&self, i: usize, outcome: TaskResult<Value>) {
        let accepted = catch(|| Ok(accept(&self.caller, self.ids[i], &outcome, self.validate.as_ref()).ok()))
            .unwrap_or(None);
        let n = self.ids.len();
        let mut st = self.state.lock().unwrap();
        st.done += 1;
        let finish = |p: Promise<R>, r: TaskResult<R>| p.set(r);
        match &self.vote {
            None => {
                if let Some(v) = accepted {
                    if let Some(p) = st.promise.take() {
                        drop(st);
                        return finish(p, Ok(v));
                    }
                }
                if st.done == n {
                    if let Some(p) = st.promise.take() {
                        drop(st);
                        finish(p, Err(ResilienceError::no_valid_replica(n as u32).into()));
                    }
                }
            }
            Some(vote) => {
                st.accepted[i] = accepted;
                if st.done == n {
                    let candidates: Vec<R> = st.accepted.iter_mut().filter_map(Option::take).collect();
                    let p = st.promise.take().expect("vote resolves once");
                    drop(st);
                    if candidates.is_empty() {
                        finish(p, Err(ResilienceError::no_valid_replica(n as u32).into()));
                    } else {
                        let vote = Arc::clone(vote);
                        finish(p, catch(move || Ok(vote(candidates))));
                    }
                }
            }
        }
    }
}

/// Invokes `action` on every rank in `ids` at once. Without `vote` the first
/// accepted result wins; with it, all replies are awaited and the accepted
/// ones are voted on in list order. Remote replicas are never cancelled.
///
/// # Panics
/// If `ids` is empty.
pub fn distributed_replicate_with<A, R>(
    caller: &Locality,
    ids: &[LocalityId],
    validate: Option<Validate<R>>,
    vote: Option<Vote<R>>,
    action: &str,
    args: &A,
) -> TaskFuture<R>
where
    A: WireArgs,
    R: Wire + Send + Sync + 'static,
{
    assert!(!ids.is_empty(), "locality list must not be empty");
    let (p, fut) = Promise::new();
    let fan = Arc::new(Fanout {
        caller: caller.clone(),
        ids: ids.to_vec(),
        validate,
        vote,
        state: Mutex::new(FanoutState {
            accepted: ids.iter().map(|_| None).collect(),
            done: 0,
            promise: Some(p),
        }),
    });
    let args = args.to_value();
    for (i, &rank) in ids.iter().enumerate() {
        let fan = Arc::clone(&fan);
        caller.invoke_value(rank, action, args.clone()).on_complete(move |outcome| {
            let outcome = outcome.clone();
            let caller = fan.caller.clone();
            on_caller(&caller, move || fan.settle(i, outcome));
        });
    }
    fut
}

pub fn distributed_replicate<A, R>(caller: &Locality, ids: &[LocalityId], action: &str, args: &A) -> TaskFuture<R>
where
    A: WireArgs,
    R: Wire + Send + Sync + 'static,
{
    distributed_replicate_with(caller, ids, None, None, action, args)
}

pub fn distributed_replicate_validate<A, R, V>(
    caller: &Locality,
    ids: &[LocalityId],
    validate: V,
    action: &str,
    args: &A,
) -> TaskFuture<R>
where
    A: WireArgs,
    R: Wire + Send + Sync + 'static,
    V: Fn(&R) -> bool + Send + Sync + 'static,
{
    distributed_replicate_with(caller, ids, Some(Arc::new(validate)), None, action, args)
}

pub fn distributed_replicate_vote<A, R, W>(
    caller: &Locality,
    ids: &[LocalityId],
    vote: W,
    action: &str,
    args: &A,
) -> TaskFuture<R>
where
    A: WireArgs,
    R: Wire + Send + Sync + 'static,
    W: Fn(Vec<R>) -> R + Send + Sync + 'static,
{
    distributed_replicate_with(caller, ids, None, Some(Arc::new(vote)), action, args)
}

pub fn distributed_replicate_vote_validate<A, R, W, V>(
    caller: &Locality,
    ids: &[LocalityId],
    vote: W,
    validate: V,
    action: &str,
    args: &A,
) -> TaskFuture<R>
where
    A: WireArgs,
    R: Wire + Send + Sync + 'static,
    W: Fn(Vec<R>) -> R + Send + Sync + 'static,
    V: Fn(&R) -> bool + Send + Sync + 'static,
{
    distributed_replicate_with(caller, ids, Some(Arc::new(validate)), Some(Arc::new(vote)), action, args)
}
