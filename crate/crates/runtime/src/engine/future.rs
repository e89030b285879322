//! Shareable, resolve-once futures with blocking and callback consumers.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use resilience_core::TaskError;

use super::pool;

pub type TaskResult<T> = Result<T, TaskError>;

type Callback<T> = Box<dyn FnOnce(&TaskResult<T>) + Send>;

enum State<T> {
    Pending(Vec<Callback<T>>),
    Ready(Arc<TaskResult<T>>),
}

struct Shared<T> {
    state: Mutex<State<T>>,
    ready: Condvar,
}

/// Handle to a pending or completed task outcome.
///
/// Cloning shares the same outcome. It resolves exactly once; every consumer
/// observes the same value.
pub struct TaskFuture<T> {
    shared: Arc<Shared<T>>,
}

impl<T> Clone for TaskFuture<T> {
    fn clone(&self) -> Self {
        TaskFuture {
            shared: Arc::clone(&self.shared),
        }
    }
}

impl<T> std::fmt::Debug for TaskFuture<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TaskFuture")
            .field("ready", &self.is_ready())
            .finish()
    }
}

/// Write side of a [`TaskFuture`]. Dropping it unset resolves the future
/// with an error so no consumer waits forever.
pub struct Promise<T> {
    shared: Option<Arc<Shared<T>>>,
}

impl<T> Promise<T> {
    pub fn new() -> (Promise<T>, TaskFuture<T>) {
        let shared = Arc::new(Shared {
            state: Mutex::new(State::Pending(Vec::new())),
            ready: Condvar::new(),
        });
        (
            Promise {
                shared: Some(Arc::clone(&shared)),
            },
            TaskFuture { shared },
        )
    }

    pub fn set(mut self, result: TaskResult<T>) {
        let shared = self.shared.take().expect("promise already consumed");
        resolve(&shared, result);
    }
}

impl<T> Drop for Promise<T> {
    fn drop(&mut self) {
        if let Some(shared) = self.shared.take() {
            resolve(&shared, Err(TaskError::Panicked("promise dropped unresolved".into())));
        }
    }
}

fn resolve<T>(shared: &Shared<T>, result: TaskResult<T>) {
    let result = Arc::new(result);
    let callbacks = {
        let mut state = shared.state.lock().unwrap();
        match std::mem::replace(&mut *state, State::Ready(Arc::clone(&result))) {
            State::Pending(cbs) => cbs,
            State::Ready(_) => unreachable!("future resolved twice"),
        }
    };
    shared.ready.notify_all();
    for cb in callbacks {
        cb(&result);
    }
}

impl<T> TaskFuture<T> {
    pub fn is_ready(&self) -> bool {
        matches!(*self.shared.state.lock().unwrap(), State::Ready(_))
    }

    /// Runs `f` once the outcome is known: inline if it already is, otherwise
    /// on the thread that resolves the future.
    pub fn on_complete(&self, f: impl FnOnce(&TaskResult<T>) + Send + 'static) {
        let mut state = self.shared.state.lock().unwrap();
        match &mut *state {
            State::Pending(cbs) => cbs.push(Box::new(f)),
            State::Ready(r) => {
                let r = Arc::clone(r);
                drop(state);
                f(&r);
            }
        }
    }

    /// Blocks until resolved. On a pool worker this keeps running queued
    /// jobs of that pool while it waits.
    pub fn wait(&self) {
        loop {
            if self.is_ready() {
                return;
            }
            if pool::help_once() {
                continue;
            }
            let state = self.shared.state.lock().unwrap();
            if matches!(*state, State::Ready(_)) {
                return;
            }
            let wait = if pool::on_worker() {
                Duration::from_micros(50)
            } else {
                Duration::from_millis(50)
            };
            let _ = self.shared.ready.wait_timeout(state, wait).unwrap();
        }
    }

    pub fn inspect<R>(&self, f: impl FnOnce(&TaskResult<T>) -> R) -> R {
        self.wait();
        let r = match &*self.shared.state.lock().unwrap() {
            State::Ready(r) => Arc::clone(r),
            State::Pending(_) => unreachable!(),
        };
        f(&r)
    }

    /// `Some(true)` if resolved successfully, `Some(false)` if resolved with an error.
    pub fn succeeded(&self) -> Option<bool> {
        match &*self.shared.state.lock().unwrap() {
            State::Ready(r) => Some(r.is_ok()),
            State::Pending(_) => None,
        }
    }
}

impl<T: Clone> TaskFuture<T> {
    /// Blocking await. Idempotent: every call returns the same outcome.
    pub fn get(&self) -> TaskResult<T> {
        self.inspect(Clone::clone)
    }

    pub fn try_get(&self) -> Option<TaskResult<T>> {
        match &*self.shared.state.lock().unwrap() {
            State::Ready(r) => Some((**r).clone()),
            State::Pending(_) => None,
        }
    }
}

impl<T: Send + Sync + 'static> TaskFuture<T> {
    /// Inline continuation on the resolving thread; keep `f` cheap.
    pub fn map<U: Send + Sync + 'static>(
        &self,
        f: impl FnOnce(&TaskResult<T>) -> TaskResult<U> + Send + 'static,
    ) -> TaskFuture<U> {
        let (p, fut) = Promise::new();
        self.on_complete(move |r| p.set(f(r)));
        fut
    }
}

pub fn ready<T>(value: T) -> TaskFuture<T> {
    let (p, f) = Promise::new();
    p.set(Ok(value));
    f
}

pub fn failed<T>(error: TaskError) -> TaskFuture<T> {
    let (p, f) = Promise::new();
    p.set(Err(error));
    f
}

/// Resolves with every dependency's value in order, or with the first error
/// to arrive.
pub fn when_all<T: Clone + Send + Sync + 'static>(deps: Vec<TaskFuture<T>>) -> TaskFuture<Vec<T>> {
    let n = deps.len();
    if n == 0 {
        return ready(Vec::new());
    }
    struct Join<T> {
        slots: Vec<Option<T>>,
        remaining: usize,
        promise: Option<Promise<Vec<T>>>,
    }
    let (p, fut) = Promise::new();
    let join = Arc::new(Mutex::new(Join {
        slots: (0..n).map(|_| None).collect(),
        remaining: n,
        promise: Some(p),
    }));
    for (i, dep) in deps.into_iter().enumerate() {
        let join = Arc::clone(&join);
        dep.on_complete(move |r| {
            let mut j = join.lock().unwrap();
            match r {
                Ok(v) => {
                    j.slots[i] = Some(v.clone());
                    j.remaining -= 1;
                    if j.remaining == 0 {
                        if let Some(p) = j.promise.take() {
                            let values = j.slots.iter_mut().map(|s| s.take().unwrap()).collect();
                            drop(j);
                            p.set(Ok(values));
                        }
                    }
                }
                Err(e) => {
                    if let Some(p) = j.promise.take() {
                        drop(j);
                        p.set(Err(e.clone()));
                    }
                }
            }
        });
    }
    fut
}
