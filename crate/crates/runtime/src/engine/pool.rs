use std::cell::{Cell, RefCell};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

use crossbeam_channel::{Receiver, Sender};
use resilience_core::TaskError;

use super::future::{Promise, TaskFuture, TaskResult};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PoolError {
    #[error("worker_count must be at least 1")]
    NoWorkers,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolConfig {
    worker_count: usize,
    tag: Option<u32>,
}

impl PoolConfig {
    pub fn new(worker_count: usize) -> Result<Self, PoolError> {
        if worker_count == 0 {
            return Err(PoolError::NoWorkers);
        }
        Ok(PoolConfig {
            worker_count,
            tag: None,
        })
    }

    /// Tag visible to tasks through [`current_pool_tag`]; localities use their rank.
    pub fn with_tag(mut self, tag: u32) -> Self {
        self.tag = Some(tag);
        self
    }

    pub fn worker_count(&self) -> usize {
        self.worker_count
    }

    pub fn tag(&self) -> Option<u32> {
        self.tag
    }
}

enum Job {
    Run(Box<dyn FnOnce() + Send>),
    Stop,
}

/// Counters shared by the engine and the resilience combinators.
#[derive(Debug, Default)]
pub struct PoolCounters {
    pub tasks_executed: AtomicU64,
    pub attempts: AtomicU64,
    pub replays: AtomicU64,
    pub replicas: AtomicU64,
    pub task_failures: AtomicU64,
    pub validation_failures: AtomicU64,
    pub exhausted: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PoolStats {
    /// Jobs run by workers, including combinator bookkeeping jobs.
    pub tasks_executed: u64,
    /// Task bodies run by replay and replicate combinators.
    pub attempts: u64,
    /// Attempts beyond the first of a replay.
    pub replays: u64,
    /// Replica executions launched.
    pub replicas: u64,
    /// Attempts that raised an error.
    pub task_failures: u64,
    /// Attempts whose result the validator rejected.
    pub validation_failures: u64,
    /// Invocations that gave up.
    pub exhausted: u64,
}

impl PoolCounters {
    pub fn snapshot(&self) -> PoolStats {
        let l = |a: &AtomicU64| a.load(Ordering::Relaxed);
        PoolStats {
            tasks_executed: l(&self.tasks_executed),
            attempts: l(&self.attempts),
            replays: l(&self.replays),
            replicas: l(&self.replicas),
            task_failures: l(&self.task_failures),
            validation_failures: l(&self.validation_failures),
            exhausted: l(&self.exhausted),
        }
    }

    pub(crate) fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::Relaxed);
    }
}

struct Shared {
    tx: Sender<Job>,
    rx: Receiver<Job>,
    pending: Mutex<usize>,
    idle: Condvar,
    counters: PoolCounters,
    tag: Option<u32>,
    worker_count: usize,
    workers: Mutex<Vec<JoinHandle<()>>>,
    closed: Mutex<bool>,
}

/// Fixed-size worker pool. Cheap to clone; all clones drive the same workers.
/// When the last handle is dropped, workers finish the queue and exit.
#[derive(Clone)]
pub struct Pool {
    shared: Arc<Shared>,
    _guard: Arc<StopOnDrop>,
}

struct StopOnDrop(Arc<Shared>);

impl Drop for StopOnDrop {
    fn drop(&mut self) {
        let mut closed = self.0.closed.lock().unwrap();
        if !*closed {
            *closed = true;
            for _ in 0..self.0.worker_count {
                let _ = self.0.tx.send(Job::Stop);
            }
        }
    }
}

impl std::fmt::Debug for Pool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pool")
            .field("workers", &self.shared.worker_count)
            .field("tag", &self.shared.tag)
            .finish()
    }
}

thread_local! {
    static WORKER: RefCell<Option<Arc<Shared>>> = const { RefCell::new(None) };
    static ATTEMPT: Cell<u32> = const { Cell::new(1) };
}

/// 1-based attempt (replay) or replica number of the task body running on
/// this thread; 1 outside resilience combinators.
pub fn current_attempt() -> u32 {
    ATTEMPT.with(Cell::get)
}

pub(crate) fn with_attempt<R>(attempt: u32, f: impl FnOnce() -> R) -> R {
    let prev = ATTEMPT.with(|a| a.replace(attempt));
    let r = f();
    ATTEMPT.with(|a| a.set(prev));
    r
}

/// Tag of the pool whose worker is running the caller, if any.
pub fn current_pool_tag() -> Option<u32> {
    WORKER.with(|w| w.borrow().as_ref().and_then(|s| s.tag))
}

pub(crate) fn on_worker() -> bool {
    WORKER.with(|w| w.borrow().is_some())
}

/// Runs one queued job of the current worker's pool. Returns false when not
/// on a worker or nothing is queued.
pub(crate) fn help_once() -> bool {
    let Some(shared) = WORKER.with(|w| w.borrow().clone()) else {
        return false;
    };
    match shared.rx.try_recv() {
        Ok(Job::Run(job)) => {
            run_job(&shared, job);
            true
        }
        Ok(Job::Stop) => {
            let _ = shared.tx.send(Job::Stop);
            false
        }
        Err(_) => false,
    }
}

fn run_job(shared: &Shared, job: Box<dyn FnOnce() + Send>) {
    let prev = ATTEMPT.with(|a| a.replace(1));
    // Job bodies catch task panics themselves; this keeps the worker alive
    // if internal bookkeeping panics.
    let _ = catch_unwind(AssertUnwindSafe(job));
    ATTEMPT.with(|a| a.set(prev));
    PoolCounters::bump(&shared.counters.tasks_executed);
    let mut pending = shared.pending.lock().unwrap();
    *pending -= 1;
    if *pending == 0 {
        shared.idle.notify_all();
    }
}

fn worker_loop(shared: Arc<Shared>) {
    WORKER.with(|w| *w.borrow_mut() = Some(Arc::clone(&shared)));
    while let Ok(job) = shared.rx.recv() {
        match job {
            Job::Run(job) => run_job(&shared, job),
            Job::Stop => break,
        }
    }
    WORKER.with(|w| *w.borrow_mut() = None);
}

pub(crate) fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}

/// Runs `f`, turning a panic into [`TaskError::Panicked`].
pub(crate) fn catch<T>(f: impl FnOnce() -> TaskResult<T>) -> TaskResult<T> {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| Err(TaskError::Panicked(panic_message(&*p))))
}

impl Pool {
    pub fn new(config: PoolConfig) -> Pool {
        let (tx, rx) = crossbeam_channel::unbounded();
        let shared = Arc::new(Shared {
            tx,
            rx,
            pending: Mutex::new(0),
            idle: Condvar::new(),
            counters: PoolCounters::default(),
            tag: config.tag,
            worker_count: config.worker_count,
            workers: Mutex::new(Vec::new()),
            closed: Mutex::new(false),
        });
        let handles = (0..config.worker_count)
            .map(|i| {
                let s = Arc::clone(&shared);
                let name = match config.tag {
                    Some(t) => format!("pool{t}-worker{i}"),
                    None => format!("worker{i}"),
                };
                std::thread::Builder::new()
                    .name(name)
                    .spawn(move || worker_loop(s))
                    .expect("failed to spawn worker thread")
            })
            .collect();
        *shared.workers.lock().unwrap() = handles;
        Pool {
            _guard: Arc::new(StopOnDrop(Arc::clone(&shared))),
            shared,
        }
    }

    pub fn with_workers(worker_count: usize) -> Result<Pool, PoolError> {
        PoolConfig::new(worker_count).map(Pool::new)
    }

    pub fn worker_count(&self) -> usize {
        self.shared.worker_count
    }

    pub fn tag(&self) -> Option<u32> {
        self.shared.tag
    }

    pub fn counters(&self) -> &PoolCounters {
        &self.shared.counters
    }

    pub fn stats(&self) -> PoolStats {
        self.shared.counters.snapshot()
    }

    /// Queues a raw job. Returns false once the pool has shut down.
    pub(crate) fn execute(&self, job: impl FnOnce() + Send + 'static) -> bool {
        if *self.shared.closed.lock().unwrap() {
            return false;
        }
        *self.shared.pending.lock().unwrap() += 1;
        if self.shared.tx.send(Job::Run(Box::new(job))).is_err() {
            *self.shared.pending.lock().unwrap() -= 1;
            return false;
        }
        true
    }

    /// Runs `task` exactly once on some worker. Errors and panics resolve the
    /// future; nothing is raised at submit time.
    pub fn submit<T, F>(&self, task: F) -> TaskFuture<T>
    where
        T: Send + Sync + 'static,
        F: FnOnce() -> TaskResult<T> + Send + 'static,
    {
        let (p, fut) = Promise::new();
        // A rejected job drops its promise, which resolves the future with an error.
        self.execute(move || p.set(catch(task)));
        fut
    }

    /// Waits for every queued and running job, including jobs those jobs
    /// queue, then stops and joins the workers.
    pub fn shutdown(&self) {
        {
            let mut pending = self.shared.pending.lock().unwrap();
            while *pending > 0 {
                pending = self.shared.idle.wait(pending).unwrap();
            }
        }
        {
            let mut closed = self.shared.closed.lock().unwrap();
            if *closed {
                return;
            }
            *closed = true;
        }
        for _ in 0..self.shared.worker_count {
            let _ = self.shared.tx.send(Job::Stop);
        }
        let me = std::thread::current().id();
        let handles = std::mem::take(&mut *self.shared.workers.lock().unwrap());
        for h in handles {
            if h.thread().id() != me {
                let _ = h.join();
            }
        }
    }

    pub fn is_shut_down(&self) -> bool {
        *self.shared.closed.lock().unwrap()
    }
}
