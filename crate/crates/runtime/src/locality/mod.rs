//! In-process simulation of several localities. Each locality owns its own
//! worker pool; everything that crosses a locality boundary is serialized
//! through the wire codec and carried by a (optionally delayed) transport.

mod channel;
mod metrics;
mod transport;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use resilience_core::{CodecError, Envelope, LocalityId, TaskError, Value, Wire};

pub use channel::Channel;
pub use metrics::{SimMetrics, SimStats};
pub use transport::NetConfig;

use crate::engine::{catch, failed, ready, Pool, PoolConfig, PoolError, Promise, TaskFuture, TaskResult};
use transport::{Lane, Transport};

/// Action name carried by a successful reply; payload is `(result,)`.
pub const REPLY_OK: &str = "$ok";
/// Action name carried by a failed reply; payload is `(error,)`.
pub const REPLY_ERR: &str = "$err";

/// Error code used when a request names a rank outside the simulation.
pub const NO_SUCH_LOCALITY: u32 = 0x4c00;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("a simulation needs at least one locality")]
    NoLocalities,
    #[error("action {0:?} registered twice")]
    DuplicateAction(String),
    #[error("action names starting with '$' are reserved")]
    ReservedName,
    #[error("network costs must be finite and non-negative")]
    BadNetConfig,
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error("rank {0} out of range")]
    BadRank(LocalityId),
}

/// Marker for argument types: the payload of a request is always a tuple.
pub trait WireArgs: Wire {}

impl WireArgs for () {}
macro_rules! wire_args {
    ($($name:ident),+) => {
        impl<$($name: Wire),+> WireArgs for ($($name,)+) {}
    };
}
wire_args!(A);
wire_args!(A, B);
wire_args!(A, B, C);
wire_args!(A, B, C, D);
wire_args!(A, B, C, D, E);
wire_args!(A, B, C, D, E, F);

type Handler = Arc<dyn Fn(&Locality, Value) -> TaskFuture<Value> + Send + Sync>;

pub struct SimulationBuilder {
    count: usize,
    pool: PoolConfig,
    net: NetConfig,
    actions: HashMap<String, Handler>,
}

/// Starts building a simulation of `count` localities, each with a pool
/// configured like `pool` (its tag is replaced by the rank).
pub fn spawn_localities(count: usize, pool: PoolConfig, net: NetConfig) -> Result<SimulationBuilder, SimError> {
    if count == 0 {
        return Err(SimError::NoLocalities);
    }
    if !net.is_valid() {
        return Err(SimError::BadNetConfig);
    }
    Ok(SimulationBuilder {
        count,
        pool,
        net,
        actions: HashMap::new(),
    })
}

impl SimulationBuilder {
    fn insert(&mut self, name: &str, handler: Handler) -> Result<(), SimError> {
        if name.starts_with('$') {
            return Err(SimError::ReservedName);
        }
        if self.actions.contains_key(name) {
            return Err(SimError::DuplicateAction(name.to_string()));
        }
        self.actions.insert(name.to_string(), handler);
        Ok(())
    }

    /// Registers a synchronous action. The handler runs on a worker of the
    /// target locality with freshly decoded arguments.
    pub fn register_action<A, R, F>(&mut self, name: &str, handler: F) -> Result<(), SimError>
    where
        A: WireArgs,
        R: Wire,
        F: Fn(&Locality, A) -> TaskResult<R> + Send + Sync + 'static,
    {
        let handler: Handler = Arc::new(move |loc: &Locality, v: Value| {
            match catch(|| {
                let args = A::from_value(v)?;
                handler(loc, args).map(|r| r.to_value())
            }) {
                Ok(v) => ready(v),
                Err(e) => failed(e),
            }
        });
        self.insert(name, handler)
    }

    /// Registers an action whose handler returns a future, e.g. one that
    /// wraps local resilience on the target's pool.
    pub fn register_async_action<A, R, F>(&mut self, name: &str, handler: F) -> Result<(), SimError>
    where
        A: WireArgs,
        R: Wire + Clone + Send + Sync + 'static,
        F: Fn(&Locality, A) -> TaskFuture<R> + Send + Sync + 'static,
    {
        let handler: Handler = Arc::new(move |loc: &Locality, v: Value| {
            let started = catch(|| {
                let args = A::from_value(v)?;
                Ok(handler(loc, args))
            });
            match started {
                Ok(fut) => fut.map(|r| r.as_ref().map(Wire::to_value).map_err(Clone::clone)),
                Err(e) => failed(e),
            }
        });
        self.insert(name, handler)
    }

    pub fn start(self) -> Result<Simulation, SimError> {
        let pools = (0..self.count)
            .map(|rank| {
                let config = PoolConfig::new(self.pool.worker_count())?.with_tag(rank as u32);
                Ok(Pool::new(config))
            })
            .collect::<Result<Vec<_>, PoolError>>()?;
        let inner = Arc::new(SimInner {
            metrics: SimMetrics::new(self.count),
            transport: Transport::new(self.net),
            pools,
            actions: self.actions,
            pending: Mutex::new(HashMap::new()),
            next_request: AtomicU64::new(1),
            lanes: (0..self.count * self.count).map(|_| Lane::default()).collect(),
        });
        Ok(Simulation { inner })
    }
}

pub(crate) struct SimInner {
    pub(crate) metrics: SimMetrics,
    pub(crate) transport: Transport,
    pools: Vec<Pool>,
    actions: HashMap<String, Handler>,
    pending: Mutex<HashMap<u64, Promise<Value>>>,
    next_request: AtomicU64,
    lanes: Vec<Lane>,
}

impl SimInner {
    fn lane(&self, from: LocalityId, to: LocalityId) -> &Lane {
        &self.lanes[from as usize * self.pools.len() + to as usize]
    }
}

/// Owner of a running simulation. Dropping it shuts everything down.
pub struct Simulation {
    inner: Arc<SimInner>,
}

impl Simulation {
    pub fn locality_count(&self) -> usize {
        self.inner.pools.len()
    }

    pub fn locality(&self, rank: LocalityId) -> Locality {
        assert!((rank as usize) < self.locality_count(), "rank {rank} out of range");
        Locality {
            sim: Arc::clone(&self.inner),
            rank,
        }
    }

    pub fn localities(&self) -> Vec<Locality> {
        (0..self.locality_count() as u32).map(|r| self.locality(r)).collect()
    }

    pub fn channel<T: Wire + Clone + Send + Sync + 'static>(
        &self,
        from: LocalityId,
        to: LocalityId,
    ) -> Result<Channel<T>, SimError> {
        for r in [from, to] {
            if r as usize >= self.locality_count() {
                return Err(SimError::BadRank(r));
            }
        }
        Ok(Channel::new(Arc::clone(&self.inner), from, to))
    }

    pub fn metrics(&self) -> &SimMetrics {
        &self.inner.metrics
    }

    pub fn stats(&self) -> SimStats {
        self.inner.metrics.snapshot()
    }

    pub fn net_config(&self) -> NetConfig {
        self.inner.transport.config()
    }

    /// Waits for queued work on every locality, then stops pools and the
    /// transport.
    pub fn shutdown(&self) {
        for p in &self.inner.pools {
            p.shutdown();
        }
        self.inner.transport.stop();
    }
}

impl Drop for Simulation {
    fn drop(&mut self) {
        self.shutdown();
        self.inner.pending.lock().unwrap().clear();
    }
}

/// Handle to one locality; cheap to clone and send between threads.
#[derive(Clone)]
pub struct Locality {
    sim: Arc<SimInner>,
    rank: LocalityId,
}

impl std::fmt::Debug for Locality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Locality").field("rank", &self.rank).finish()
    }
}

impl Locality {
    pub fn rank(&self) -> LocalityId {
        self.rank
    }

    pub fn locality_count(&self) -> usize {
        self.sim.pools.len()
    }

    pub fn pool(&self) -> &Pool {
        &self.sim.pools[self.rank as usize]
    }

    pub fn metrics(&self) -> &SimMetrics {
        &self.sim.metrics
    }

    fn peer(&self, rank: LocalityId) -> Locality {
        Locality {
            sim: Arc::clone(&self.sim),
            rank,
        }
    }

    /// Invokes `action` on `target`. Arguments are encoded here, the handler
    /// sees a decoded copy, and the result is decoded again on this locality.
    /// The returned future resolves on this locality's pool.
    pub fn remote_invoke<A, R>(&self, target: LocalityId, action: &str, args: &A) -> TaskFuture<R>
    where
        A: WireArgs,
        R: Wire + Send + Sync + 'static,
    {
        self.invoke_value(target, action, args.to_value())
            .map(|r| match r {
                Ok(v) => R::from_value(v.clone()).map_err(Into::into),
                Err(e) => Err(e.clone()),
            })
    }

    pub fn invoke_value(&self, target: LocalityId, action: &str, args: Value) -> TaskFuture<Value> {
        if target as usize >= self.locality_count() {
            return failed(TaskError::failed(NO_SUCH_LOCALITY, format!("no locality {target}")));
        }
        let sim = &self.sim;
        let id = sim.next_request.fetch_add(1, Ordering::Relaxed);
        let bytes = match Envelope::new(id, self.rank, action, &args).encode() {
            Ok(b) => b,
            Err(e) => return failed(e.into()),
        };
        let (p, fut) = Promise::new();
        sim.pending.lock().unwrap().insert(id, p);
        SimMetrics::add(&sim.metrics.remote_invocations, 1);
        SimMetrics::add(&sim.metrics.envelopes_sent, 1);
        SimMetrics::add(&sim.metrics.bytes_moved, bytes.len() as u64);
        let dest = self.peer(target);
        sim.transport
            .send(bytes.len(), Some(sim.lane(self.rank, target)), move || dest.on_request(bytes));
        fut
    }

    fn on_request(self, bytes: Vec<u8>) {
        let pool = self.pool().clone();
        pool.execute(move || {
            SimMetrics::add(&self.sim.metrics.envelopes_delivered, 1);
            let env = match Envelope::decode(&bytes) {
                Ok(e) => e,
                // Undecodable requests cannot be answered; their origin is unknown.
                Err(_) => return,
            };
            let (id, origin) = (env.request_id, env.origin);
            let outcome = match self.sim.actions.get(&env.action) {
                None => failed(TaskError::UnknownAction(env.action.clone())),
                Some(handler) => match env.payload_value() {
                    Ok(args) => handler(&self, args),
                    Err(e) => failed(e.into()),
                },
            };
            let me = self.clone();
            outcome.on_complete(move |r| me.reply(origin, id, r));
        });
    }

    fn reply(&self, origin: LocalityId, id: u64, result: &TaskResult<Value>) {
        let (name, payload) = match result {
            Ok(v) => (REPLY_OK, Value::Tuple(vec![v.clone()])),
            Err(e) => (REPLY_ERR, Value::Tuple(vec![e.to_value()])),
        };
        let bytes = match Envelope::new(id, self.rank, name, &payload).encode() {
            Ok(b) => b,
            Err(e) => Envelope::new(id, self.rank, REPLY_ERR, &Value::Tuple(vec![TaskError::from(e).to_value()]))
                .encode()
                .expect("error reply fits the envelope"),
        };
        SimMetrics::add(&self.sim.metrics.bytes_moved, bytes.len() as u64);
        let dest = self.peer(origin);
        self.sim
            .transport
            .send(bytes.len(), Some(self.sim.lane(self.rank, origin)), move || dest.on_reply(bytes));
    }

    fn on_reply(self, bytes: Vec<u8>) {
        let pool = self.pool().clone();
        pool.execute(move || {
            let Ok(env) = Envelope::decode(&bytes) else {
                return;
            };
            SimMetrics::add(&self.sim.metrics.replies, 1);
            let Some(promise) = self.sim.pending.lock().unwrap().remove(&env.request_id) else {
                return;
            };
            let result = decode_reply(&env);
            if result.is_err() {
                SimMetrics::add(&self.sim.metrics.remote_failures, 1);
            }
            promise.set(result);
        });
    }
}

fn decode_reply(env: &Envelope) -> TaskResult<Value> {
    let single = |v: Value| -> Result<Value, CodecError> {
        match v {
            Value::Tuple(mut xs) if xs.len() == 1 => Ok(xs.pop().unwrap()),
            _ => Err(CodecError::TypeMismatch { expected: "1-tuple reply" }),
        }
    };
    let v = single(env.payload_value()?)?;
    match env.action.as_str() {
        REPLY_OK => Ok(v),
        REPLY_ERR => Err(TaskError::from_value(v)?),
        _ => Err(CodecError::TypeMismatch { expected: "reply envelope" }.into()),
    }
}
