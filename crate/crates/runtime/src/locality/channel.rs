use std::collections::VecDeque;
use std::marker::PhantomData;
use std::sync::{Arc, Mutex};

use resilience_core::{LocalityId, TaskError, Wire};

use super::transport::Lane;
use super::{SimInner, SimMetrics};
use crate::engine::{failed, ready, Promise, TaskFuture};

enum Message {
    Data(Vec<u8>),
    Close,
}

struct Buffer {
    queue: VecDeque<Vec<u8>>,
    waiters: VecDeque<Promise<Vec<u8>>>,
    closed: bool,
}

struct ChannelInner {
    from: LocalityId,
    to: LocalityId,
    buffer: Mutex<Buffer>,
    lane: Lane,
}

impl ChannelInner {
    fn arrive(&self, msg: Message) {
        let mut b = self.buffer.lock().unwrap();
        match msg {
            Message::Data(bytes) => match b.waiters.pop_front() {
                Some(p) => {
                    drop(b);
                    p.set(Ok(bytes));
                }
                None => b.queue.push_back(bytes),
            },
            Message::Close => {
                b.closed = true;
                let waiters: Vec<_> = b.waiters.drain(..).collect();
                drop(b);
                for w in waiters {
                    w.set(Err(TaskError::ChannelClosed));
                }
            }
        }
    }
}

/// Typed FIFO link from one locality to another. Every value is encoded at
/// the sender and decoded at the receiver.
pub struct Channel<T> {
    sim: Arc<SimInner>,
    inner: Arc<ChannelInner>,
    _ty: PhantomData<fn(T) -> T>,
}

impl<T> Clone for Channel<T> {
    fn clone(&self) -> Self {
        Channel {
            sim: Arc::clone(&self.sim),
            inner: Arc::clone(&self.inner),
            _ty: PhantomData,
        }
    }
}

impl<T: Wire + Clone + Send + Sync + 'static> Channel<T> {
    pub(crate) fn new(sim: Arc<SimInner>, from: LocalityId, to: LocalityId) -> Self {
        Channel {
            sim,
            inner: Arc::new(ChannelInner {
                from,
                to,
                buffer: Mutex::new(Buffer {
                    queue: VecDeque::new(),
                    waiters: VecDeque::new(),
                    closed: false,
                }),
                lane: Lane::default(),
            }),
            _ty: PhantomData,
        }
    }

    pub fn from_rank(&self) -> LocalityId {
        self.inner.from
    }

    pub fn to_rank(&self) -> LocalityId {
        self.inner.to
    }

    pub fn send(&self, value: &T) {
        let bytes = value.to_bytes();
        SimMetrics::add(&self.sim.metrics.channel_messages, 1);
        SimMetrics::add(&self.sim.metrics.bytes_moved, bytes.len() as u64);
        let inner = Arc::clone(&self.inner);
        let len = bytes.len();
        self.sim
            .transport
            .send(len, Some(&self.inner.lane), move || inner.arrive(Message::Data(bytes)));
    }

    /// No further sends. Messages already in flight are still delivered.
    pub fn close(&self) {
        let inner = Arc::clone(&self.inner);
        self.sim
            .transport
            .send(0, Some(&self.inner.lane), move || inner.arrive(Message::Close));
    }

    /// Resolves with the next message, or `ChannelClosed` once the channel is
    /// closed and drained.
    pub fn recv(&self) -> TaskFuture<T> {
        let mut b = self.inner.buffer.lock().unwrap();
        if let Some(bytes) = b.queue.pop_front() {
            drop(b);
            return match T::from_bytes(&bytes) {
                Ok(v) => ready(v),
                Err(e) => failed(e.into()),
            };
        }
        if b.closed {
            return failed(TaskError::ChannelClosed);
        }
        let (p, raw) = Promise::new();
        b.waiters.push_back(p);
        drop(b);
        raw.map(|r| match r {
            Ok(bytes) => T::from_bytes(bytes).map_err(Into::into),
            Err(e) => Err(e.clone()),
        })
    }
}
