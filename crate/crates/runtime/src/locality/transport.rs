use std::cmp::Ordering as CmpOrdering;
use std::collections::BinaryHeap;
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

/// Simulated network cost. All-zero means instantaneous, inline delivery.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NetConfig {
    /// Fixed cost per message, microseconds.
    pub latency_us: f64,
    /// Additional cost per payload byte, microseconds.
    pub per_byte_us: f64,
}

impl NetConfig {
    pub fn instant() -> Self {
        NetConfig::default()
    }

    pub fn new(latency_us: f64, per_byte_us: f64) -> Self {
        NetConfig {
            latency_us,
            per_byte_us,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.latency_us.is_finite() && self.latency_us >= 0.0 && self.per_byte_us.is_finite() && self.per_byte_us >= 0.0
    }

    pub fn is_instant(&self) -> bool {
        self.latency_us == 0.0 && self.per_byte_us == 0.0
    }

    pub fn delay(&self, bytes: usize) -> Duration {
        Duration::from_secs_f64((self.latency_us + self.per_byte_us * bytes as f64) * 1e-6)
    }
}

type Delivery = Box<dyn FnOnce() + Send>;

struct Pending {
    deadline: Instant,
    seq: u64,
    deliver: Delivery,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.deadline == other.deadline && self.seq == other.seq
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    // Reversed so the max-heap pops the earliest deadline first.
    fn cmp(&self, other: &Self) -> CmpOrdering {
        other.deadline.cmp(&self.deadline).then(other.seq.cmp(&self.seq))
    }
}

struct Queue {
    heap: BinaryHeap<Pending>,
    seq: u64,
    stopped: bool,
}

struct Delayed {
    queue: Mutex<Queue>,
    wake: Condvar,
}

/// Ordered monotone deadline for one FIFO stream (a channel or a
/// request/reply path).
#[derive(Default)]
pub(crate) struct Lane {
    last: Mutex<Option<Instant>>,
}

pub(crate) struct Transport {
    config: NetConfig,
    delayed: Option<(Arc<Delayed>, Mutex<Option<JoinHandle<()>>>)>,
}

impl Transport {
    pub(crate) fn new(config: NetConfig) -> Transport {
        if config.is_instant() {
            return Transport { config, delayed: None };
        }
        let delayed = Arc::new(Delayed {
            queue: Mutex::new(Queue {
                heap: BinaryHeap::new(),
                seq: 0,
                stopped: false,
            }),
            wake: Condvar::new(),
        });
        let d = Arc::clone(&delayed);
        let handle = std::thread::Builder::new()
            .name("sim-transport".into())
            .spawn(move || run(&d))
            .expect("spawn transport thread");
        Transport {
            config,
            delayed: Some((delayed, Mutex::new(Some(handle)))),
        }
    }

    pub(crate) fn config(&self) -> NetConfig {
        self.config
    }

    /// Delivers after the configured delay for `bytes`. Messages on the same
    /// `lane` arrive in send order.
    pub(crate) fn send(&self, bytes: usize, lane: Option<&Lane>, deliver: impl FnOnce() + Send + 'static) {
        let Some((delayed, _)) = &self.delayed else {
            deliver();
            return;
        };
        let mut deadline = Instant::now() + self.config.delay(bytes);
        let mut q = delayed.queue.lock().unwrap();
        if let Some(lane) = lane {
            let mut last = lane.last.lock().unwrap();
            if let Some(prev) = *last {
                deadline = deadline.max(prev);
            }
            *last = Some(deadline);
        }
        if q.stopped {
            return;
        }
        q.seq += 1;
        let seq = q.seq;
        q.heap.push(Pending {
            deadline,
            seq,
            deliver: Box::new(deliver),
        });
        drop(q);
        delayed.wake.notify_one();
    }

    pub(crate) fn stop(&self) {
        if let Some((delayed, handle)) = &self.delayed {
            delayed.queue.lock().unwrap().stopped = true;
            delayed.wake.notify_one();
            if let Some(h) = handle.lock().unwrap().take() {
                let _ = h.join();
            }
        }
    }
}

impl Drop for Transport {
    fn drop(&mut self) {
        self.stop();
    }
}

fn run(delayed: &Delayed) {
    let mut q = delayed.queue.lock().unwrap();
    loop {
        if q.stopped {
            return;
        }
        let now = Instant::now();
        match q.heap.peek().map(|p| p.deadline) {
            Some(deadline) if deadline <= now => {
                let p = q.heap.pop().unwrap();
                drop(q);
                (p.deliver)();
                q = delayed.queue.lock().unwrap();
            }
            Some(deadline) => {
                q = delayed.wake.wait_timeout(q, deadline - now).unwrap().0;
            }
            None => {
                q = delayed.wake.wait(q).unwrap();
            }
        }
    }
}
