use std::sync::atomic::{AtomicU64, Ordering};

/// Transport and protocol counters for one simulation.
#[derive(Debug)]
pub struct SimMetrics {
    pub envelopes_sent: AtomicU64,
    pub envelopes_delivered: AtomicU64,
    pub replies: AtomicU64,
    pub channel_messages: AtomicU64,
    pub bytes_moved: AtomicU64,
    pub remote_invocations: AtomicU64,
    /// Replay steps that moved on to the next locality in the list.
    pub remote_fallbacks: AtomicU64,
    /// Remote invocations that came back as an error.
    pub remote_failures: AtomicU64,
    /// Remote results rejected by a caller-side validator.
    pub validation_failures: AtomicU64,
    success_by_rank: Vec<AtomicU64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimStats {
    pub envelopes_sent: u64,
    pub envelopes_delivered: u64,
    pub replies: u64,
    pub channel_messages: u64,
    pub bytes_moved: u64,
    pub remote_invocations: u64,
    pub remote_fallbacks: u64,
    pub remote_failures: u64,
    pub validation_failures: u64,
    pub success_by_rank: Vec<u64>,
}

impl SimMetrics {
    pub(crate) fn new(localities: usize) -> Self {
        SimMetrics {
            envelopes_sent: AtomicU64::new(0),
            envelopes_delivered: AtomicU64::new(0),
            replies: AtomicU64::new(0),
            channel_messages: AtomicU64::new(0),
            bytes_moved: AtomicU64::new(0),
            remote_invocations: AtomicU64::new(0),
            remote_fallbacks: AtomicU64::new(0),
            remote_failures: AtomicU64::new(0),
            validation_failures: AtomicU64::new(0),
            success_by_rank: (0..localities).map(|_| AtomicU64::new(0)).collect(),
        }
    }

    pub(crate) fn add(counter: &AtomicU64, v: u64) {
        counter.fetch_add(v, Ordering::Relaxed);
    }

    pub(crate) fn record_success(&self, rank: u32) {
        if let Some(c) = self.success_by_rank.get(rank as usize) {
            c.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn snapshot(&self) -> SimStats {
        let l = |c: &AtomicU64| c.load(Ordering::Relaxed);
        SimStats {
            envelopes_sent: l(&self.envelopes_sent),
            envelopes_delivered: l(&self.envelopes_delivered),
            replies: l(&self.replies),
            channel_messages: l(&self.channel_messages),
            bytes_moved: l(&self.bytes_moved),
            remote_invocations: l(&self.remote_invocations),
            remote_fallbacks: l(&self.remote_fallbacks),
            remote_failures: l(&self.remote_failures),
            validation_failures: l(&self.validation_failures),
            success_by_rank: self.success_by_rank.iter().map(l).collect(),
        }
    }
}
