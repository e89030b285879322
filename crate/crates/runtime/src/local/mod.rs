//! Local resilience: task replay and task replication over `async`- and
//! `dataflow`-style invocation, plus resilient executors.
//!
//! `n` counts total attempts for replay (the first execution plus up to
//! `n - 1` replays) and total replicas for replicate. Each attempt and each
//! replica receives its own copy of the arguments, so nothing the caller does
//! after the call can change what a replay sees.

mod executor;
mod replay;
mod replicate;

use std::sync::Arc;

pub use executor::{make_resilient_executor, parallel_for_each, Executor, ResilienceMode, ResilientExecutor};
pub use replay::*;
pub use replicate::*;

/// Result check used for algorithm-based fault tolerance. Must be pure.
pub type Validate<T> = Arc<dyn Fn(&T) -> bool + Send + Sync>;

/// Consensus over the accepted replica results, given in replica-index order.
pub type Vote<T> = Arc<dyn Fn(Vec<T>) -> T + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("attempt/replica count must be at least 1")]
    ZeroCount,
}

pub struct ReplayPolicy<T> {
    n: u32,
    validate: Option<Validate<T>>,
}

impl<T> Clone for ReplayPolicy<T> {
    fn clone(&self) -> Self {
        ReplayPolicy {
            n: self.n,
            validate: self.validate.clone(),
        }
    }
}

impl<T> ReplayPolicy<T> {
    pub fn new(n: u32) -> Result<Self, PolicyError> {
        if n == 0 {
            return Err(PolicyError::ZeroCount);
        }
        Ok(ReplayPolicy { n, validate: None })
    }

    pub fn with_validate(mut self, validate: impl Fn(&T) -> bool + Send + Sync + 'static) -> Self {
        self.validate = Some(Arc::new(validate));
        self
    }

    pub fn with_validate_arc(mut self, validate: Option<Validate<T>>) -> Self {
        self.validate = validate;
        self
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn validate(&self) -> Option<&Validate<T>> {
        self.validate.as_ref()
    }
}

pub struct ReplicatePolicy<T> {
    n: u32,
    validate: Option<Validate<T>>,
    vote: Option<Vote<T>>,
}

impl<T> Clone for ReplicatePolicy<T> {
    fn clone(&self) -> Self {
        ReplicatePolicy {
            n: self.n,
            validate: self.validate.clone(),
            vote: self.vote.clone(),
        }
    }
}

impl<T> ReplicatePolicy<T> {
    pub fn new(n: u32) -> Result<Self, PolicyError> {
        if n == 0 {
            return Err(PolicyError::ZeroCount);
        }
        Ok(ReplicatePolicy {
            n,
            validate: None,
            vote: None,
        })
    }

    pub fn with_validate(mut self, validate: impl Fn(&T) -> bool + Send + Sync + 'static) -> Self {
        self.validate = Some(Arc::new(validate));
        self
    }

    pub fn with_vote(mut self, vote: impl Fn(Vec<T>) -> T + Send + Sync + 'static) -> Self {
        self.vote = Some(Arc::new(vote));
        self
    }

    pub fn with_validate_arc(mut self, validate: Option<Validate<T>>) -> Self {
        self.validate = validate;
        self
    }

    pub fn with_vote_arc(mut self, vote: Option<Vote<T>>) -> Self {
        self.vote = vote;
        self
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn validate(&self) -> Option<&Validate<T>> {
        self.validate.as_ref()
    }

    pub fn vote(&self) -> Option<&Vote<T>> {
        self.vote.as_ref()
    }
}

impl<T: PartialEq + 'static> ReplicatePolicy<T> {
    /// Majority vote with lowest-index tie-break.
    pub fn with_majority_vote(self) -> Self {
        self.with_vote(resilience_core::majority_vote)
    }
}

fn policy_or_panic<P>(p: Result<P, PolicyError>) -> P {
    p.unwrap_or_else(|e| panic!("{e}"))
}
