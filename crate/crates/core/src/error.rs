//! Error values carried inside task futures.
//!
//! Tasks never unwind across workers; a failing task resolves its future with
//! a [`TaskError`]. Every variant can be encoded by the wire codec without
//! losing its identity, so a remote failure looks the same at the caller as a
//! local one.

use alloc::boxed::Box;
use alloc::string::String;

use crate::codec::CodecError;
use crate::LocalityId;

/// Failure outcome of a task.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TaskError {
    /// A genuine failure raised by task code.
    #[error("task failed (code {code}): {message}")]
    Failed { code: u32, message: String },

    /// Failure produced by the fault injector, never by user code.
    #[error("simulated SDC on locality {locality}, task {task_id}, attempt {attempt}")]
    SimulatedSdc {
        locality: LocalityId,
        task_id: u64,
        attempt: u32,
    },

    /// A resilience combinator ran out of attempts or replicas.
    #[error(transparent)]
    Resilience(ResilienceError),

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("channel closed")]
    ChannelClosed,

    /// The task body panicked; the payload message is kept when it is a string.
    #[error("task panicked: {0}")]
    Panicked(String),

    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl TaskError {
    pub fn failed(code: u32, message: impl Into<String>) -> Self {
        TaskError::Failed {
            code,
            message: message.into(),
        }
    }

    /// True for errors raised by the fault injector.
    pub fn is_injected(&self) -> bool {
        matches!(self, TaskError::SimulatedSdc { .. })
    }
}

/// Why a resilience combinator gave up.
#[derive(Debug, Clone, PartialEq)]
pub enum ResilienceErrorKind {
    /// Every attempt was used; the last one raised this error.
    ExhaustedWithException(Box<TaskError>),
    /// Every attempt was used; the last one returned a result the validator rejected.
    ExhaustedWithInvalidResult,
    /// No replica produced an acceptable result.
    NoValidReplica,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{} after {attempts} attempt(s)", describe(kind))]
pub struct ResilienceError {
    pub kind: ResilienceErrorKind,
    pub attempts: u32,
}

fn describe(kind: &ResilienceErrorKind) -> String {
    use alloc::format;
    match kind {
        ResilienceErrorKind::ExhaustedWithException(e) => format!("replay exhausted ({e})"),
        ResilienceErrorKind::ExhaustedWithInvalidResult => "replay exhausted (invalid result)".into(),
        ResilienceErrorKind::NoValidReplica => "no valid replica".into(),
    }
}

impl ResilienceError {
    pub fn exhausted_with_exception(last: TaskError, attempts: u32) -> Self {
        ResilienceError {
            kind: ResilienceErrorKind::ExhaustedWithException(Box::new(last)),
            attempts,
        }
    }

    pub fn exhausted_with_invalid_result(attempts: u32) -> Self {
        ResilienceError {
            kind: ResilienceErrorKind::ExhaustedWithInvalidResult,
            attempts,
        }
    }

    pub fn no_valid_replica(attempts: u32) -> Self {
        ResilienceError {
            kind: ResilienceErrorKind::NoValidReplica,
            attempts,
        }
    }

    /// The exception that ended a replay, if it ended on one.
    pub fn last_exception(&self) -> Option<&TaskError> {
        match &self.kind {
            ResilienceErrorKind::ExhaustedWithException(e) => Some(e),
            _ => None,
        }
    }
}

impl From<ResilienceError> for TaskError {
    fn from(e: ResilienceError) -> Self {
        TaskError::Resilience(e)
    }
}
