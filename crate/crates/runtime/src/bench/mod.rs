//! Benchmark workloads: synthetic busy-wait tasks and the advection stencil,
//! each in a local and a multi-locality flavour.

mod stencil;
mod synthetic;

use std::fmt;
use std::str::FromStr;

use resilience_core::TaskError;

use crate::report::RunReport;

pub use stencil::{run_stencil_distributed, run_stencil_local, StencilDistributedConfig, StencilLocalConfig};
pub use synthetic::{run_synthetic_distributed, run_synthetic_local, SyntheticDistributedConfig, SyntheticLocalConfig};

/// Resilience wrapper applied to each benchmark task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    None,
    Replay,
    ReplayValidate,
    Replicate,
    ReplicateValidate,
    ReplicateVote,
    ReplicateVoteValidate,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::None,
        Mode::Replay,
        Mode::ReplayValidate,
        Mode::Replicate,
        Mode::ReplicateValidate,
        Mode::ReplicateVote,
        Mode::ReplicateVoteValidate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::None => "none",
            Mode::Replay => "replay",
            Mode::ReplayValidate => "replay_validate",
            Mode::Replicate => "replicate",
            Mode::ReplicateValidate => "replicate_validate",
            Mode::ReplicateVote => "replicate_vote",
            Mode::ReplicateVoteValidate => "replicate_vote_validate",
        }
    }

    pub fn is_replay(self) -> bool {
        matches!(self, Mode::Replay | Mode::ReplayValidate)
    }

    pub fn is_replicate(self) -> bool {
        matches!(
            self,
            Mode::Replicate | Mode::ReplicateValidate | Mode::ReplicateVote | Mode::ReplicateVoteValidate
        )
    }

    pub fn validates(self) -> bool {
        matches!(self, Mode::ReplayValidate | Mode::ReplicateValidate | Mode::ReplicateVoteValidate)
    }

    pub fn votes(self) -> bool {
        matches!(self, Mode::ReplicateVote | Mode::ReplicateVoteValidate)
    }

    /// The count that ends up in reports: 1 for `none`.
    pub fn effective_n(self, n: u32) -> u32 {
        if self == Mode::None {
            1
        } else {
            n
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown mode {0:?}")]
pub struct UnknownMode(pub String);

impl FromStr for Mode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Mode, UnknownMode> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| UnknownMode(s.to_string()))
    }
}

/// Report plus what the CSV does not carry.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    /// Tasks whose resilience wrapper gave up (synthetic runs keep going).
    pub exhausted: u64,
    /// Results rejected by a validator, local or caller-side.
    pub validation_failures: u64,
    /// Final stencil grid, subdomain-major. `None` for synthetic runs and
    /// aborted stencil runs.
    pub grid: Option<Vec<f64>>,
    /// Why a stencil run stopped early.
    pub error: Option<TaskError>,
    /// Successful remote results per rank.
    pub success_by_rank: Vec<u64>,
}

impl RunOutcome {
    pub(crate) fn new(report: RunReport) -> Self {
        RunOutcome {
            report,
            exhausted: 0,
            validation_failures: 0,
            grid: None,
            error: None,
            success_by_rank: Vec::new(),
        }
    }

    pub fn completed(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] crate::locality::SimError),
}
