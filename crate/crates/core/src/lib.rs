//! Allocation-only (`no_std` + `alloc`) core of the resilience toolkit.
//!
//! Everything here is a pure function of its inputs: the seeded fault model,
//! the Lax-Wendroff stencil with its checksum weights, the action wire codec,
//! the default vote function and backup-locality lists. Threads, pools and
//! I/O live in `resilience-runtime`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod backup;
pub mod codec;
pub mod error;
pub mod fault;
pub mod snapshot;
pub mod stencil;
pub mod vote;

pub use backup::make_backup_lists;
pub use codec::{CodecError, Envelope, Value, Wire};
pub use error::{ResilienceError, ResilienceErrorKind, TaskError};
pub use fault::{CorruptionSite, FaultContext, FaultMode, FaultSpec, FaultSpecError};
pub use stencil::{ChecksumWeights, StencilConfig, Subdomain, SubdomainUpdate};
pub use vote::majority_vote;

/// Rank of a locality inside a simulation, dense in `0..K`.
pub type LocalityId = u32;
