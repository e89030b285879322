//! Task runtime, local and distributed resilience combinators, a simulated
//! multi-locality runtime and the benchmark harness.

pub mod engine;
pub mod local;
pub mod locality;
pub mod distributed;
pub mod bench;
pub mod report;
pub mod cli;
