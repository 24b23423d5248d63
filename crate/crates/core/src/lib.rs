//! Reactive intention-driven skill planning for a dual-arm robot working
//! next to a human leader, with a deterministic simulated world to run it in.

pub mod intention;
pub mod occgraph;
pub mod planner;
pub mod safety;
pub mod simworld;
pub mod skillspec;
pub mod trace;
