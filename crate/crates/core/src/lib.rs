//! Performance-indicator interface toolkit. Parses PID bundles, harmonizes
//! the PI log and synthesizes traceable interfaces under a role-gated
//! process engine.

pub mod canonical;
pub mod diagnostic;
pub mod harmonize;
pub mod model;
pub mod pid;
pub mod process;
pub mod project;
pub mod synth;
pub mod trace;
pub mod units;
pub mod validate;
