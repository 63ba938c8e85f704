//! Batch front end: plans, resumable runs, metrics files and the HTTP
//! control surface.

pub mod commands;
pub mod grid;
pub mod metrics;
pub mod run;
pub mod server;

pub use commands::{ExitCode, RunArgs};
