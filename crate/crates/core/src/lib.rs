//! Experiment engine for the prisoner's dilemma played on networks by
//! scripted, human and chat-model agents.
//!
//! A round: every agent picks C or D; each cooperator pays `c` per neighbor
//! and each of its neighbors gains `b = c * bc_ratio`. Results are recorded
//! per round and can be replayed bit-identically from the recorded actions.

pub mod agents;
pub mod game;
pub mod llm;
pub mod metrics;
pub mod runner;
pub mod topology;

pub use agents::{AgentSpec, Observation, Strategy};
pub use game::{resolve_round, Action, GameParams, Points, RoundRecord};
pub use runner::{run_experiment, ExperimentConfig, ExperimentResult, RunContext};
pub use topology::{Graph, TopologyMode, TopologySpec};
