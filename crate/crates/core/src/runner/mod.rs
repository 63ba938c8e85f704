//! Experiment execution: configs, the round barrier, live controls, events,
//! replay and result storage.

mod config;
mod control;
mod events;
mod experiment;
mod stimulus;
pub mod store;

pub use config::{ConfigError, ExperimentConfig, FailurePolicy, StimulusSpec};
pub use control::{ControlError, ControlSurface};
pub use events::{Event, EventKind, EventLog, EventSink, NullSink};
pub use experiment::{
    repetition_seed, replay, run_experiment, ExperimentResult, FailureKind, RepetitionResult, RepetitionStatus,
    RunContext, RunnerError,
};
pub use stimulus::{focal_series, run_stimulus, FocalSeries};
