use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentSpec, ReplaySpec};
use crate::game::{Action, GameParams};
use crate::topology::{TopologyMode, TopologySpec};

/// A configuration problem, located by field path.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl ToString) -> Self {
        ConfigError {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

/// What happens when a human (or other blocking agent) misses the deadline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    #[default]
    FailRun,
    Substitute(Action),
}

fn default_neighbor_count() -> usize {
    4
}
fn default_pre_change() -> usize {
    4
}
fn default_change_round() -> u32 {
    5
}
fn default_stimulus_rounds() -> u32 {
    25
}
fn default_runs() -> u32 {
    10
}

/// Focal agent surrounded by scripted neighbors whose cooperator count drops
/// after `change_round`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusSpec {
    pub focal: AgentSpec,
    #[serde(default = "default_neighbor_count")]
    pub neighbor_count: usize,
    #[serde(default = "default_pre_change")]
    pub pre_change_cooperators: usize,
    pub post_change_cooperators: usize,
    /// Last round played under the initial neighborhood.
    #[serde(default = "default_change_round")]
    pub change_round: u32,
    #[serde(default = "default_stimulus_rounds")]
    pub rounds: u32,
    #[serde(default = "default_runs")]
    pub runs: u32,
}

impl StimulusSpec {
    pub fn new(focal: AgentSpec, post_change_cooperators: usize) -> Self {
        StimulusSpec {
            focal,
            neighbor_count: default_neighbor_count(),
            pre_change_cooperators: default_pre_change(),
            post_change_cooperators,
            change_round: default_change_round(),
            rounds: default_stimulus_rounds(),
            runs: default_runs(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.neighbor_count == 0 {
            return Err(ConfigError::new("stimulus.neighbor_count", "must be positive"));
        }
        if self.pre_change_cooperators > self.neighbor_count {
            return Err(ConfigError::new(
                "stimulus.pre_change_cooperators",
                "cannot exceed neighbor_count",
            ));
        }
        if self.post_change_cooperators > self.pre_change_cooperators {
            return Err(ConfigError::new(
                "stimulus.post_change_cooperators",
                "cannot exceed pre_change_cooperators",
            ));
        }
        if self.change_round == 0 || self.change_round >= self.rounds {
            return Err(ConfigError::new("stimulus.change_round", "must lie in [1, rounds)"));
        }
        if self.runs == 0 {
            return Err(ConfigError::new("stimulus.runs", "must be positive"));
        }
        Ok(())
    }

    /// Action trace of neighbor `i` (0-based).
    pub fn neighbor_trace(&self, i: usize) -> Vec<Action> {
        (1..=self.rounds)
            .map(|round| {
                let cooperators = if round <= self.change_round {
                    self.pre_change_cooperators
                } else {
                    self.post_change_cooperators
                };
                if i < cooperators {
                    Action::Cooperate
                } else {
                    Action::Defect
                }
            })
            .collect()
    }
}

fn default_human_timeout() -> f64 {
    120.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    pub params: GameParams,
    pub rounds: u32,
    pub repetitions: u32,
    /// One spec per node, in node order.
    pub agents: Vec<AgentSpec>,
    pub master_seed: u64,
    #[serde(default)]
    pub failure_policy: FailurePolicy,
    #[serde(default = "default_human_timeout")]
    pub human_timeout_secs: f64,
    /// Randomize the positional neighbor labels per repetition.
    #[serde(default = "default_true")]
    pub shuffle_labels: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stimulus: Option<StimulusSpec>,
}

impl ExperimentConfig {
    /// Star-shaped stimulus experiment: node 0 is the focal agent and nodes
    /// `1..=neighbor_count` replay the cooperation schedule.
    pub fn stimulus(spec: StimulusSpec, params: GameParams, master_seed: u64) -> Self {
        let mut agents = vec![spec.focal.clone()];
        agents.extend((0..spec.neighbor_count).map(|i| AgentSpec::replay(spec.neighbor_trace(i))));
        ExperimentConfig {
            topology: TopologySpec {
                n: spec.neighbor_count + 1,
                k: spec.neighbor_count,
                mode: TopologyMode::Star,
            },
            params,
            rounds: spec.rounds,
            repetitions: spec.runs,
            agents,
            master_seed,
            failure_policy: FailurePolicy::FailRun,
            human_timeout_secs: default_human_timeout(),
            shuffle_labels: false,
            stimulus: Some(spec),
        }
    }

    pub fn human_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.human_timeout_secs)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.topology
            .validate()
            .map_err(|e| ConfigError::new("topology", e))?;
        self.params.validate().map_err(|e| ConfigError::new("params", e))?;
        if self.rounds == 0 {
            return Err(ConfigError::new("rounds", "must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(ConfigError::new("repetitions", "must be at least 1"));
        }
        if self.agents.len() != self.topology.n {
            return Err(ConfigError::new(
                "agents",
                format!("{} agents for {} nodes", self.agents.len(), self.topology.n),
            ));
        }
        for (i, agent) in self.agents.iter().enumerate() {
            agent
                .validate()
                .map_err(|e| ConfigError::new(format!("agents[{i}]"), e))?;
            if let AgentSpec::Replay(ReplaySpec { trace }) = agent {
                if trace.len() < self.rounds as usize {
                    return Err(ConfigError::new(
                        format!("agents[{i}].trace"),
                        format!("{} actions for {} rounds", trace.len(), self.rounds),
                    ));
                }
            }
        }
        if !(self.human_timeout_secs > 0.0 && self.human_timeout_secs.is_finite()) {
            return Err(ConfigError::new("human_timeout_secs", "must be positive"));
        }
        if let Some(spec) = &self.stimulus {
            spec.validate()?;
            let expected = ExperimentConfig::stimulus(spec.clone(), self.params, self.master_seed);
            if self.topology != expected.topology
                || self.rounds != expected.rounds
                || self.repetitions != expected.repetitions
                || self.agents != expected.agents
            {
                return Err(ConfigError::new(
                    "stimulus",
                    "topology, rounds, repetitions and agents must match the stimulus schedule",
                ));
            }
        } else if self.topology.mode == TopologyMode::Star {
            return Err(ConfigError::new("topology.mode", "star is reserved for stimulus experiments"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::new("config", e))?;
        config.validate()?;
        Ok(config)
    }
}
