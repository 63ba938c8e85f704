//! The agent contract shared by scripted strategies, replayed traces, human
//! participants and chat-model agents.

mod human;
mod scripted;

use std::sync::Arc;
use std::time::Duration;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Action, GameParams, Points, RoundRecord};
use crate::llm::{ChatAgent, ChatAgentSpec, Clock, TranscriptLog};
use crate::runner::{ControlSurface, EventSink};
use crate::topology::{Graph, TopologyMode};

pub use human::{HumanAgent, HumanGate, SubmitError};
pub use scripted::{fermi_adoption_probability, ScriptedAgent, Strategy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("no decision within {0:?}")]
    Timeout(Duration),
    #[error("no valid choice after {attempts} ambiguous replies in round {round}")]
    RectificationFailed { round: u32, attempts: u32 },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("invalid agent: {0}")]
    Config(String),
}

/// What one neighbor did last round, as seen by the focal player.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborView {
    /// 1-based positional label ("Neighbor 1", "Neighbor 2", ...).
    pub label: usize,
    pub action: Action,
    pub paid: Points,
    pub gained_from_me: Points,
    pub gained_from_others: Points,
    pub net: Points,
}

/// Post-round feedback for one player. Chat and human feedback text is
/// rendered from exactly these numbers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub round: u32,
    pub my_action: Action,
    pub my_paid: Points,
    pub my_gained: Points,
    pub my_net: Points,
    pub neighbors: Vec<NeighborView>,
}

impl Observation {
    /// Builds the observation for `node`, listing neighbors in `label_order`
    /// (neighbor node ids; label `i + 1` goes to `label_order[i]`).
    pub fn build(record: &RoundRecord, graph: &Graph, node: usize, label_order: &[usize]) -> Observation {
        debug_assert_eq!(label_order.len(), graph.degree(node));
        let neighbors = label_order
            .iter()
            .enumerate()
            .map(|(i, &other)| {
                let from_me = record.flow_between(node, other);
                NeighborView {
                    label: i + 1,
                    action: record.actions[other],
                    paid: record.paid[other],
                    gained_from_me: from_me,
                    gained_from_others: record.gained[other] - from_me,
                    net: record.net[other],
                }
            })
            .collect();
        Observation {
            round: record.round,
            my_action: record.actions[node],
            my_paid: record.paid[node],
            my_gained: record.gained[node],
            my_net: record.net[node],
            neighbors,
        }
    }

    pub fn cooperating_neighbors(&self) -> usize {
        self.neighbors.iter().filter(|n| n.action.is_cooperate()).count()
    }
}

/// Behavior behind an [`AgentHandle`].
pub trait Agent: Send {
    fn decide(&mut self, round: u32) -> Result<Action, AgentError>;
    fn observe(&mut self, obs: &Observation) -> Result<(), AgentError>;
    /// True when `decide` may wait on something outside the process.
    fn is_blocking(&self) -> bool {
        false
    }
}

/// Replays a recorded action trace; observations are ignored.
#[derive(Debug, Clone)]
pub struct ReplayAgent {
    trace: Vec<Action>,
}

impl ReplayAgent {
    pub fn new(trace: Vec<Action>) -> Self {
        ReplayAgent { trace }
    }
}

impl Agent for ReplayAgent {
    fn decide(&mut self, round: u32) -> Result<Action, AgentError> {
        self.trace
            .get(round as usize - 1)
            .copied()
            .ok_or_else(|| AgentError::Protocol(format!("replay trace has no action for round {round}")))
    }

    fn observe(&mut self, _obs: &Observation) -> Result<(), AgentError> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Scripted,
    Replay,
    Human,
    Chat,
}

/// Agent description as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    Scripted(Strategy),
    Replay(ReplaySpec),
    Human(HumanSpec),
    Chat(ChatAgentSpec),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplaySpec {
    pub trace: Vec<Action>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanSpec {}

impl AgentSpec {
    pub fn all_c() -> Self {
        AgentSpec::Scripted(Strategy::AllC)
    }

    pub fn all_d() -> Self {
        AgentSpec::Scripted(Strategy::AllD)
    }

    pub fn random(p: f64) -> Self {
        AgentSpec::Scripted(Strategy::Random { p })
    }

    pub fn tit_for_tat_majority() -> Self {
        AgentSpec::Scripted(Strategy::TitForTatMajority)
    }

    pub fn grim() -> Self {
        AgentSpec::Scripted(Strategy::Grim)
    }

    pub fn fermi_imitate(beta: f64) -> Self {
        AgentSpec::Scripted(Strategy::FermiImitate { beta, initial: None })
    }

    pub fn replay(trace: Vec<Action>) -> Self {
        AgentSpec::Replay(ReplaySpec { trace })
    }

    pub fn human() -> Self {
        AgentSpec::Human(HumanSpec {})
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            AgentSpec::Scripted(_) => AgentKind::Scripted,
            AgentSpec::Replay(_) => AgentKind::Replay,
            AgentSpec::Human(_) => AgentKind::Human,
            AgentSpec::Chat(_) => AgentKind::Chat,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        match self {
            AgentSpec::Scripted(strategy) => strategy.validate(),
            AgentSpec::Replay(_) | AgentSpec::Human(_) => Ok(()),
            AgentSpec::Chat(spec) => spec.validate(),
        }
    }
}

/// Everything an agent may need from its repetition.
#[derive(Clone)]
pub struct AgentEnv {
    pub repetition: usize,
    pub params: GameParams,
    pub mode: TopologyMode,
    pub rounds: u32,
    pub human_timeout: Duration,
    pub sink: Arc<dyn EventSink>,
    pub control: Arc<ControlSurface>,
    pub transcript: Arc<TranscriptLog>,
    pub clock: Arc<dyn Clock>,
}

/// A single agent plus the bookkeeping that enforces round ordering.
pub struct AgentHandle {
    id: usize,
    kind: AgentKind,
    inner: Box<dyn Agent>,
    last_decided: u32,
    last_observed: u32,
}

impl AgentHandle {
    pub fn new(id: usize, kind: AgentKind, inner: Box<dyn Agent>) -> Self {
        AgentHandle {
            id,
            kind,
            inner,
            last_decided: 0,
            last_observed: 0,
        }
    }

    pub fn build(id: usize, spec: &AgentSpec, env: &AgentEnv, rng: ChaCha8Rng) -> Result<Self, AgentError> {
        spec.validate()?;
        let inner: Box<dyn Agent> = match spec {
            AgentSpec::Scripted(strategy) => Box::new(ScriptedAgent::new(strategy.clone(), env.params, rng)),
            AgentSpec::Replay(spec) => Box::new(ReplayAgent::new(spec.trace.clone())),
            AgentSpec::Human(_) => Box::new(HumanAgent::new(id, env)),
            AgentSpec::Chat(chat) => Box::new(ChatAgent::new(id, chat, env)?),
        };
        Ok(AgentHandle::new(id, spec.kind(), inner))
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn is_blocking(&self) -> bool {
        self.inner.is_blocking()
    }

    pub fn decide(&mut self, round: u32) -> Result<Action, AgentError> {
        if round != self.last_observed + 1 || round <= self.last_decided {
            return Err(AgentError::Protocol(format!(
                "agent {} asked for round {round} after observing round {}",
                self.id, self.last_observed
            )));
        }
        self.last_decided = round;
        self.inner.decide(round)
    }

    pub fn observe(&mut self, obs: &Observation) -> Result<(), AgentError> {
        if obs.round != self.last_observed + 1 || obs.round != self.last_decided {
            return Err(AgentError::Protocol(format!(
                "agent {} received round {} out of order (last observed {})",
                self.id, obs.round, self.last_observed
            )));
        }
        self.last_observed = obs.round;
        self.inner.observe(obs)
    }
}
