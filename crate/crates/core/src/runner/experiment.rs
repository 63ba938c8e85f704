use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, ExperimentConfig, FailurePolicy};
use super::control::ControlSurface;
use super::events::{Event, EventKind, EventLog, EventSink};
use crate::agents::{AgentEnv, AgentError, AgentHandle, AgentKind, Observation, ReplayAgent};
use crate::game::{resolve_round, Action, GameError, RoundRecord};
use crate::llm::{Clock, GraphEntry, SystemClock, TranscriptEntry, TranscriptLog};
use crate::topology::{sample_regular, Graph, TopologyError, TopologyMode};

const TOPOLOGY_STREAM: u64 = 0;
const LABEL_STREAM: u64 = 1;
const AGENT_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("repetition {repetition} diverges from the recording at round {round}: {detail}")]
    Integrity {
        repetition: usize,
        round: u32,
        detail: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Rectification,
    Transport,
    Timeout,
    Protocol,
    Aborted,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RepetitionStatus {
    Completed,
    Failed {
        kind: FailureKind,
        reason: String,
        round: u32,
    },
}

impl RepetitionStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RepetitionStatus::Completed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub index: usize,
    pub seed: u64,
    pub status: RepetitionStatus,
    pub records: Vec<RoundRecord>,
    pub transcript: Vec<TranscriptEntry>,
    pub events: Vec<Event>,
}

impl RepetitionResult {
    /// Graph in force at `round`, taken from the transcript.
    pub fn graph_at(&self, round: u32) -> Option<&Graph> {
        self.transcript
            .iter()
            .filter_map(|e| match e {
                TranscriptEntry::Graph(g) if g.round <= round => Some(g),
                _ => None,
            })
            .max_by_key(|g| g.round)
            .map(|g| &g.graph)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub repetitions: Vec<RepetitionResult>,
}

impl ExperimentResult {
    pub fn completed(&self) -> impl Iterator<Item = &RepetitionResult> {
        self.repetitions.iter().filter(|r| r.status.is_completed())
    }

    pub fn all_completed(&self) -> bool {
        self.repetitions.iter().all(|r| r.status.is_completed())
    }
}

/// Shared services for a run: event log, live controls and the clock.
#[derive(Clone)]
pub struct RunContext {
    pub events: Arc<EventLog>,
    pub control: Arc<ControlSurface>,
    pub clock: Arc<dyn Clock>,
}

impl Default for RunContext {
    fn default() -> Self {
        RunContext {
            events: Arc::new(EventLog::default()),
            control: Arc::new(ControlSurface::default()),
            clock: Arc::new(SystemClock::default()),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of repetition `index`; every random draw in the repetition derives
/// from it.
pub fn repetition_seed(master_seed: u64, index: usize) -> u64 {
    splitmix64(master_seed ^ splitmix64(index as u64))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn label_orders(graph: &Graph, shuffle: bool, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    (0..graph.node_count())
        .map(|node| {
            let mut order = graph.neighbors_of(node).to_vec();
            if shuffle {
                order.shuffle(rng);
            }
            order
        })
        .collect()
}

fn failure(err: &AgentError, agent: usize, round: u32) -> RepetitionStatus {
    let kind = match err {
        AgentError::Timeout(_) => FailureKind::Timeout,
        AgentError::RectificationFailed { .. } => FailureKind::Rectification,
        AgentError::Transport(_) => FailureKind::Transport,
        AgentError::Protocol(_) => FailureKind::Protocol,
        AgentError::Template(_) | AgentError::Config(_) => FailureKind::Agent,
    };
    RepetitionStatus::Failed {
        kind,
        reason: format!("agent {agent}: {err}"),
        round,
    }
}

fn collect_decisions(agents: &mut [AgentHandle], round: u32) -> Vec<Result<Action, AgentError>> {
    if !agents.iter().any(AgentHandle::is_blocking) {
        return agents.iter_mut().map(|a| a.decide(round)).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = agents
            .iter_mut()
            .map(|agent| scope.spawn(move || agent.decide(round)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(AgentError::Protocol("agent panicked".into()))))
            .collect()
    })
}

/// Runs one repetition. With `traces`, every agent is replaced by a replay
/// of its trace and only `traces[0].len()` rounds are played.
fn run_repetition(
    config: &ExperimentConfig,
    index: usize,
    ctx: &RunContext,
    traces: Option<&[Vec<Action>]>,
) -> Result<RepetitionResult, RunnerError> {
    let seed = repetition_seed(config.master_seed, index);
    let sink: Arc<dyn EventSink> = ctx.events.clone();
    let transcript = Arc::new(TranscriptLog::default());
    if traces.is_none() {
        ctx.control.set_transcript(index, transcript.clone());
    }
    let env = AgentEnv {
        repetition: index,
        params: config.params,
        mode: config.topology.mode,
        rounds: config.rounds,
        human_timeout: config.human_timeout(),
        sink: sink.clone(),
        control: ctx.control.clone(),
        transcript: transcript.clone(),
        clock: ctx.clock.clone(),
    };
    sink.emit(Some(index), EventKind::RepetitionStarted { seed });

    let mut agents = Vec::with_capacity(config.agents.len());
    for (id, spec) in config.agents.iter().enumerate() {
        let handle = match traces {
            Some(traces) => AgentHandle::new(id, AgentKind::Replay, Box::new(ReplayAgent::new(traces[id].clone()))),
            None => AgentHandle::build(id, spec, &env, stream(seed, AGENT_STREAM_BASE + id as u64))
                .map_err(|e| ConfigError::new(format!("agents[{id}]"), e))?,
        };
        agents.push(handle);
    }
    let rounds = traces.map_or(config.rounds, |t| t.first().map_or(0, Vec::len) as u32);

    let mut topology_rng = stream(seed, TOPOLOGY_STREAM);
    let mut label_rng = stream(seed, LABEL_STREAM);
    let fixed = config.topology.fixed_graph()?;
    let mut labels = fixed
        .as_ref()
        .map(|g| label_orders(g, config.shuffle_labels, &mut label_rng));

    let mut records = Vec::with_capacity(rounds as usize);
    let mut status = RepetitionStatus::Completed;
    'rounds: for round in 1..=rounds {
        if ctx.control.is_aborted() {
            status = RepetitionStatus::Failed {
                kind: FailureKind::Aborted,
                reason: "aborted by operator".into(),
                round,
            };
            break;
        }
        let graph = match &fixed {
            Some(g) => g.clone(),
            None => {
                let g = sample_regular(config.topology.n, config.topology.k, &mut topology_rng)?;
                labels = Some(label_orders(&g, config.shuffle_labels, &mut label_rng));
                g
            }
        };
        if round == 1 || config.topology.mode == TopologyMode::WellMixed {
            transcript.push(TranscriptEntry::Graph(GraphEntry {
                round,
                graph: graph.clone(),
            }));
        }
        sink.emit(Some(index), EventKind::RoundStarted { round });

        let decisions = collect_decisions(&mut agents, round);
        if ctx.control.is_aborted() {
            status = RepetitionStatus::Failed {
                kind: FailureKind::Aborted,
                reason: "aborted by operator".into(),
                round,
            };
            break;
        }
        let mut actions = Vec::with_capacity(decisions.len());
        let mut substituted = vec![false; decisions.len()];
        for (agent, decision) in decisions.into_iter().enumerate() {
            match (decision, config.failure_policy) {
                (Ok(action), _) => actions.push(action),
                (Err(AgentError::Timeout(_)), FailurePolicy::Substitute(action)) => {
                    substituted[agent] = true;
                    actions.push(action);
                }
                (Err(err), _) => {
                    status = failure(&err, agent, round);
                    break 'rounds;
                }
            }
        }
        for (agent, &action) in actions.iter().enumerate() {
            sink.emit(
                Some(index),
                EventKind::ActionRecorded {
                    round,
                    agent,
                    action,
                    substituted: substituted[agent],
                },
            );
        }

        let record = resolve_round(round, &actions, &graph, &config.params)?;
        sink.emit(
            Some(index),
            EventKind::RoundResolved {
                round,
                cooperators: record.cooperators(),
                cooperation: record.cooperation_level(),
            },
        );
        let labels = labels.as_ref().expect("labels exist once a graph does");
        for (node, agent) in agents.iter_mut().enumerate() {
            let obs = Observation::build(&record, &graph, node, &labels[node]);
            if let Err(err) = agent.observe(&obs) {
                status = failure(&err, node, round);
                records.push(record);
                break 'rounds;
            }
        }
        records.push(record);
    }

    sink.emit(
        Some(index),
        EventKind::RepetitionFinished {
            outcome: status.clone(),
        },
    );
    Ok(RepetitionResult {
        index,
        seed,
        status,
        records,
        transcript: transcript.snapshot(),
        events: ctx.events.for_repetition(index),
    })
}

/// Runs every repetition of `config` in order.
pub fn run_experiment(config: &ExperimentConfig, ctx: &RunContext) -> Result<ExperimentResult, RunnerError> {
    config.validate()?;
    ctx.events.emit(
        None,
        EventKind::ExperimentStarted {
            repetitions: config.repetitions,
        },
    );
    let mut repetitions = Vec::with_capacity(config.repetitions as usize);
    for index in 0..config.repetitions as usize {
        repetitions.push(run_repetition(config, index, ctx, None)?);
    }
    let completed = repetitions.iter().filter(|r| r.status.is_completed()).count();
    ctx.events.emit(
        None,
        EventKind::ExperimentFinished {
            completed,
            failed: repetitions.len() - completed,
        },
    );
    Ok(ExperimentResult {
        config: config.clone(),
        repetitions,
    })
}

/// Re-executes every repetition from its recorded actions and checks that
/// payoffs and graphs come out identical.
pub fn replay(result: &ExperimentResult) -> Result<ExperimentResult, RunnerError> {
    let config = &result.config;
    config.validate()?;
    let ctx = RunContext::default();
    let n = config.agents.len();
    let mut repetitions = Vec::with_capacity(result.repetitions.len());
    for stored in &result.repetitions {
        let integrity = |round: u32, detail: String| RunnerError::Integrity {
            repetition: stored.index,
            round,
            detail,
        };
        if stored.seed != repetition_seed(config.master_seed, stored.index) {
            return Err(integrity(1, "seed does not derive from the master seed".into()));
        }
        let expected_rounds = match &stored.status {
            RepetitionStatus::Completed => config.rounds as usize,
            RepetitionStatus::Failed { round, .. } => *round as usize - 1,
        };
        if stored.records.len() < expected_rounds {
            return Err(integrity(stored.records.len() as u32 + 1, "record missing".into()));
        }
        let traces: Vec<Vec<Action>> = (0..n)
            .map(|agent| stored.records.iter().map(|r| r.actions.get(agent).copied().unwrap_or(Action::Defect)).collect())
            .collect();
        for record in &stored.records {
            if record.actions.len() != n {
                return Err(integrity(record.round, format!("{} actions for {n} agents", record.actions.len())));
            }
        }
        let mut replayed = run_repetition(config, stored.index, &ctx, Some(&traces))?;
        for (i, (a, b)) in replayed.records.iter().zip(&stored.records).enumerate() {
            if a != b {
                return Err(integrity(i as u32 + 1, "round record differs".into()));
            }
        }
        for round in 1..=stored.records.len() as u32 {
            let (Some(a), Some(b)) = (replayed.graph_at(round), stored.graph_at(round)) else {
                continue;
            };
            if a != b {
                return Err(integrity(round, "interaction graph differs".into()));
            }
        }
        replayed.status = stored.status.clone();
        repetitions.push(replayed);
    }
    Ok(ExperimentResult {
        config: config.clone(),
        repetitions,
    })
}
