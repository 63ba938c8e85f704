//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The `*_json` functions do the work and are plain Rust so they can be tested
//! natively; the exported wrappers only convert errors for JavaScript.

use std::sync::Arc;

use netdilemma::agents::{AgentSpec, Strategy};
use netdilemma::game::{resolve_round, Action, GameParams};
use netdilemma::llm::ManualClock;
use netdilemma::metrics::{assortment, cooperation_series, BandPoint};
use netdilemma::runner::{run_experiment, run_stimulus, EventLog, ExperimentConfig, FailurePolicy, RunContext, StimulusSpec};
use netdilemma::topology::{circulant, TopologyMode, TopologySpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Upper bounds that keep a single call responsive in a browser tab.
pub const MAX_NODES: usize = 64;
pub const MAX_WORK: u64 = 2_000_000;

// The system clock is unavailable on wasm32-unknown-unknown; scripted play
// never sleeps, so a virtual clock is enough.
fn context() -> RunContext {
    RunContext {
        events: Arc::new(EventLog::default()),
        control: Default::default(),
        clock: Arc::new(ManualClock::default()),
    }
}

fn params(bc_ratio: u32) -> Result<GameParams, String> {
    GameParams::new(bc_ratio).map_err(|e| e.to_string())
}

fn parse_actions(text: &str) -> Result<Vec<Action>, String> {
    text.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            'C' | 'c' => Ok(Action::Cooperate),
            'D' | 'd' => Ok(Action::Defect),
            other => Err(format!("actions are C or D, got {other:?}")),
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct RingRound {
    pub n: usize,
    pub k: usize,
    pub edges: Vec<(usize, usize)>,
    pub actions: Vec<Action>,
    pub paid: Vec<i64>,
    pub gained: Vec<i64>,
    pub net: Vec<i64>,
    pub cooperation: f64,
    /// Absent when everyone plays the same action.
    pub assortment: Option<f64>,
}

/// Payoffs and assortment of one round on the ring where every player is
/// linked to its `k/2` nearest players on each side.
pub fn ring_round_json(k: usize, bc_ratio: u32, actions: &str) -> Result<String, String> {
    let actions = parse_actions(actions)?;
    let n = actions.len();
    if n > MAX_NODES {
        return Err(format!("at most {MAX_NODES} players"));
    }
    let graph = circulant(n, k).map_err(|e| e.to_string())?;
    let record = resolve_round(1, &actions, &graph, &params(bc_ratio)?).map_err(|e| e.to_string())?;
    let cooperators = actions.iter().filter(|a| a.is_cooperate()).count();
    let out = RingRound {
        n,
        k,
        edges: graph.edges(),
        assortment: assortment(&actions, &graph),
        cooperation: cooperators as f64 / n as f64,
        actions,
        paid: record.paid,
        gained: record.gained,
        net: record.net,
    };
    Ok(serde_json::to_string(&out).expect("serializable"))
}

fn check_work(n: usize, rounds: u32, repetitions: u32) -> Result<(), String> {
    if n > MAX_NODES {
        return Err(format!("at most {MAX_NODES} players"));
    }
    if n as u64 * rounds as u64 * repetitions as u64 > MAX_WORK {
        return Err(format!("players x rounds x repetitions must stay below {MAX_WORK}"));
    }
    Ok(())
}

/// Imitation dynamics on a fixed ring or in a well-mixed population:
/// cooperation per round with a one-standard-error band.
#[allow(clippy::too_many_arguments)]
pub fn evolve_json(
    n: usize,
    k: usize,
    bc_ratio: u32,
    well_mixed: bool,
    beta: f64,
    rounds: u32,
    repetitions: u32,
    seed: u64,
) -> Result<String, String> {
    check_work(n, rounds, repetitions)?;
    let config = ExperimentConfig {
        topology: TopologySpec {
            n,
            k,
            mode: if well_mixed { TopologyMode::WellMixed } else { TopologyMode::FixedRing },
        },
        params: params(bc_ratio)?,
        rounds,
        repetitions,
        agents: vec![AgentSpec::Scripted(Strategy::FermiImitate { beta, initial: None }); n],
        master_seed: seed,
        failure_policy: FailurePolicy::FailRun,
        human_timeout_secs: 1.0,
        shuffle_labels: true,
        stimulus: None,
    };
    config.validate().map_err(|e| e.to_string())?;
    let result = run_experiment(&config, &context()).map_err(|e| e.to_string())?;
    let series = cooperation_series(&result).map_err(|e| e.to_string())?;
    let points: Vec<BandPoint> = series.points;
    Ok(serde_json::to_string(&points).expect("serializable"))
}

fn focal_strategy(name: &str) -> Result<AgentSpec, String> {
    Ok(match name {
        "all_c" => AgentSpec::all_c(),
        "all_d" => AgentSpec::all_d(),
        "tit_for_tat_majority" => AgentSpec::tit_for_tat_majority(),
        "grim" => AgentSpec::grim(),
        "fermi_imitate" => AgentSpec::fermi_imitate(1.0),
        other => return Err(format!("unknown focal strategy {other:?}")),
    })
}

#[derive(Debug, Serialize)]
pub struct StimulusOut {
    pub change_round: u32,
    pub runs: usize,
    pub cooperation: Vec<f64>,
}

/// Focal cooperation when four cooperating neighbours drop to
/// `post_change_cooperators` after the change round.
pub fn stimulus_json(focal: &str, post_change_cooperators: usize, seed: u64) -> Result<String, String> {
    let spec = StimulusSpec::new(focal_strategy(focal)?, post_change_cooperators);
    spec.validate().map_err(|e| e.to_string())?;
    let (_, series) = run_stimulus(spec, params(2)?, seed, &context()).map_err(|e| e.to_string())?;
    let out = StimulusOut {
        change_round: series.change_round,
        runs: series.runs,
        cooperation: series.cooperation,
    };
    Ok(serde_json::to_string(&out).expect("serializable"))
}

#[wasm_bindgen]
pub fn ring_round(k: usize, bc_ratio: u32, actions: &str) -> Result<String, JsError> {
    ring_round_json(k, bc_ratio, actions).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn evolve(
    n: usize,
    k: usize,
    bc_ratio: u32,
    well_mixed: bool,
    beta: f64,
    rounds: u32,
    repetitions: u32,
    seed: u64,
) -> Result<String, JsError> {
    evolve_json(n, k, bc_ratio, well_mixed, beta, rounds, repetitions, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn stimulus(focal: &str, post_change_cooperators: usize, seed: u64) -> Result<String, JsError> {
    stimulus_json(focal, post_change_cooperators, seed).map_err(|e| JsError::new(&e))
}
