use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, StimulusSpec};
use super::experiment::{run_experiment, ExperimentResult, RunContext, RunnerError};
use crate::game::GameParams;

/// Cooperation of the focal agent per round, averaged over completed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocalSeries {
    pub change_round: u32,
    pub runs: usize,
    /// Entry `r - 1` is the share of runs in which the focal agent cooperated
    /// in round `r`.
    pub cooperation: Vec<f64>,
}

impl FocalSeries {
    /// Mean focal cooperation over the rounds before and after the change.
    pub fn before_after(&self) -> (f64, f64) {
        let split = self.change_round as usize;
        let mean = |s: &[f64]| if s.is_empty() { f64::NAN } else { s.iter().sum::<f64>() / s.len() as f64 };
        (mean(&self.cooperation[..split]), mean(&self.cooperation[split..]))
    }
}

pub fn focal_series(result: &ExperimentResult) -> Option<FocalSeries> {
    let spec = result.config.stimulus.as_ref()?;
    let runs: Vec<_> = result.completed().collect();
    let rounds = result.config.rounds as usize;
    let cooperation = (0..rounds)
        .map(|r| {
            if runs.is_empty() {
                return f64::NAN;
            }
            let c = runs.iter().filter(|rep| rep.records[r].actions[0].is_cooperate()).count();
            c as f64 / runs.len() as f64
        })
        .collect();
    Some(FocalSeries {
        change_round: spec.change_round,
        runs: runs.len(),
        cooperation,
    })
}

/// Runs the stimulus schedule and returns the raw result together with the
/// focal series.
pub fn run_stimulus(
    spec: StimulusSpec,
    params: GameParams,
    master_seed: u64,
    ctx: &RunContext,
) -> Result<(ExperimentResult, FocalSeries), RunnerError> {
    let config = ExperimentConfig::stimulus(spec, params, master_seed);
    let result = run_experiment(&config, ctx)?;
    let series = focal_series(&result).expect("stimulus config");
    Ok((result, series))
}
