use serde::{Deserialize, Serialize};

use super::series::{band, completed, SeriesWithBand};
use super::MetricsError;
use crate::game::RoundRecord;
use crate::runner::ExperimentResult;

/// Each player's net minus the round's population mean net.
pub fn relative_round(record: &RoundRecord) -> Vec<f64> {
    let n = record.net.len() as f64;
    let mean = record.net.iter().sum::<i64>() as f64 / n;
    record.net.iter().map(|&v| v as f64 - mean).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassShares {
    pub cooperate: usize,
    pub defect: usize,
}

impl ClassShares {
    pub fn total(&self) -> usize {
        self.cooperate + self.defect
    }

    pub fn cooperate_share(&self) -> f64 {
        self.cooperate as f64 / self.total() as f64
    }

    pub fn defect_share(&self) -> f64 {
        self.defect as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativePayoffs {
    pub cooperators: SeriesWithBand,
    pub defectors: SeriesWithBand,
    /// Counts of player-rounds by action.
    pub player_rounds: ClassShares,
    /// Counts of players by the action they chose in most rounds (ties count
    /// as cooperators).
    pub players: ClassShares,
}

/// Mean relative payoff of one class in one round, if the class is present.
fn class_mean(record: &RoundRecord, relative: &[f64], cooperate: bool) -> Option<f64> {
    let values: Vec<f64> = record
        .actions
        .iter()
        .zip(relative)
        .filter(|(a, _)| a.is_cooperate() == cooperate)
        .map(|(_, &v)| v)
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn relative_payoffs(result: &ExperimentResult) -> Result<RelativePayoffs, MetricsError> {
    let (reps, rounds) = completed(result)?;
    let mut cooperators = Vec::new();
    let mut defectors = Vec::new();
    for r in 0..rounds {
        let round = r as u32 + 1;
        let mut c = Vec::new();
        let mut d = Vec::new();
        for rep in &reps {
            let record = &rep.records[r];
            let relative = relative_round(record);
            c.extend(class_mean(record, &relative, true));
            d.extend(class_mean(record, &relative, false));
        }
        cooperators.extend(band(round, &c));
        defectors.extend(band(round, &d));
    }

    let mut player_rounds = ClassShares { cooperate: 0, defect: 0 };
    let mut players = ClassShares { cooperate: 0, defect: 0 };
    for rep in &reps {
        let n = rep.records[0].actions.len();
        let mut coop_rounds = vec![0usize; n];
        for record in &rep.records {
            for (i, a) in record.actions.iter().enumerate() {
                if a.is_cooperate() {
                    coop_rounds[i] += 1;
                }
            }
        }
        let c: usize = coop_rounds.iter().sum();
        player_rounds.cooperate += c;
        player_rounds.defect += n * rounds - c;
        let majority_c = coop_rounds.iter().filter(|&&c| 2 * c >= rounds).count();
        players.cooperate += majority_c;
        players.defect += n - majority_c;
    }

    Ok(RelativePayoffs {
        cooperators: SeriesWithBand { points: cooperators },
        defectors: SeriesWithBand { points: defectors },
        player_rounds,
        players,
    })
}

/// Pooled player-round relative payoffs of cooperators and defectors, the
/// samples compared by the t-test.
pub fn class_samples(result: &ExperimentResult) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    let (reps, _) = completed(result)?;
    let mut c = Vec::new();
    let mut d = Vec::new();
    for rep in reps {
        for record in &rep.records {
            for (a, v) in record.actions.iter().zip(relative_round(record)) {
                if a.is_cooperate() {
                    c.push(v);
                } else {
                    d.push(v);
                }
            }
        }
    }
    Ok((c, d))
}
