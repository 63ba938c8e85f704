use std::fmt;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::runner::{ExperimentResult, RepetitionResult};

/// One round of a series averaged across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub round: u32,
    pub mean: f64,
    /// Standard error across repetitions; absent with fewer than two.
    pub se: Option<f64>,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesWithBand {
    pub points: Vec<BandPoint>,
}

impl SeriesWithBand {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }

    pub fn at(&self, round: u32) -> Option<&BandPoint> {
        self.points.iter().find(|p| p.round == round)
    }
}

/// Mean and sample-sd standard error of per-repetition values.
pub fn band(round: u32, values: &[f64]) -> Option<BandPoint> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let se = (values.len() > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt() / n.sqrt()
    });
    Some(BandPoint {
        round,
        mean,
        se,
        runs: values.len(),
    })
}

/// Completed repetitions, checked to share one round count.
pub(crate) fn completed(result: &ExperimentResult) -> Result<(Vec<&RepetitionResult>, usize), MetricsError> {
    let reps: Vec<_> = result.completed().collect();
    let first = reps.first().ok_or(MetricsError::NoCompletedRepetitions)?;
    let rounds = first.records.len();
    if let Some(other) = reps.iter().find(|r| r.records.len() != rounds) {
        return Err(MetricsError::UnequalRounds(rounds, other.records.len()));
    }
    Ok((reps, rounds))
}

pub fn cooperation_series(result: &ExperimentResult) -> Result<SeriesWithBand, MetricsError> {
    let (reps, rounds) = completed(result)?;
    let points = (0..rounds)
        .filter_map(|r| {
            let values: Vec<f64> = reps.iter().map(|rep| rep.records[r].cooperation_level()).collect();
            band(r as u32 + 1, &values)
        })
        .collect();
    Ok(SeriesWithBand { points })
}

/// Cooperation in one round across completed repetitions.
pub fn cooperation_at(result: &ExperimentResult, round: u32) -> Result<BandPoint, MetricsError> {
    let (_, rounds) = completed(result)?;
    if round == 0 || round as usize > rounds {
        return Err(MetricsError::RoundOutOfRange { round, rounds });
    }
    let series = cooperation_series(result)?;
    Ok(series.points[round as usize - 1].clone())
}

/// Position of a cell relative to the b/c = k threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdClass {
    #[serde(rename = "b/c<k")]
    Below,
    #[serde(rename = "b/c=k")]
    Equal,
    #[serde(rename = "b/c>k")]
    Above,
}

impl fmt::Display for ThresholdClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdClass::Below => "b/c<k",
            ThresholdClass::Equal => "b/c=k",
            ThresholdClass::Above => "b/c>k",
        })
    }
}

pub fn threshold_class(bc_ratio: u32, k: usize) -> ThresholdClass {
    match (bc_ratio as usize).cmp(&k) {
        std::cmp::Ordering::Less => ThresholdClass::Below,
        std::cmp::Ordering::Equal => ThresholdClass::Equal,
        std::cmp::Ordering::Greater => ThresholdClass::Above,
    }
}
