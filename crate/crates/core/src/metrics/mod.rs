//! Post-processing over stored results: cooperation series, assortment,
//! relative payoffs by class and Welch's t-test.

mod assortment;
mod export;
mod payoffs;
mod series;
mod ttest;

use thiserror::Error;

pub use assortment::{assortment, assortment_series};
pub use export::{series_csv, series_csv_header, SeriesRow};
pub use payoffs::{class_samples, relative_payoffs, relative_round, ClassShares, RelativePayoffs};
pub use series::{band, cooperation_at, cooperation_series, threshold_class, BandPoint, SeriesWithBand, ThresholdClass};
pub use ttest::{regularized_incomplete_beta, student_t_two_sided, welch_t_test, Degenerate, TTestResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no completed repetitions")]
    NoCompletedRepetitions,
    #[error("completed repetitions disagree on round count ({0} vs {1})")]
    UnequalRounds(usize, usize),
    #[error("round {round} is outside 1..={rounds}")]
    RoundOutOfRange { round: u32, rounds: usize },
    #[error("sample of size {0}; at least 2 required")]
    SampleTooSmall(usize),
    #[error("sample contains a non-finite value")]
    NonFinite,
}
