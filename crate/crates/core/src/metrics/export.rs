use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::series::SeriesWithBand;

/// One line of the tidy series CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub cell: String,
    pub round: u32,
    pub mean: f64,
    pub se: Option<f64>,
    pub runs: usize,
}

pub fn series_csv_header() -> &'static str {
    "cell,round,mean,se,runs\n"
}

/// Rows of `series` labelled with `cell`; an absent band leaves `se` empty.
pub fn series_csv(cell: &str, series: &SeriesWithBand) -> String {
    let mut out = String::new();
    for p in &series.points {
        let se = p.se.map(|s| s.to_string()).unwrap_or_default();
        writeln!(out, "{cell},{},{},{se},{}", p.round, p.mean, p.runs).unwrap();
    }
    out
}
