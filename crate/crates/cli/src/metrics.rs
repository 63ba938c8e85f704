//! Plot-ready metrics files for a results directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use netdilemma::metrics::{
    assortment_series, class_samples, cooperation_at, cooperation_series, relative_payoffs, series_csv,
    series_csv_header, threshold_class, welch_t_test, BandPoint, ClassShares, MetricsError, SeriesWithBand,
    TTestResult, ThresholdClass,
};
use netdilemma::runner::focal_series;
use netdilemma::runner::store::{self, StoreError};
use netdilemma::ExperimentResult;
use serde::Serialize;
use thiserror::Error;

use crate::grid::CellCoords;
use crate::run::{cell_dir, Manifest};

/// Round reported by the final-cooperation table.
pub const FINAL_ROUND: u32 = 15;

#[derive(Debug, Error)]
pub enum MetricsCmdError {
    #[error("{0} holds no results")]
    Empty(PathBuf),
    #[error("no cell has a completed repetition")]
    NothingCompleted,
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Which {
    Coop,
    Assort,
    Payoffs,
    Final15,
    Stimulus,
}

impl Which {
    pub const ALL: [Which; 5] = [Which::Coop, Which::Assort, Which::Payoffs, Which::Final15, Which::Stimulus];

    pub fn parse(name: &str) -> Option<Which> {
        Some(match name {
            "coop" => Which::Coop,
            "assort" => Which::Assort,
            "payoffs" => Which::Payoffs,
            "final15" => Which::Final15,
            "stimulus" => Which::Stimulus,
            _ => return None,
        })
    }
}

/// A loaded cell of a results directory.
pub struct LoadedCell {
    pub id: String,
    pub coords: Option<CellCoords>,
    pub result: ExperimentResult,
}

/// Loads a run directory (with `manifest.json`) or a single experiment
/// store directory (with `config.json`).
pub fn load_results(dir: &Path) -> Result<Vec<LoadedCell>, MetricsCmdError> {
    if Manifest::path(dir).exists() {
        let manifest = Manifest::read(dir)?;
        if manifest.cells.is_empty() {
            return Err(MetricsCmdError::Empty(dir.to_path_buf()));
        }
        manifest
            .cells
            .into_iter()
            .map(|entry| {
                let result = store::read_result(&cell_dir(dir, &entry.id))?;
                Ok(LoadedCell {
                    id: entry.id,
                    coords: entry.coords,
                    result,
                })
            })
            .collect()
    } else if dir.join("config.json").exists() {
        Ok(vec![LoadedCell {
            id: "experiment".into(),
            coords: None,
            result: store::read_result(dir)?,
        }])
    } else {
        Err(MetricsCmdError::Empty(dir.to_path_buf()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalRow {
    pub cell: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<String>,
    pub k: usize,
    pub bc_ratio: u32,
    pub class: ThresholdClass,
    pub round: u32,
    pub mean: f64,
    pub se: Option<f64>,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffSummary {
    pub cell: String,
    pub player_rounds: ClassShares,
    pub players: ClassShares,
    /// Cooperator versus defector relative payoffs over pooled player-rounds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub welch: Option<TTestResult>,
}

/// Files written, in writing order.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Written {
    pub files: Vec<PathBuf>,
    pub skipped_cells: Vec<String>,
}

fn write(out: &Path, name: &str, text: &str, written: &mut Written) -> Result<(), StoreError> {
    let path = out.join(name);
    fs::write(&path, text).map_err(|source| StoreError::Io {
        path: path.clone(),
        source,
    })?;
    written.files.push(path);
    Ok(())
}

fn json(value: &impl Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn final_row(cell: &LoadedCell) -> Result<FinalRow, MetricsError> {
    let config = &cell.result.config;
    let round = FINAL_ROUND.min(config.rounds);
    let BandPoint { mean, se, runs, .. } = cooperation_at(&cell.result, round)?;
    Ok(FinalRow {
        cell: cell.id.clone(),
        regime: cell.coords.as_ref().map(|c| c.regime.clone()),
        k: config.topology.k,
        bc_ratio: config.params.bc_ratio,
        class: threshold_class(config.params.bc_ratio, config.topology.k),
        round,
        mean,
        se,
        runs,
    })
}

fn payoff_rows(cell: &str, class: &str, series: &SeriesWithBand, out: &mut String) {
    for p in &series.points {
        writeln!(out, "{cell},{class},{},{},{},{}", p.round, p.mean, opt(p.se), p.runs).unwrap();
    }
}

/// Writes the requested metrics for every cell with completed repetitions.
/// Stimulus output is only produced when some cell is a stimulus cell.
pub fn write_metrics(cells: &[LoadedCell], which: &[Which], out: &Path) -> Result<Written, MetricsCmdError> {
    fs::create_dir_all(out).map_err(|source| StoreError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut written = Written::default();
    let usable: Vec<&LoadedCell> = cells.iter().filter(|c| c.result.completed().next().is_some()).collect();
    written.skipped_cells = cells
        .iter()
        .filter(|c| c.result.completed().next().is_none())
        .map(|c| c.id.clone())
        .collect();
    if usable.is_empty() {
        return Err(MetricsCmdError::NothingCompleted);
    }
    // Failed repetitions are excluded and every completed one has all rounds,
    // so the series calls below cannot fail on a usable cell.
    let series_err = |e: MetricsError| -> ! { panic!("series of a cell with completed repetitions: {e}") };

    if which.contains(&Which::Coop) {
        let mut csv = series_csv_header().to_string();
        for cell in &usable {
            csv += &series_csv(&cell.id, &cooperation_series(&cell.result).unwrap_or_else(|e| series_err(e)));
        }
        write(out, "coop.csv", &csv, &mut written)?;
    }
    if which.contains(&Which::Assort) {
        let mut csv = series_csv_header().to_string();
        for cell in &usable {
            csv += &series_csv(&cell.id, &assortment_series(&cell.result).unwrap_or_else(|e| series_err(e)));
        }
        write(out, "assort.csv", &csv, &mut written)?;
    }
    if which.contains(&Which::Payoffs) {
        let mut csv = String::from("cell,class,round,mean,se,runs\n");
        let mut summaries = Vec::new();
        for cell in &usable {
            let rel = relative_payoffs(&cell.result).unwrap_or_else(|e| series_err(e));
            payoff_rows(&cell.id, "C", &rel.cooperators, &mut csv);
            payoff_rows(&cell.id, "D", &rel.defectors, &mut csv);
            let (c, d) = class_samples(&cell.result).unwrap_or_else(|e| series_err(e));
            summaries.push(PayoffSummary {
                cell: cell.id.clone(),
                player_rounds: rel.player_rounds,
                players: rel.players,
                welch: welch_t_test(&c, &d).ok(),
            });
        }
        write(out, "payoffs.csv", &csv, &mut written)?;
        write(out, "payoffs.json", &json(&summaries), &mut written)?;
    }
    if which.contains(&Which::Final15) {
        let rows: Vec<FinalRow> = usable
            .iter()
            .map(|c| final_row(c).unwrap_or_else(|e| series_err(e)))
            .collect();
        let mut csv = String::from("cell,regime,k,bc_ratio,class,round,mean,se,runs\n");
        for r in &rows {
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                r.cell,
                r.regime.as_deref().unwrap_or(""),
                r.k,
                r.bc_ratio,
                r.class,
                r.round,
                r.mean,
                opt(r.se),
                r.runs
            )
            .unwrap();
        }
        write(out, "final15.csv", &csv, &mut written)?;
        write(out, "final15.json", &json(&rows), &mut written)?;
    }
    if which.contains(&Which::Stimulus) {
        let mut csv = String::from("cell,post_change_cooperators,round,focal_cooperation,runs\n");
        let mut any = false;
        for cell in &usable {
            let (Some(series), Some(spec)) = (focal_series(&cell.result), cell.result.config.stimulus.as_ref()) else {
                continue;
            };
            any = true;
            for (i, v) in series.cooperation.iter().enumerate() {
                writeln!(csv, "{},{},{},{v},{}", cell.id, spec.post_change_cooperators, i + 1, series.runs).unwrap();
            }
        }
        if any {
            write(out, "stimulus.csv", &csv, &mut written)?;
        }
    }
    Ok(written)
}
