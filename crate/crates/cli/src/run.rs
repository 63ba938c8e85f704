//! Plan execution into a resumable output directory:
//!
//! ```text
//! manifest.json
//! cells/<id>/config.hash     sha256 of the canonical config JSON
//! cells/<id>/...             experiment store layout
//! ```
//!
//! A cell whose hash file matches its config is not run again.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use netdilemma::runner::store::{self, ExperimentSummary, StoreError};
use netdilemma::runner::{run_experiment, ExperimentConfig, RunContext, RunnerError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grid::{Cell, CellCoords};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cell {cell}: {source}")]
    Runner { cell: String, source: RunnerError },
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("serializable");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub id: String,
    pub hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<CellCoords>,
    pub n: usize,
    pub k: usize,
    pub bc_ratio: u32,
    pub rounds: u32,
    pub completed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub cells: usize,
    pub repetitions: usize,
    pub completed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub cells: Vec<CellEntry>,
    pub totals: Totals,
}

impl Manifest {
    pub fn path(out: &Path) -> PathBuf {
        out.join("manifest.json")
    }

    pub fn read(out: &Path) -> Result<Manifest, StoreError> {
        let path = Self::path(out);
        let text = fs::read_to_string(&path).map_err(|source| StoreError::Io {
            path: path.clone(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| StoreError::Parse {
            path,
            line: source.line(),
            source,
        })
    }

    fn write(&self, out: &Path) -> Result<(), StoreError> {
        let path = Self::path(out);
        let mut text = serde_json::to_string_pretty(self).expect("serializable");
        text.push('\n');
        fs::write(&path, text).map_err(|source| StoreError::Io { path, source })
    }
}

pub fn cell_dir(out: &Path, id: &str) -> PathBuf {
    out.join("cells").join(id)
}

/// What happened to each cell in this invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub ran: Vec<String>,
    pub skipped: Vec<String>,
    pub totals: Totals,
}

fn is_done(dir: &Path, hash: &str) -> bool {
    fs::read_to_string(dir.join("config.hash")).is_ok_and(|h| h.trim() == hash) && dir.join("status.json").exists()
}

fn run_cell(cell: &Cell, dir: &Path, hash: &str) -> Result<ExperimentSummary, RunError> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|source| StoreError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let result = run_experiment(&cell.config, &RunContext::default()).map_err(|source| RunError::Runner {
        cell: cell.id.clone(),
        source,
    })?;
    store::write_result(dir, &result)?;
    let hash_path = dir.join("config.hash");
    fs::write(&hash_path, format!("{hash}\n")).map_err(|source| StoreError::Io { path: hash_path, source })?;
    Ok(ExperimentSummary::of(&result))
}

fn read_summary(dir: &Path) -> Result<ExperimentSummary, StoreError> {
    let path = dir.join("status.json");
    let text = fs::read_to_string(&path).map_err(|source| StoreError::Io {
        path: path.clone(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| StoreError::Parse {
        path,
        line: source.line(),
        source,
    })
}

/// A cell's summary and whether it was skipped as up to date.
type CellOutcome = Result<(ExperimentSummary, bool), RunError>;

/// Runs every cell not already present in `out`, using up to `jobs` worker
/// threads, then writes the manifest. Finished cells stay on disk even if a
/// later cell fails.
pub fn run_plan(cells: &[Cell], out: &Path, jobs: usize) -> Result<RunReport, RunError> {
    fs::create_dir_all(out.join("cells")).map_err(|source| StoreError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let next = AtomicUsize::new(0);
    let outcomes: Mutex<Vec<Option<CellOutcome>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, cells.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cell) = cells.get(i) else { break };
                let dir = cell_dir(out, &cell.id);
                let hash = config_hash(&cell.config);
                let outcome = if is_done(&dir, &hash) {
                    read_summary(&dir).map(|s| (s, true)).map_err(RunError::from)
                } else {
                    run_cell(cell, &dir, &hash).map(|s| (s, false))
                };
                outcomes.lock().unwrap()[i] = Some(outcome);
            });
        }
    });

    let mut report = RunReport {
        ran: Vec::new(),
        skipped: Vec::new(),
        totals: Totals::default(),
    };
    let mut entries = Vec::new();
    let mut first_error = None;
    for (cell, outcome) in cells.iter().zip(outcomes.into_inner().unwrap()) {
        match outcome.expect("every cell visited") {
            Ok((summary, skipped)) => {
                if skipped {
                    report.skipped.push(cell.id.clone());
                } else {
                    report.ran.push(cell.id.clone());
                }
                entries.push(CellEntry {
                    id: cell.id.clone(),
                    hash: config_hash(&cell.config),
                    coords: cell.coords.clone(),
                    n: cell.config.topology.n,
                    k: cell.config.topology.k,
                    bc_ratio: cell.config.params.bc_ratio,
                    rounds: cell.config.rounds,
                    completed: summary.completed,
                    failed: summary.failed,
                });
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    report.totals = Totals {
        cells: entries.len(),
        repetitions: entries.iter().map(|e| e.completed + e.failed).sum(),
        completed: entries.iter().map(|e| e.completed).sum(),
        failed: entries.iter().map(|e| e.failed).sum(),
    };
    Manifest {
        cells: entries,
        totals: report.totals,
    }
    .write(out)?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
