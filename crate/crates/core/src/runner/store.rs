//! On-disk layout of a finished experiment:
//!
//! ```text
//! config.json
//! status.json                  summary of every repetition
//! rep-000/records.jsonl        one round record per line
//! rep-000/transcripts.jsonl    dialogue and graph lines
//! rep-000/events.jsonl
//! rep-000/status.json
//! ```

use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::ExperimentConfig;
use super::experiment::{ExperimentResult, RepetitionResult, RepetitionStatus};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Layout(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSummary {
    pub index: usize,
    pub seed: u64,
    pub rounds: usize,
    #[serde(flatten)]
    pub status: RepetitionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub completed: usize,
    pub failed: usize,
    pub repetitions: Vec<RepetitionSummary>,
}

impl ExperimentSummary {
    pub fn of(result: &ExperimentResult) -> Self {
        let repetitions: Vec<_> = result.repetitions.iter().map(summary).collect();
        let completed = repetitions.iter().filter(|r| r.status.is_completed()).count();
        ExperimentSummary {
            completed,
            failed: repetitions.len() - completed,
            repetitions,
        }
    }
}

fn summary(rep: &RepetitionResult) -> RepetitionSummary {
    RepetitionSummary {
        index: rep.index,
        seed: rep.seed,
        rounds: rep.records.len(),
        status: rep.status.clone(),
    }
}

pub fn repetition_dir(root: &Path, index: usize) -> PathBuf {
    root.join(format!("rep-{index:03}"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| StoreError::Parse {
        path: path.to_path_buf(),
        line: source.line(),
        source,
    })
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), StoreError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item).expect("serializable");
        out.write_all(b"\n").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|source| StoreError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(items)
}

/// Writes one repetition's directory.
pub fn write_repetition(root: &Path, rep: &RepetitionResult) -> Result<(), StoreError> {
    let dir = repetition_dir(root, rep.index);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_jsonl(&dir.join("records.jsonl"), &rep.records)?;
    write_jsonl(&dir.join("transcripts.jsonl"), &rep.transcript)?;
    write_jsonl(&dir.join("events.jsonl"), &rep.events)?;
    write_json(&dir.join("status.json"), &summary(rep))
}

pub fn write_result(root: &Path, result: &ExperimentResult) -> Result<(), StoreError> {
    fs::create_dir_all(root).map_err(io_err(root))?;
    write_json(&root.join("config.json"), &result.config)?;
    for rep in &result.repetitions {
        write_repetition(root, rep)?;
    }
    write_json(&root.join("status.json"), &ExperimentSummary::of(result))
}

pub fn read_repetition(root: &Path, index: usize) -> Result<RepetitionResult, StoreError> {
    let dir = repetition_dir(root, index);
    let summary: RepetitionSummary = read_json(&dir.join("status.json"))?;
    if summary.index != index {
        return Err(StoreError::Layout(format!(
            "{} holds repetition {}",
            dir.display(),
            summary.index
        )));
    }
    Ok(RepetitionResult {
        index,
        seed: summary.seed,
        status: summary.status,
        records: read_jsonl(&dir.join("records.jsonl"))?,
        transcript: read_jsonl(&dir.join("transcripts.jsonl"))?,
        events: read_jsonl(&dir.join("events.jsonl"))?,
    })
}

pub fn read_config(root: &Path) -> Result<ExperimentConfig, StoreError> {
    read_json(&root.join("config.json"))
}

/// Loads a result directory. Repetition directories must be contiguous
/// from `rep-000`.
pub fn read_result(root: &Path) -> Result<ExperimentResult, StoreError> {
    let config = read_config(root)?;
    let mut repetitions = Vec::new();
    while repetition_dir(root, repetitions.len()).join("status.json").exists() {
        repetitions.push(read_repetition(root, repetitions.len())?);
    }
    if repetitions.is_empty() {
        return Err(StoreError::Layout(format!("{} has no repetitions", root.display())));
    }
    Ok(ExperimentResult { config, repetitions })
}
