//! Subcommand bodies. Each writes its report to `out` and returns the exit
//! code, so they can be driven in-process.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use netdilemma::runner::{replay, store, RunnerError};

use crate::grid::{Overrides, PlanSource};
use crate::metrics::{load_results, write_metrics, Which};
use crate::run::{run_plan, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Failure = 1,
    Invalid = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    Config,
    Grid,
    Stimulus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunArgs {
    pub kind: PlanKind,
    pub path: PathBuf,
    pub out: PathBuf,
    pub overrides: Overrides,
    pub jobs: usize,
}

fn load_plan(kind: Option<PlanKind>, path: &Path) -> Result<PlanSource, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let parsed = match kind {
        Some(PlanKind::Config) => PlanSource::parse_experiment(&text),
        Some(PlanKind::Grid) => PlanSource::parse_grid(&text),
        Some(PlanKind::Stimulus) => PlanSource::parse_stimulus(&text),
        None => PlanSource::detect(&text),
    };
    parsed.map_err(|e| format!("{}: {e}", path.display()))
}

pub fn run(args: &RunArgs, out: &mut dyn Write) -> ExitCode {
    let mut plan = match load_plan(Some(args.kind), &args.path) {
        Ok(p) => p,
        Err(e) => return invalid(out, e),
    };
    plan.apply(args.overrides);
    let cells = match plan.cells() {
        Ok(c) => c,
        Err(e) => return invalid(out, format!("{}: {e}", args.path.display())),
    };
    match run_plan(&cells, &args.out, args.jobs) {
        Ok(report) => {
            for id in &report.ran {
                writeln!(out, "ran {id}").ok();
            }
            for id in &report.skipped {
                writeln!(out, "skipped {id} (up to date)").ok();
            }
            let t = report.totals;
            writeln!(
                out,
                "{} cells, {} repetitions: {} completed, {} failed",
                t.cells, t.repetitions, t.completed, t.failed
            )
            .ok();
            if t.failed == 0 {
                ExitCode::Ok
            } else {
                ExitCode::Failure
            }
        }
        Err(RunError::Runner {
            cell,
            source: RunnerError::Config(e),
        }) => invalid(out, format!("cell {cell}: {e}")),
        Err(e) => {
            writeln!(out, "error: {e}").ok();
            ExitCode::Failure
        }
    }
}

fn invalid(out: &mut dyn Write, message: String) -> ExitCode {
    writeln!(out, "invalid: {message}").ok();
    ExitCode::Invalid
}

pub fn validate(paths: &[PathBuf], out: &mut dyn Write) -> ExitCode {
    let mut code = ExitCode::Ok;
    for path in paths {
        match load_plan(None, path).and_then(|p| p.cells().map_err(|e| format!("{}: {e}", path.display()))) {
            Ok(cells) => {
                let reps: u32 = cells.iter().map(|c| c.config.repetitions).sum();
                writeln!(out, "ok {}: {} cells, {reps} repetitions", path.display(), cells.len()).ok();
            }
            Err(e) => code = invalid(out, e),
        }
    }
    code
}

pub fn metrics(dir: &Path, which: &[Which], dest: &Path, out: &mut dyn Write) -> ExitCode {
    let written = load_results(dir).and_then(|cells| write_metrics(&cells, which, dest));
    match written {
        Ok(w) => {
            for id in &w.skipped_cells {
                writeln!(out, "skipped {id}: no completed repetitions").ok();
            }
            for file in &w.files {
                let name = file.strip_prefix(dest).unwrap_or(file);
                writeln!(out, "wrote {}", name.display()).ok();
            }
            ExitCode::Ok
        }
        Err(e) => {
            writeln!(out, "error: {e}").ok();
            ExitCode::Failure
        }
    }
}

pub fn replay_dir(dir: &Path, out: &mut dyn Write) -> ExitCode {
    let cells = match load_results(dir) {
        Ok(c) => c,
        Err(e) => {
            writeln!(out, "error: {e}").ok();
            return ExitCode::Failure;
        }
    };
    let mut code = ExitCode::Ok;
    for cell in &cells {
        match replay(&cell.result) {
            Ok(_) => {
                writeln!(out, "ok {}: {} repetitions identical", cell.id, cell.result.repetitions.len()).ok();
            }
            Err(RunnerError::Integrity {
                repetition,
                round,
                detail,
            }) => {
                writeln!(
                    out,
                    "diverged {}: {} round {round}: {detail}",
                    cell.id,
                    store::repetition_dir(Path::new(""), repetition).display()
                )
                .ok();
                code = ExitCode::Failure;
            }
            Err(e) => {
                writeln!(out, "error {}: {e}", cell.id).ok();
                code = ExitCode::Failure;
            }
        }
    }
    code
}
