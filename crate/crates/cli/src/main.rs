use std::io::{self, Write};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{ArgGroup, Parser, Subcommand};
use netdilemma_cli::commands::{self, ExitCode, PlanKind, RunArgs};
use netdilemma_cli::grid::Overrides;
use netdilemma_cli::metrics::Which;
use netdilemma_cli::server::{self, AppState};

#[derive(Parser)]
#[command(name = "netdilemma", version, about = "Networked prisoner's dilemma experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment, a grid or a stimulus plan into an output directory.
    #[command(group(ArgGroup::new("plan").required(true).args(["config", "grid", "stimulus"])))]
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        stimulus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides repetitions (runs for stimulus plans).
        #[arg(long)]
        repetitions: Option<u32>,
        /// Overrides rounds for every cell.
        #[arg(long)]
        rounds: Option<u32>,
        /// Cells run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Write metrics CSV/JSON for a results directory.
    Metrics {
        dir: PathBuf,
        /// Comma-separated subset of coop, assort, payoffs, final15, stimulus.
        #[arg(long, value_delimiter = ',', value_parser = parse_which)]
        which: Vec<Which>,
        /// Destination directory; defaults to <dir>/metrics.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute stored runs from their records and check they match.
    Replay { dir: PathBuf },
    /// Serve the HTTP control surface.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Where finished experiments are stored.
        #[arg(long, default_value = "data")]
        data: PathBuf,
    },
    /// Check config, grid or stimulus files without running them.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn parse_which(s: &str) -> Result<Which, String> {
    Which::parse(s).ok_or_else(|| format!("unknown metric {s:?}"))
}

fn serve(host: &str, port: u16, data: PathBuf) -> ExitCode {
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    runtime.block_on(async {
        let addr = format!("{host}:{port}");
        let listener = match server::bind(&addr).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("error: cannot bind {addr}: {e}");
                return ExitCode::Failure;
            }
        };
        eprintln!("listening on http://{addr}");
        match server::serve(listener, Arc::new(AppState::new(data))).await {
            Ok(()) => ExitCode::Ok,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::Failure
            }
        }
    })
}

fn main() {
    let cli = Cli::parse();
    let mut stdout = io::stdout().lock();
    let code = match cli.command {
        Command::Run {
            config,
            grid,
            stimulus,
            out,
            seed,
            repetitions,
            rounds,
            jobs,
        } => {
            let (kind, path) = match (config, grid, stimulus) {
                (Some(p), _, _) => (PlanKind::Config, p),
                (_, Some(p), _) => (PlanKind::Grid, p),
                (_, _, Some(p)) => (PlanKind::Stimulus, p),
                _ => unreachable!("clap requires one plan"),
            };
            let args = RunArgs {
                kind,
                path,
                out,
                overrides: Overrides {
                    seed,
                    repetitions,
                    rounds,
                },
                jobs,
            };
            commands::run(&args, &mut stdout)
        }
        Command::Metrics { dir, which, out } => {
            let which = if which.is_empty() { Which::ALL.to_vec() } else { which };
            let dest = out.unwrap_or_else(|| dir.join("metrics"));
            commands::metrics(&dir, &which, &dest, &mut stdout)
        }
        Command::Replay { dir } => commands::replay_dir(&dir, &mut stdout),
        Command::Serve { port, host, data } => serve(&host, port, data),
        Command::Validate { files } => commands::validate(&files, &mut stdout),
    };
    stdout.flush().ok();
    std::process::exit(code as i32);
}
