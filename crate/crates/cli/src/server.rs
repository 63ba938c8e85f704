//! HTTP control surface for live experiments.
//!
//! Every experiment runs on its own thread; handlers only read its event log
//! and poke its [`ControlSurface`]. Finished results are written under the
//! data directory as `<id>/`.

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use netdilemma::agents::SubmitError;
use netdilemma::game::Action;
use netdilemma::llm::InjectError;
use netdilemma::metrics::{cooperation_series, SeriesWithBand};
use netdilemma::runner::store::{self, ExperimentSummary};
use netdilemma::runner::{run_experiment, ControlError, ExperimentConfig, RunContext};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum LiveState {
    Running,
    Finished { summary: ExperimentSummary },
    Error { message: String },
}

pub struct Live {
    pub id: String,
    pub config: ExperimentConfig,
    pub ctx: RunContext,
    state: Mutex<LiveState>,
    result: Mutex<Option<netdilemma::ExperimentResult>>,
}

impl Live {
    pub fn state(&self) -> LiveState {
        self.state.lock().unwrap().clone()
    }
}

#[derive(Default)]
pub struct AppState {
    pub data_dir: PathBuf,
    experiments: Mutex<BTreeMap<String, Arc<Live>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(data_dir: PathBuf) -> Self {
        AppState {
            data_dir,
            ..Default::default()
        }
    }

    fn get(&self, id: &str) -> Option<Arc<Live>> {
        self.experiments.lock().unwrap().get(id).cloned()
    }

    /// Starts `config` in the background and returns its id.
    pub fn start(&self, config: ExperimentConfig) -> Arc<Live> {
        let id = format!("exp-{:04}", self.next_id.fetch_add(1, Ordering::SeqCst) + 1);
        let live = Arc::new(Live {
            id: id.clone(),
            config,
            ctx: RunContext::default(),
            state: Mutex::new(LiveState::Running),
            result: Mutex::new(None),
        });
        self.experiments.lock().unwrap().insert(id.clone(), live.clone());
        let dir = self.data_dir.join(&id);
        let worker = live.clone();
        std::thread::spawn(move || {
            let state = match run_experiment(&worker.config, &worker.ctx) {
                Ok(result) => {
                    let state = match store::write_result(&dir, &result) {
                        Ok(()) => LiveState::Finished {
                            summary: ExperimentSummary::of(&result),
                        },
                        Err(e) => LiveState::Error { message: e.to_string() },
                    };
                    *worker.result.lock().unwrap() = Some(result);
                    state
                }
                Err(e) => LiveState::Error { message: e.to_string() },
            };
            *worker.state.lock().unwrap() = state;
        });
        live
    }
}

type Shared = Arc<AppState>;

fn error(status: StatusCode, message: impl ToString) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, format!("no experiment {id}"))
}

async fn create(State(app): State<Shared>, body: String) -> Response {
    match ExperimentConfig::from_json(&body) {
        Ok(config) => {
            let live = app.start(config);
            (StatusCode::CREATED, Json(json!({ "id": live.id }))).into_response()
        }
        Err(e) => (
            StatusCode::UNPROCESSABLE_ENTITY,
            Json(json!({ "error": e.message, "field": e.field })),
        )
            .into_response(),
    }
}

#[derive(Serialize)]
struct ListItem {
    id: String,
    #[serde(flatten)]
    state: LiveState,
    n: usize,
    rounds: u32,
    repetitions: u32,
}

async fn list(State(app): State<Shared>) -> Json<Vec<ListItem>> {
    let experiments = app.experiments.lock().unwrap();
    Json(
        experiments
            .values()
            .map(|live| ListItem {
                id: live.id.clone(),
                state: live.state(),
                n: live.config.topology.n,
                rounds: live.config.rounds,
                repetitions: live.config.repetitions,
            })
            .collect(),
    )
}

#[derive(Deserialize)]
struct DetailQuery {
    repetition: Option<usize>,
}

async fn detail(State(app): State<Shared>, Path(id): Path<String>, Query(q): Query<DetailQuery>) -> Response {
    let Some(live) = app.get(&id) else { return not_found(&id) };
    let control = &live.ctx.control;
    let pending: Vec<Value> = control
        .humans
        .pending()
        .into_iter()
        .map(|(agent, round)| json!({ "agent": agent, "round": round }))
        .collect();
    let mut body = json!({
        "id": live.id,
        "config": live.config,
        "events": live.ctx.events.len(),
        "pending_inputs": pending,
        "humans": control.humans.snapshot(),
        "dialogues": control.dialogue_statuses(),
    });
    let state = serde_json::to_value(live.state()).expect("serializable");
    body.as_object_mut().unwrap().extend(state.as_object().unwrap().clone());

    let result = live.result.lock().unwrap();
    if let Some(result) = result.as_ref() {
        let series: Option<SeriesWithBand> = cooperation_series(result).ok();
        body["cooperation"] = json!(series);
        if let Some(i) = q.repetition {
            let Some(rep) = result.repetitions.get(i) else {
                return error(StatusCode::NOT_FOUND, format!("no repetition {i}"));
            };
            body["repetition"] = json!({
                "index": rep.index,
                "seed": rep.seed,
                "status": rep.status,
                "records": rep.records,
                "transcript": rep.transcript,
            });
        }
    } else if let Some((repetition, transcript)) = control.live_transcript() {
        body["live"] = json!({ "repetition": repetition, "transcript": transcript });
    }
    Json(body).into_response()
}

#[derive(Deserialize)]
struct EventsQuery {
    since: Option<u64>,
}

/// Ordered server-sent events. Each event id is its sequence number, so a
/// reconnecting client resumes with `Last-Event-ID` or `?since=`. The stream
/// ends after `experiment_finished`.
async fn events(
    State(app): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, Response> {
    let live = app.get(&id).ok_or_else(|| not_found(&id))?;
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok())
        .map(|last| last + 1);
    let cursor = q.since.or(resume).unwrap_or(0);

    let stream = stream::unfold((live, cursor, false), |(live, cursor, done)| async move {
        if done {
            return None;
        }
        loop {
            let batch = {
                let log = live.ctx.events.clone();
                tokio::task::spawn_blocking(move || log.wait_since(cursor, Duration::from_millis(250)))
                    .await
                    .unwrap_or_default()
            };
            if let Some(event) = batch.into_iter().next() {
                let finished = matches!(event.kind, netdilemma::runner::EventKind::ExperimentFinished { .. });
                let data = serde_json::to_string(&event).expect("serializable");
                let sse = SseEvent::default().id(event.seq.to_string()).data(data);
                return Some((Ok(sse), (live, cursor + 1, finished)));
            }
            if !matches!(live.state(), LiveState::Running) && live.ctx.events.len() as u64 <= cursor {
                return None;
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionBody {
    action: Action,
}

async fn submit_action(
    State(app): State<Shared>,
    Path((id, agent)): Path<(String, usize)>,
    body: String,
) -> Response {
    let Some(live) = app.get(&id) else { return not_found(&id) };
    let action = match serde_json::from_str::<ActionBody>(&body) {
        Ok(b) => b.action,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e),
    };
    match live.ctx.control.humans.submit(agent, action) {
        Ok(round) => Json(json!({ "agent": agent, "round": round, "action": action })).into_response(),
        Err(e @ SubmitError::UnknownAgent(_)) => error(StatusCode::NOT_FOUND, e),
        Err(e) => error(StatusCode::CONFLICT, e),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InjectBody {
    content: String,
}

async fn inject(State(app): State<Shared>, Path((id, agent)): Path<(String, usize)>, body: String) -> Response {
    let Some(live) = app.get(&id) else { return not_found(&id) };
    let content = match serde_json::from_str::<InjectBody>(&body) {
        Ok(b) if !b.content.trim().is_empty() => b.content,
        Ok(_) => return error(StatusCode::UNPROCESSABLE_ENTITY, "content must not be empty"),
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e),
    };
    match live.ctx.control.inject(agent, content) {
        Ok(()) => (StatusCode::ACCEPTED, Json(json!({ "agent": agent }))).into_response(),
        Err(e @ ControlError::UnknownDialogue(_)) => error(StatusCode::NOT_FOUND, e),
        Err(e @ ControlError::Inject(InjectError::NotFlagged)) => error(StatusCode::CONFLICT, e),
        Err(e @ ControlError::Inject(InjectError::Exhausted)) => error(StatusCode::GONE, e),
    }
}

async fn abort(State(app): State<Shared>, Path(id): Path<String>) -> Response {
    let Some(live) = app.get(&id) else { return not_found(&id) };
    live.ctx.control.abort();
    (StatusCode::ACCEPTED, Json(json!({ "id": id, "aborted": true }))).into_response()
}

pub fn router(app: Shared) -> Router {
    Router::new()
        .route("/experiments", post(create).get(list))
        .route("/experiments/{id}", get(detail))
        .route("/experiments/{id}/events", get(events))
        .route("/experiments/{id}/agents/{aid}/action", post(submit_action))
        .route("/experiments/{id}/dialogues/{aid}/inject", post(inject))
        .route("/experiments/{id}/abort", post(abort))
        .with_state(app)
}

/// Binds first so a busy port is reported before anything runs.
pub async fn bind(addr: &str) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}

pub async fn serve(listener: TcpListener, app: Shared) -> std::io::Result<()> {
    axum::serve(listener, router(app)).await
}
