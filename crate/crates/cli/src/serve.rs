//! HTTP service hosting one learning run and its oversight queue.
//!
//! Routes:
//! - `GET /state` world summary
//! - `GET /proposals?state=pending|decided|all`
//! - `POST /proposals/{id}/decision`
//! - `GET /report` run status and, once finished, the task report
//! - `GET /episodes` episode log
//! - `GET /events` server-sent loop transitions and proposal changes
//! - `GET /preferences`, `PUT /preferences`

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use kextract_core::agent::{Agent, LoopEvent, TaskReport, WorldSummary};
use kextract_core::memory::{EpisodeLog, Lexicon};
use kextract_core::oversight::{
    Decision, OversightError, OversightQueue, PreferenceDocument, PreferenceModel, ProposalId,
    ProposalState, RejectReason,
};
use kextract_core::parser::{parse_goal, GoalExpr};
use kextract_core::verify::ground_with_focus;
use kextract_core::world::{Embodiment, WorldState};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast;

pub const API_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Idle,
    Running,
    Finished,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSnapshot {
    pub v: u32,
    pub status: RunStatus,
    pub report: Option<TaskReport>,
    pub error: Option<String>,
}

/// One server-sent event: its name and JSON payload.
#[derive(Debug, Clone)]
pub struct FeedItem {
    pub name: String,
    pub data: String,
}

pub struct ServeState {
    pub queue: Arc<OversightQueue>,
    pub lexicon: Lexicon,
    /// Entities never appear or vanish, so modified goals ground against the start state.
    pub initial_world: WorldState,
    pub world: RwLock<WorldSummary>,
    pub run: RwLock<RunSnapshot>,
    pub prefs: RwLock<Option<PreferenceDocument>>,
    pub prefs_path: Option<PathBuf>,
    pub episodes_path: PathBuf,
    pub feed: broadcast::Sender<FeedItem>,
}

impl ServeState {
    pub fn new(
        queue: Arc<OversightQueue>,
        lexicon: Lexicon,
        world: WorldState,
        prefs: Option<PreferenceDocument>,
        prefs_path: Option<PathBuf>,
        episodes_path: PathBuf,
    ) -> Arc<Self> {
        let (feed, _) = broadcast::channel(256);
        let state = Arc::new(Self {
            queue: queue.clone(),
            lexicon,
            world: RwLock::new(WorldSummary::from(&world)),
            initial_world: world,
            run: RwLock::new(RunSnapshot {
                v: API_VERSION,
                status: RunStatus::Idle,
                report: None,
                error: None,
            }),
            prefs: RwLock::new(prefs),
            prefs_path,
            episodes_path,
            feed,
        });
        let weak = Arc::downgrade(&state);
        queue.on_change(move |p| {
            if let Some(s) = weak.upgrade() {
                s.publish("proposal", serde_json::to_string(p).expect("proposal serializes"));
            }
        });
        state
    }

    fn publish(&self, name: &str, data: String) {
        // no subscribers is fine
        let _ = self.feed.send(FeedItem {
            name: name.to_string(),
            data,
        });
    }

    fn on_loop_event(&self, e: &LoopEvent) {
        if let LoopEvent::Executed { world, .. } = e {
            *self.world.write().unwrap() = world.clone();
        }
        let data = serde_json::to_value(e).expect("event serializes");
        let name = data["event"].as_str().unwrap_or("event").to_string();
        self.publish(&name, data.to_string());
    }
}

/// Run `task` on a background thread, streaming its events into `state`.
pub fn spawn_run(
    state: Arc<ServeState>,
    mut agent: Agent,
    mut world: WorldState,
    emb: Embodiment,
    task: String,
) -> JoinHandle<()> {
    let events = state.clone();
    agent.on_event(move |e| events.on_loop_event(e));
    state.run.write().unwrap().status = RunStatus::Running;
    std::thread::spawn(move || {
        let result = agent.run_task(&mut world, &emb, &task);
        *state.world.write().unwrap() = WorldSummary::from(&world);
        let snapshot = {
            let mut run = state.run.write().unwrap();
            match result {
                Ok(report) => {
                    run.status = RunStatus::Finished;
                    run.report = Some(report);
                }
                Err(e) => {
                    run.status = RunStatus::Failed;
                    run.error = Some(e.to_string());
                }
            }
            run.clone()
        };
        state.publish("run_finished", serde_json::to_string(&snapshot).expect("snapshot serializes"));
    })
}

pub fn router(state: Arc<ServeState>) -> Router {
    Router::new()
        .route("/state", get(get_state))
        .route("/proposals", get(list_proposals))
        .route("/proposals/{id}/decision", post(post_decision))
        .route("/report", get(get_report))
        .route("/episodes", get(get_episodes))
        .route("/events", get(events))
        .route("/preferences", get(get_preferences).put(put_preferences))
        .with_state(state)
}

struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({"v": API_VERSION, "error": message.into()}),
        }
    }

    fn fields(message: &str, fields: BTreeMap<&'static str, String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            body: json!({"v": API_VERSION, "error": message, "fields": fields}),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

async fn get_state(State(s): State<Arc<ServeState>>) -> Json<Value> {
    let world = s.world.read().unwrap().clone();
    Json(json!({"v": API_VERSION, "world": world}))
}

#[derive(Deserialize)]
struct ProposalQuery {
    state: Option<String>,
}

async fn list_proposals(
    State(s): State<Arc<ServeState>>,
    Query(q): Query<ProposalQuery>,
) -> Result<Json<Value>, ApiError> {
    let filter = match q.state.as_deref() {
        None | Some("all") => None,
        Some("pending") => Some(ProposalState::Pending),
        Some("decided") => Some(ProposalState::Decided),
        Some(other) => {
            let mut f = BTreeMap::new();
            f.insert("state", format!("unknown state `{other}`; expected pending, decided or all"));
            return Err(ApiError::fields("bad query", f));
        }
    };
    Ok(Json(json!({"v": API_VERSION, "proposals": s.queue.list(filter)})))
}

/// Validate a decision body. `modify` takes either a `sentence` or a
/// structured `goal`; either must parse and ground for the proposal's object.
fn parse_decision(body: &[u8], s: &ServeState, id: ProposalId) -> Result<Decision, ApiError> {
    let mut fields = BTreeMap::new();
    let malformed = |fields| ApiError::fields("malformed decision", fields);
    let value: Value = match serde_json::from_slice(body) {
        Ok(v @ Value::Object(_)) => v,
        Ok(_) => {
            fields.insert("body", "expected a JSON object".to_string());
            return Err(malformed(fields));
        }
        Err(e) => {
            fields.insert("body", format!("invalid JSON: {e}"));
            return Err(malformed(fields));
        }
    };
    let decision = match value.get("decision").and_then(Value::as_str) {
        Some("accept") => Decision::Accept,
        Some("reject") => match value.get("reason").map(|r| serde_json::from_value::<RejectReason>(r.clone())) {
            Some(Ok(reason)) => Decision::reject(reason),
            Some(Err(_)) => {
                fields.insert("reason", "expected nonsensical or wrong_preference".to_string());
                return Err(malformed(fields));
            }
            None => {
                fields.insert("reason", "required for reject".to_string());
                return Err(malformed(fields));
            }
        },
        Some("modify") => {
            let goal: GoalExpr = if let Some(sentence) = value.get("sentence") {
                let Some(sentence) = sentence.as_str() else {
                    fields.insert("sentence", "expected a string".to_string());
                    return Err(malformed(fields));
                };
                match parse_goal(sentence, &s.lexicon) {
                    Ok(g) => g,
                    Err(e) => {
                        fields.insert("sentence", e.to_string());
                        return Err(malformed(fields));
                    }
                }
            } else if let Some(goal) = value.get("goal") {
                match serde_json::from_value(goal.clone()) {
                    Ok(g) => g,
                    Err(e) => {
                        fields.insert("goal", e.to_string());
                        return Err(malformed(fields));
                    }
                }
            } else {
                fields.insert("sentence", "modify needs a sentence or a goal".to_string());
                return Err(malformed(fields));
            };
            let object = s.queue.get(id).map(|p| p.object);
            if let Err(e) = ground_with_focus(&goal, &s.initial_world, object.as_ref()) {
                let key = if value.get("sentence").is_some() { "sentence" } else { "goal" };
                fields.insert(key, e.category().describe());
                return Err(malformed(fields));
            }
            Decision::Modify { goal }
        }
        Some(other) => {
            fields.insert("decision", format!("unknown decision `{other}`; expected accept, reject or modify"));
            return Err(malformed(fields));
        }
        None => {
            fields.insert("decision", "required".to_string());
            return Err(malformed(fields));
        }
    };
    Ok(decision)
}

async fn post_decision(
    State(s): State<Arc<ServeState>>,
    Path(id): Path<u64>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let id = ProposalId(id);
    if s.queue.get(id).is_none() {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown proposal {id}")));
    }
    let decision = parse_decision(&body, &s, id)?;
    match s.queue.decide(id, decision) {
        Ok(p) => Ok(Json(json!({"v": API_VERSION, "proposal": p}))),
        Err(e @ OversightError::AlreadyDecided(_)) => {
            Err(ApiError::new(StatusCode::CONFLICT, e.to_string()))
        }
        Err(e @ OversightError::UnknownProposal(_)) => {
            Err(ApiError::new(StatusCode::NOT_FOUND, e.to_string()))
        }
        Err(e @ OversightError::NeedsGoal) => {
            let mut f = BTreeMap::new();
            f.insert("decision", e.to_string());
            Err(ApiError::fields("malformed decision", f))
        }
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}

async fn get_report(State(s): State<Arc<ServeState>>) -> Json<RunSnapshot> {
    Json(s.run.read().unwrap().clone())
}

async fn get_episodes(State(s): State<Arc<ServeState>>) -> Result<Json<Value>, ApiError> {
    let episodes = if s.episodes_path.exists() {
        EpisodeLog::load(&s.episodes_path)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    } else {
        Vec::new()
    };
    Ok(Json(json!({"v": API_VERSION, "episodes": episodes})))
}

async fn events(
    State(s): State<Arc<ServeState>>,
) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = s.feed.subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(item) => {
                    let ev = Event::default().event(item.name).data(item.data);
                    return Some((Ok(ev), rx));
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("event stream subscriber lagged by {n} events");
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

async fn get_preferences(
    State(s): State<Arc<ServeState>>,
) -> Result<Json<PreferenceDocument>, ApiError> {
    s.prefs
        .read()
        .unwrap()
        .clone()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no preferences loaded"))
}

async fn put_preferences(
    State(s): State<Arc<ServeState>>,
    body: Bytes,
) -> Result<Json<PreferenceDocument>, ApiError> {
    let doc: PreferenceDocument = serde_json::from_slice(&body).map_err(|e| {
        let mut f = BTreeMap::new();
        f.insert("body", e.to_string());
        ApiError::fields("malformed preferences", f)
    })?;
    let model = PreferenceModel::from_document(doc, &s.initial_world, &s.lexicon).map_err(|e| {
        let mut f = BTreeMap::new();
        f.insert("preferences", e.to_string());
        ApiError::fields("invalid preferences", f)
    })?;
    let doc = model.document().clone();
    if let Some(path) = &s.prefs_path {
        let text = serde_json::to_string_pretty(&doc).expect("preferences serialize");
        std::fs::write(path, text + "\n")
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    }
    *s.prefs.write().unwrap() = Some(doc.clone());
    s.publish("preferences", serde_json::to_string(&doc).expect("preferences serialize"));
    Ok(Json(doc))
}
