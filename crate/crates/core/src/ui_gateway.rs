//! HTTP session service for human performers.
//!
//! Routes: `POST /sessions`, `GET /sessions/{id}/state`, `POST /sessions/{id}/action`,
//! `POST /sessions/{id}/ask`, `POST /sessions/{id}/finish`. Errors are `{code, message}`.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::services::ServeDir;
use uuid::Uuid;

use crate::dialog::{
    append_turn_at, finish_episode, DialogHistory, EpisodeOptions, EpisodeResult, HelpRequest, Protocol, Provenance,
    Responder, Termination, Turn,
};
use crate::tasks::TaskInstance;
use crate::world::{Action, NavState, NodeIdx, WorldGraph};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    IllegalMove(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl GatewayError {
    pub fn status(&self) -> StatusCode {
        match self {
            GatewayError::NotFound(_) => StatusCode::NOT_FOUND,
            GatewayError::Invalid(_) | GatewayError::IllegalMove(_) => StatusCode::BAD_REQUEST,
            GatewayError::Conflict(_) => StatusCode::CONFLICT,
            GatewayError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::NotFound(_) => "not_found",
            GatewayError::Invalid(_) => "invalid_request",
            GatewayError::IllegalMove(_) => "illegal_move",
            GatewayError::Conflict(_) => "conflict",
            GatewayError::Internal(_) => "internal",
        }
    }
}

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let body = ErrorBody { code: self.code().into(), message: self.to_string() };
        (self.status(), Json(body)).into_response()
    }
}

impl From<JsonRejection> for GatewayError {
    fn from(r: JsonRejection) -> Self {
        GatewayError::Invalid(r.body_text())
    }
}

type GResult<T> = Result<T, GatewayError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Stopped,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratings {
    pub naturalness: f64,
    pub faithfulness: f64,
}

impl Ratings {
    pub fn validate(&self) -> GResult<()> {
        for (name, v) in [("naturalness", self.naturalness), ("faithfulness", self.faithfulness)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(GatewayError::Invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

pub struct Session {
    pub id: Uuid,
    pub task: TaskInstance,
    pub goal: NodeIdx,
    pub helper: String,
    pub state: NavState,
    pub dialog: DialogHistory,
    pub status: SessionStatus,
    pub started_at: u64,
    pub finished_at: Option<u64>,
    pub ratings: Option<Ratings>,
    pub result: Option<EpisodeResult>,
}

/// Persisted record of a finished session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub helper: String,
    pub started_at: u64,
    pub finished_at: u64,
    pub ratings: Ratings,
    pub result: EpisodeResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborView {
    pub id: String,
    pub direction: String,
    pub room: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub session_id: String,
    pub task_id: String,
    pub target: String,
    pub helper: String,
    pub current_room: String,
    pub current_objects: Vec<String>,
    pub neighbors: Vec<NeighborView>,
    pub steps: usize,
    pub distance_traveled: f64,
    pub dialog: Vec<Turn>,
    pub status: SessionStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<EpisodeResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratings: Option<Ratings>,
}

/// Eight-point compass bearing from `(dx, dy)` with north along +y.
pub fn compass(dx: f64, dy: f64) -> &'static str {
    const NAMES: [&str; 8] = ["east", "northeast", "north", "northwest", "west", "southwest", "south", "southeast"];
    let angle = dy.atan2(dx).to_degrees().rem_euclid(360.0);
    NAMES[((angle + 22.5) / 45.0) as usize % 8]
}

/// Shared service state.
pub struct Gateway {
    pub worlds: HashMap<String, WorldGraph>,
    pub tasks: HashMap<String, TaskInstance>,
    pub helpers: HashMap<String, Arc<dyn Responder>>,
    pub episode: EpisodeOptions,
    pub results_log: Option<PathBuf>,
    sessions: Mutex<HashMap<Uuid, Arc<Mutex<Session>>>>,
    log_lock: Mutex<()>,
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Gateway {
    pub fn new(
        worlds: HashMap<String, WorldGraph>,
        tasks: impl IntoIterator<Item = TaskInstance>,
        helpers: HashMap<String, Arc<dyn Responder>>,
        episode: EpisodeOptions,
        results_log: Option<PathBuf>,
    ) -> Self {
        Self {
            worlds,
            tasks: tasks.into_iter().map(|t| (t.task_id.clone(), t)).collect(),
            helpers,
            episode,
            results_log,
            sessions: Mutex::new(HashMap::new()),
            log_lock: Mutex::new(()),
        }
    }

    fn world(&self, id: &str) -> GResult<&WorldGraph> {
        self.worlds.get(id).ok_or_else(|| GatewayError::Internal(format!("world {id} is not loaded")))
    }

    fn session(&self, id: &str) -> GResult<Arc<Mutex<Session>>> {
        let uuid = Uuid::parse_str(id).map_err(|_| GatewayError::NotFound(format!("unknown session {id}")))?;
        lock(&self.sessions).get(&uuid).cloned().ok_or_else(|| GatewayError::NotFound(format!("unknown session {id}")))
    }

    pub fn session_count(&self) -> usize {
        lock(&self.sessions).len()
    }

    pub fn view(&self, s: &Session) -> GResult<StateView> {
        let g = self.world(&s.task.world_id)?;
        let here = g.node(s.state.current_node);
        let neighbors = g
            .neighbors(s.state.current_node)
            .iter()
            .map(|&(n, _)| {
                let vp = g.node(n);
                NeighborView {
                    id: vp.id.clone(),
                    direction: compass(vp.x - here.x, vp.y - here.y).into(),
                    room: vp.room.clone(),
                }
            })
            .collect();
        Ok(StateView {
            session_id: s.id.to_string(),
            task_id: s.task.task_id.clone(),
            target: s.task.target_label.clone(),
            helper: s.helper.clone(),
            current_room: here.room.clone(),
            current_objects: here.objects.clone(),
            neighbors,
            steps: s.state.moves(),
            distance_traveled: s.state.distance_traveled,
            dialog: s.dialog.turns.clone(),
            status: s.status,
            result: s.result.clone(),
            ratings: s.ratings,
        })
    }

    pub fn create_session(&self, task_id: &str, helper: &str) -> GResult<StateView> {
        let task = self.tasks.get(task_id).ok_or_else(|| GatewayError::NotFound(format!("unknown task {task_id}")))?;
        if !self.helpers.contains_key(helper) {
            return Err(GatewayError::NotFound(format!("unknown helper {helper}")));
        }
        let g = self.world(&task.world_id)?;
        let start = task.start_idx(g).map_err(|e| GatewayError::Internal(e.to_string()))?;
        let goal = task.goal_idx(g).map_err(|e| GatewayError::Internal(e.to_string()))?;
        let session = Session {
            id: Uuid::new_v4(),
            task: task.clone(),
            goal,
            helper: helper.to_string(),
            state: NavState::start(&task.world_id, start),
            dialog: DialogHistory::default(),
            status: SessionStatus::Active,
            started_at: now_secs(),
            finished_at: None,
            ratings: None,
            result: None,
        };
        let view = self.view(&session)?;
        lock(&self.sessions).insert(session.id, Arc::new(Mutex::new(session)));
        Ok(view)
    }

    pub fn state(&self, id: &str) -> GResult<StateView> {
        let s = self.session(id)?;
        let s = lock(&s);
        self.view(&s)
    }

    fn finalize(&self, s: &mut Session) -> GResult<()> {
        let g = self.world(&s.task.world_id)?;
        let result = finish_episode(
            g,
            &s.task,
            s.goal,
            Protocol::Rdi,
            s.helper.clone(),
            None,
            s.state.clone(),
            s.dialog.clone(),
            Termination::Stopped,
            &self.episode,
        )
        .map_err(|e| GatewayError::Internal(e.to_string()))?;
        s.result = Some(result);
        s.status = SessionStatus::Stopped;
        Ok(())
    }

    pub fn act(&self, id: &str, action: &ActionRequest) -> GResult<StateView> {
        let s = self.session(id)?;
        let mut s = lock(&s);
        if s.status != SessionStatus::Active {
            return Err(GatewayError::Conflict("session is no longer active".into()));
        }
        let g = self.world(&s.task.world_id)?;
        match action {
            ActionRequest::Stop => self.finalize(&mut s)?,
            ActionRequest::Move { target } => {
                let idx = g.node_index(target).map_err(|e| GatewayError::IllegalMove(e.to_string()))?;
                let t = g
                    .apply_action(&s.state, Action::MoveTo(idx))
                    .map_err(|e| GatewayError::IllegalMove(e.to_string()))?;
                s.state = t.state;
            }
        }
        self.view(&s)
    }

    pub fn ask(&self, id: &str, text: &str) -> GResult<AskResponse> {
        if text.trim().is_empty() {
            return Err(GatewayError::Invalid("question must not be empty".into()));
        }
        let s = self.session(id)?;
        let mut s = lock(&s);
        if s.status != SessionStatus::Active {
            return Err(GatewayError::Conflict("session is no longer active".into()));
        }
        let g = self.world(&s.task.world_id)?;
        let helper = self.helpers.get(&s.helper).ok_or_else(|| GatewayError::Internal("helper vanished".into()))?;
        let current = s.state.current_node;
        let obs = g
            .sample_observations(current, s.goal, self.episode.window, self.episode.t_frames, &self.episode.labels)
            .map_err(|e| GatewayError::Internal(e.to_string()))?;
        let req = HelpRequest {
            world: g,
            task: &s.task,
            goal: s.goal,
            current,
            inquiry: text,
            history: &s.dialog,
            observations: &obs,
            recorded_response: None,
            window: self.episode.window,
        };
        let response = helper.respond(&req).map_err(|e| GatewayError::Internal(e.to_string()))?;
        let node_id = g.node(current).id.clone();
        s.dialog = append_turn_at(&s.dialog, text, &response, Provenance::Helper, Some(node_id))
            .map_err(|e| GatewayError::Invalid(e.to_string()))?;
        Ok(AskResponse { response, turn_count: s.dialog.len() })
    }

    pub fn finish(&self, id: &str, ratings: Ratings) -> GResult<SessionRecord> {
        ratings.validate()?;
        let s = self.session(id)?;
        let mut s = lock(&s);
        if s.status == SessionStatus::Finished {
            return Err(GatewayError::Conflict("session already finished".into()));
        }
        if s.status == SessionStatus::Active {
            self.finalize(&mut s)?;
        }
        let finished_at = now_secs();
        let record = SessionRecord {
            session_id: s.id.to_string(),
            helper: s.helper.clone(),
            started_at: s.started_at,
            finished_at,
            ratings,
            result: s.result.clone().expect("finalized session has a result"),
        };
        if let Some(path) = &self.results_log {
            let _guard = lock(&self.log_lock);
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| GatewayError::Internal(format!("results log: {e}")))?;
            let line = serde_json::to_string(&record).expect("record serializes");
            writeln!(f, "{line}").map_err(|e| GatewayError::Internal(format!("results log: {e}")))?;
        }
        s.ratings = Some(ratings);
        s.finished_at = Some(finished_at);
        s.status = SessionStatus::Finished;
        Ok(record)
    }
}

/// Reads every record from a results log.
pub fn read_results_log(path: &std::path::Path) -> std::io::Result<Vec<SessionRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSession {
    pub task_id: String,
    #[serde(default = "default_helper")]
    pub helper: String,
}

fn default_helper() -> String {
    "oracle".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ActionRequest {
    Move { target: String },
    Stop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AskRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AskResponse {
    pub response: String,
    pub turn_count: usize,
}

type Shared = Arc<Gateway>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> GResult<T> + Send + 'static) -> GResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| GatewayError::Internal(e.to_string()))?
}

async fn create_handler(
    State(gw): State<Shared>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> GResult<(StatusCode, Json<StateView>)> {
    let Json(req) = body?;
    Ok((StatusCode::CREATED, Json(gw.create_session(&req.task_id, &req.helper)?)))
}

async fn state_handler(State(gw): State<Shared>, Path(id): Path<String>) -> GResult<Json<StateView>> {
    Ok(Json(gw.state(&id)?))
}

async fn action_handler(
    State(gw): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<ActionRequest>, JsonRejection>,
) -> GResult<Json<StateView>> {
    let Json(req) = body?;
    Ok(Json(gw.act(&id, &req)?))
}

async fn ask_handler(
    State(gw): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<AskRequest>, JsonRejection>,
) -> GResult<Json<AskResponse>> {
    let Json(req) = body?;
    Ok(Json(blocking(move || gw.ask(&id, &req.text)).await?))
}

async fn finish_handler(
    State(gw): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<Ratings>, JsonRejection>,
) -> GResult<Json<SessionRecord>> {
    let Json(r) = body?;
    Ok(Json(blocking(move || gw.finish(&id, r)).await?))
}

/// API routes, plus the static bundle from `static_dir` for every other path.
pub fn router(gw: Shared, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_handler))
        .route("/sessions/{id}/state", get(state_handler))
        .route("/sessions/{id}/action", post(action_handler))
        .route("/sessions/{id}/ask", post(ask_handler))
        .route("/sessions/{id}/finish", post(finish_handler))
        .with_state(gw);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(addr: SocketAddr, gw: Shared, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(gw, static_dir)).await
}
