//! HTTP routes and the WebSocket bridge.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::ws::rejection::WebSocketUpgradeRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, mpsc};

use rhino_core::simworld::RunConfig;
use rhino_core::skillspec::{IntentionRole, Scenario, SkillKind};

use crate::protocol::{error_frame, parse_client, ServerMessage};
use crate::session::{Reply, ServerConfig, SessionError, SessionHandle};

/// Everything the routes share.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    scenarios: BTreeMap<String, Arc<Scenario>>,
    sessions: Mutex<HashMap<String, Arc<SessionHandle>>>,
    next_id: AtomicU64,
    config: ServerConfig,
}

impl AppState {
    pub fn new(scenarios: impl IntoIterator<Item = Scenario>, config: ServerConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                scenarios: scenarios.into_iter().map(|s| (s.name.clone(), Arc::new(s))).collect(),
                sessions: Mutex::new(HashMap::new()),
                next_id: AtomicU64::new(1),
                config,
            }),
        }
    }

    pub fn config(&self) -> ServerConfig {
        self.inner.config
    }

    /// Creates a session without going through HTTP.
    pub fn create_session(&self, scenario: &str, run: RunConfig) -> Option<Arc<SessionHandle>> {
        let s = self.inner.scenarios.get(scenario)?.clone();
        let id = format!("s{}", self.inner.next_id.fetch_add(1, Ordering::SeqCst));
        let handle = Arc::new(SessionHandle::spawn(id.clone(), s, run, self.inner.config));
        self.sessions().insert(id.clone(), handle.clone());
        tracing::info!(session = %id, scenario, seed = run.seed, raw = run.recognizer, "session created");
        Some(handle)
    }

    pub fn session(&self, id: &str) -> Option<Arc<SessionHandle>> {
        self.sessions().get(id).cloned()
    }

    fn sessions(&self) -> std::sync::MutexGuard<'_, HashMap<String, Arc<SessionHandle>>> {
        self.inner.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scenarios", get(list_scenarios))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/:id", get(session_info).delete(delete_session))
        .route("/sessions/:id/trace", get(session_trace))
        .route("/sessions/:id/ws", get(session_ws))
        .with_state(state)
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: message.into() })).into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, format!("no session `{id}`"))
}

fn closed() -> Response {
    error(StatusCode::GONE, SessionError::Closed.to_string())
}

#[derive(Debug, Serialize)]
struct NamedId {
    id: u16,
    name: String,
    kind: &'static str,
}

#[derive(Debug, Serialize)]
struct ScenarioSummary {
    name: String,
    tick_rate: u32,
    n_r: u32,
    k_2: u32,
    objects: Vec<String>,
    skills: Vec<NamedId>,
    intentions: Vec<NamedId>,
}

async fn list_scenarios(State(state): State<AppState>) -> Json<Vec<ScenarioSummary>> {
    Json(
        state
            .inner
            .scenarios
            .values()
            .map(|s| ScenarioSummary {
                name: s.name.clone(),
                tick_rate: s.params.tick_rate,
                n_r: s.params.n_r,
                k_2: s.params.k_2,
                objects: s.objects.iter().map(|o| o.name.clone()).collect(),
                skills: s
                    .skills
                    .iter()
                    .map(|k| NamedId {
                        id: k.id.0,
                        name: k.name.clone(),
                        kind: match k.kind {
                            SkillKind::Idle => "idle",
                            SkillKind::Motion => "motion",
                            SkillKind::Manipulation => "manipulation",
                        },
                    })
                    .collect(),
                intentions: s
                    .intentions
                    .iter()
                    .map(|i| NamedId {
                        id: i.id.0,
                        name: i.name.clone(),
                        kind: match i.role {
                            IntentionRole::Skill => "skill",
                            IntentionRole::Idle => "idle",
                            IntentionRole::Cancel => "cancel",
                        },
                    })
                    .collect(),
            })
            .collect(),
    )
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    /// Recognize intentions from simulated observations.
    #[serde(default)]
    pub raw: bool,
}

async fn create_session(State(state): State<AppState>, body: Result<Json<CreateSession>, JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let run = RunConfig {
        seed: req.seed,
        recognizer: req.raw,
    };
    let Some(handle) = state.create_session(&req.scenario, run) else {
        return error(StatusCode::NOT_FOUND, format!("unknown scenario `{}`", req.scenario));
    };
    match handle.info().await {
        Ok(info) => (StatusCode::CREATED, Json(info)).into_response(),
        Err(_) => closed(),
    }
}

async fn list_sessions(State(state): State<AppState>) -> Response {
    let handles: Vec<_> = state.sessions().values().cloned().collect();
    let mut infos = Vec::with_capacity(handles.len());
    for h in handles {
        if let Ok(info) = h.info().await {
            infos.push(info);
        }
    }
    infos.sort_by(|a, b| a.id.cmp(&b.id));
    Json(infos).into_response()
}

async fn session_info(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(h) = state.session(&id) else {
        return not_found(&id);
    };
    match h.info().await {
        Ok(info) => Json(info).into_response(),
        Err(_) => closed(),
    }
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.sessions().remove(&id) {
        // Dropping the last handle stops the actor once clients leave.
        Some(_) => StatusCode::NO_CONTENT.into_response(),
        None => not_found(&id),
    }
}

async fn session_trace(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(h) = state.session(&id) else {
        return not_found(&id);
    };
    match h.trace().await {
        Ok(text) => ([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response(),
        Err(_) => closed(),
    }
}

async fn session_ws(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ws: Result<WebSocketUpgrade, WebSocketUpgradeRejection>,
) -> Response {
    let Some(h) = state.session(&id) else {
        return not_found(&id);
    };
    match ws {
        Ok(ws) => ws.on_upgrade(move |socket| client(socket, h)),
        Err(e) => e.into_response(),
    }
}

/// Bridges one WebSocket to a session. Events are forwarded in order and
/// never skipped; a client that falls more than the event buffer behind is
/// told why and disconnected. Snapshots are latest-wins.
async fn client(socket: WebSocket, session: Arc<SessionHandle>) {
    let _guard = session.client_guard();
    let (events, snapshots) = session.subscribe();
    let (direct, outbox) = mpsc::channel::<String>(64);
    let (sink, mut stream) = socket.split();
    tracing::info!(session = %session.id, "client connected");

    if let Ok(info) = session.info().await {
        let _ = direct.send(ServerMessage::Hello(&info).to_json()).await;
    }
    let mut writer = tokio::spawn(write_frames(sink, events, snapshots, outbox, session.id.clone()));

    let reader = async {
        while let Some(Ok(msg)) = stream.next().await {
            let text = match msg {
                Message::Text(t) => t,
                Message::Binary(_) => {
                    let _ = direct.send(error_frame("binary frames are not supported")).await;
                    continue;
                }
                Message::Close(_) => break,
                _ => continue,
            };
            let frame = match parse_client(&text) {
                Err(e) => Some(error_frame(e.to_string())),
                Ok(m) => match session.send(m).await {
                    Ok(Reply::Done) => None,
                    Ok(Reply::Stepped { tick }) => Some(ServerMessage::Stepped { tick }.to_json()),
                    Err(e @ SessionError::Closed) => {
                        let _ = direct.send(error_frame(e.to_string())).await;
                        break;
                    }
                    Err(e) => Some(error_frame(e.to_string())),
                },
            };
            if let Some(f) = frame {
                if direct.send(f).await.is_err() {
                    break;
                }
            }
        }
    };

    tokio::select! {
        _ = reader => writer.abort(),
        _ = &mut writer => {}
    }
    tracing::info!(session = %session.id, "client disconnected");
}

async fn write_frames(
    mut sink: futures_util::stream::SplitSink<WebSocket, Message>,
    mut events: broadcast::Receiver<Arc<str>>,
    mut snapshots: tokio::sync::watch::Receiver<Arc<str>>,
    mut outbox: mpsc::Receiver<String>,
    id: String,
) {
    let mut snapshots_open = true;
    loop {
        let frame = tokio::select! {
            biased;
            ev = events.recv() => match ev {
                Ok(f) => f.to_string(),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(session = %id, missed = n, "client too slow; disconnecting");
                    let note = error_frame(format!("client fell {n} events behind; disconnecting"));
                    let _ = sink.send(Message::Text(note)).await;
                    let _ = sink.close().await;
                    return;
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            out = outbox.recv() => match out {
                Some(f) => f,
                None => break,
            },
            changed = snapshots.changed(), if snapshots_open => match changed {
                Ok(()) => snapshots.borrow_and_update().to_string(),
                Err(_) => {
                    snapshots_open = false;
                    continue;
                }
            },
        };
        if sink.send(Message::Text(frame)).await.is_err() {
            return;
        }
    }
    let _ = sink.close().await;
}
