//! One live simulation: an actor task that owns the engine, paces ticks
//! against the wall clock and fans events and snapshots out to clients.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::time::{sleep_until, Instant};

use rhino_core::simworld::{Disturbance, Engine, LeaderInput, RunConfig};
use rhino_core::skillspec::{IntentionId, Scenario};

use crate::protocol::{ClientMessage, ServerMessage, SessionInfo};

/// Limits shared by every session of a server.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerConfig {
    /// Publish a snapshot every this many ticks.
    pub snapshot_decimation: u32,
    /// Events a client may fall behind before it is disconnected.
    pub event_buffer: usize,
    /// Largest `step` a client may request at once.
    pub max_step: u64,
    pub max_speed: f64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            snapshot_decimation: 3,
            event_buffer: 65_536,
            max_step: 100_000,
            max_speed: 64.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("session has stopped")]
    Closed,
    #[error("{0}")]
    Rejected(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reply {
    Done,
    Stepped { tick: u64 },
}

enum Command {
    Client(ClientMessage, oneshot::Sender<Result<Reply, String>>),
    Info(oneshot::Sender<SessionInfo>),
    Trace(oneshot::Sender<String>),
}

/// Cheap handle to a running session.
#[derive(Debug)]
pub struct SessionHandle {
    pub id: String,
    pub scenario: String,
    commands: mpsc::Sender<Command>,
    events: broadcast::Sender<Arc<str>>,
    snapshots: watch::Receiver<Arc<str>>,
    clients: Arc<AtomicUsize>,
}

impl SessionHandle {
    /// Starts the session's actor on the current runtime, paused at tick 0.
    pub fn spawn(id: String, scenario: Arc<Scenario>, run: RunConfig, config: ServerConfig) -> Self {
        let (commands, inbox) = mpsc::channel(64);
        let (events, _) = broadcast::channel(config.event_buffer.max(1));
        let clients = Arc::new(AtomicUsize::new(0));
        let engine = Engine::new(scenario.clone(), run);
        let (snap_tx, snapshots) = watch::channel(snapshot_frame(&engine));
        let actor = Actor {
            id: id.clone(),
            leader: LeaderInput::idle(&scenario),
            engine,
            paused: true,
            speed: 1.0,
            config,
            events: events.clone(),
            snapshots: snap_tx,
            clients: clients.clone(),
        };
        tokio::spawn(actor.run(inbox));
        Self {
            id,
            scenario: scenario.name.clone(),
            commands,
            events,
            snapshots,
            clients,
        }
    }

    async fn ask<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Command) -> Result<T, SessionError> {
        let (tx, rx) = oneshot::channel();
        self.commands.send(make(tx)).await.map_err(|_| SessionError::Closed)?;
        rx.await.map_err(|_| SessionError::Closed)
    }

    pub async fn send(&self, msg: ClientMessage) -> Result<Reply, SessionError> {
        self.ask(|tx| Command::Client(msg, tx))
            .await?
            .map_err(SessionError::Rejected)
    }

    pub async fn info(&self) -> Result<SessionInfo, SessionError> {
        self.ask(Command::Info).await
    }

    /// The session's trace as JSONL: header line plus every event so far.
    pub async fn trace(&self) -> Result<String, SessionError> {
        self.ask(Command::Trace).await
    }

    /// Event frames from now on, and the latest snapshot frame (marked
    /// unseen so it is delivered at once).
    pub fn subscribe(&self) -> (broadcast::Receiver<Arc<str>>, watch::Receiver<Arc<str>>) {
        let mut snaps = self.snapshots.clone();
        snaps.mark_changed();
        (self.events.subscribe(), snaps)
    }

    /// Counts a connected client until the guard is dropped.
    pub fn client_guard(&self) -> ClientGuard {
        self.clients.fetch_add(1, Ordering::SeqCst);
        ClientGuard(self.clients.clone())
    }
}

pub struct ClientGuard(Arc<AtomicUsize>);

impl Drop for ClientGuard {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

fn snapshot_frame(engine: &Engine) -> Arc<str> {
    ServerMessage::Snapshot(&engine.snapshot()).to_json().into()
}

struct Actor {
    id: String,
    engine: Engine,
    leader: LeaderInput,
    paused: bool,
    speed: f64,
    config: ServerConfig,
    events: broadcast::Sender<Arc<str>>,
    snapshots: watch::Sender<Arc<str>>,
    clients: Arc<AtomicUsize>,
}

impl Actor {
    fn period(&self) -> Duration {
        let rate = f64::from(self.engine.scenario().params.tick_rate.max(1));
        Duration::from_secs_f64(1.0 / (rate * self.speed))
    }

    async fn run(mut self, mut inbox: mpsc::Receiver<Command>) {
        let mut deadline = Instant::now() + self.period();
        loop {
            tokio::select! {
                biased;
                cmd = inbox.recv() => {
                    let Some(cmd) = cmd else { break };
                    let was_paused = self.paused;
                    let speed = self.speed;
                    self.handle(cmd);
                    if (was_paused && !self.paused) || speed != self.speed {
                        deadline = Instant::now() + self.period();
                    }
                }
                _ = sleep_until(deadline), if !self.paused => {
                    self.tick();
                    deadline += self.period();
                    // After a long stall, resume the cadence from now instead
                    // of bursting to catch up.
                    let now = Instant::now();
                    if deadline + self.period() * 4 < now {
                        deadline = now + self.period();
                    }
                }
            }
        }
        tracing::debug!(session = %self.id, "session stopped");
    }

    fn info(&self) -> SessionInfo {
        let config = self.engine.config();
        SessionInfo {
            id: self.id.clone(),
            scenario: self.engine.scenario().name.clone(),
            tick: self.engine.tick(),
            paused: self.paused,
            speed: self.speed,
            clients: self.clients.load(Ordering::SeqCst),
            seed: config.seed,
            raw: config.recognizer,
            tick_rate: self.engine.scenario().params.tick_rate,
            snapshot_decimation: self.config.snapshot_decimation,
        }
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Info(tx) => {
                let _ = tx.send(self.info());
            }
            Command::Trace(tx) => {
                let _ = tx.send(self.engine.trace().to_jsonl());
            }
            Command::Client(msg, tx) => {
                let _ = tx.send(self.apply(msg));
            }
        }
    }

    fn apply(&mut self, msg: ClientMessage) -> Result<Reply, String> {
        let scenario = self.engine.scenario().clone();
        match msg {
            ClientMessage::Intention { id, held, hand } => {
                let id = IntentionId(id);
                if scenario.intention(id).is_none() {
                    return Err(format!("unknown intention {id}"));
                }
                if held {
                    self.leader.intention = id;
                    self.leader.hand = hand;
                } else if self.leader.intention == id {
                    self.leader.intention = scenario.idle_intention();
                    self.leader.hand = None;
                }
            }
            ClientMessage::Pause {} => {
                self.paused = true;
                self.publish_snapshot();
            }
            ClientMessage::Resume {} => self.paused = false,
            ClientMessage::Speed { x } => {
                if !(x > 0.0 && x <= self.config.max_speed) {
                    return Err(format!("speed must be in (0, {}]", self.config.max_speed));
                }
                self.speed = x;
            }
            ClientMessage::Reset {} => {
                self.engine.reset();
                self.leader = LeaderInput::idle(&scenario);
                self.paused = true;
                self.publish_snapshot();
            }
            ClientMessage::Disturb { kind } => {
                let mut parsed = Vec::new();
                for k in kind.split(',') {
                    parsed.push(Disturbance::parse(&scenario, k).ok_or_else(|| format!("unknown disturbance `{k}`"))?);
                }
                for d in parsed {
                    match d {
                        Disturbance::Contact => self.leader.contact = true,
                        Disturbance::Clear => self.leader.contact = false,
                        Disturbance::Take(k) => self.leader.take = Some(k),
                    }
                }
            }
            ClientMessage::Step { n } => {
                if n > self.config.max_step {
                    return Err(format!(
                        "step of {n} ticks exceeds the limit of {}",
                        self.config.max_step
                    ));
                }
                for _ in 0..n {
                    self.tick();
                }
                self.publish_snapshot();
                return Ok(Reply::Stepped {
                    tick: self.engine.tick(),
                });
            }
        }
        Ok(Reply::Done)
    }

    fn tick(&mut self) {
        let input = self.leader;
        self.leader.take = None;
        let report = self.engine.step(&input).expect("pinned intentions are validated");
        for e in &report.events {
            // Nobody listening is fine; the trace keeps every event.
            let _ = self.events.send(ServerMessage::Event(e).to_json().into());
        }
        if self
            .engine
            .tick()
            .is_multiple_of(u64::from(self.config.snapshot_decimation.max(1)))
        {
            self.publish_snapshot();
        }
    }

    fn publish_snapshot(&self) {
        self.snapshots.send_replace(snapshot_frame(&self.engine));
    }
}
