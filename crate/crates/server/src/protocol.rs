//! JSON messages exchanged over a session's WebSocket. Every frame is one
//! UTF-8 text frame holding one object tagged by `"t"`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rhino_core::simworld::{InputLog, IntentionRef, LeaderScript, ScriptError, Snapshot};
use rhino_core::skillspec::{IntentionId, Scenario};
use rhino_core::trace::TraceEvent;

/// What a client may send.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    /// `held: true` pins the leader's intention (and optionally the right
    /// hand position) until released or replaced; `held: false` releases
    /// it if it is the pinned one.
    Intention {
        id: u16,
        held: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hand: Option<[f64; 3]>,
    },
    Pause {},
    Resume {},
    Speed {
        x: f64,
    },
    Reset {},
    /// `"contact"`, `"clear"` or `"take:<object>"`.
    Disturb {
        kind: String,
    },
    /// Advance exactly `n` ticks now, paused or not. Answered with
    /// `stepped` once done.
    Step {
        n: u64,
    },
}

/// Session summary sent on connect and served over HTTP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub scenario: String,
    pub tick: u64,
    pub paused: bool,
    pub speed: f64,
    pub clients: usize,
    pub seed: u64,
    pub raw: bool,
    pub tick_rate: u32,
    pub snapshot_decimation: u32,
}

/// What the server sends.
#[derive(Debug, Serialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum ServerMessage<'a> {
    Hello(&'a SessionInfo),
    Snapshot(&'a Snapshot),
    Event(&'a TraceEvent),
    Stepped { tick: u64 },
    Error { message: String },
}

impl ServerMessage<'_> {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

pub fn error_frame(message: impl Into<String>) -> String {
    ServerMessage::Error {
        message: message.into(),
    }
    .to_json()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed message: {0}")]
pub struct ProtocolError(pub String);

pub fn parse_client(text: &str) -> Result<ClientMessage, ProtocolError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ProtocolError(e.to_string()))?;
    // Tagged enums would otherwise also accept `["pause"]`.
    if !value.is_object() {
        return Err(ProtocolError("expected a JSON object".into()));
    }
    let msg: ClientMessage = serde_json::from_value(value).map_err(|e| ProtocolError(e.to_string()))?;
    match &msg {
        ClientMessage::Speed { x } if !x.is_finite() => Err(ProtocolError("speed must be finite".into())),
        ClientMessage::Intention { hand: Some(h), .. } if !h.iter().all(|v| v.is_finite()) => {
            Err(ProtocolError("hand position must be finite".into()))
        }
        _ => Ok(msg),
    }
}

/// Messages that drive a session from tick 0 through the same inputs as
/// `script` expanded over `ticks` ticks. Sent in order, each `step` awaited,
/// they leave the session with the trace a headless run would write.
pub fn script_messages(
    scenario: &Scenario,
    script: &LeaderScript,
    ticks: u64,
) -> Result<Vec<ClientMessage>, ScriptError> {
    InputLog::from_script(scenario, script, ticks)?;
    let mut out = Vec::new();
    let mut now = 0;
    let step = |out: &mut Vec<ClientMessage>, now: &mut u64, to: u64| {
        if to > *now {
            out.push(ClientMessage::Step { n: to - *now });
            *now = to;
        }
    };
    for e in &script.entries {
        step(&mut out, &mut now, e.from_tick);
        let id = match &e.intention {
            IntentionRef::Id(id) => IntentionId(*id),
            IntentionRef::Name(name) => scenario.intention_by_name(name).expect("validated above").id,
        };
        out.push(ClientMessage::Intention {
            id: id.0,
            held: true,
            hand: e.hand,
        });
        if let Some(kind) = &e.disturbance {
            out.push(ClientMessage::Disturb { kind: kind.clone() });
        }
        step(&mut out, &mut now, e.to_tick);
        if e.disturbance
            .as_deref()
            .is_some_and(|k| k.split(',').any(|k| k == "contact"))
        {
            out.push(ClientMessage::Disturb { kind: "clear".into() });
        }
        out.push(ClientMessage::Intention {
            id: id.0,
            held: false,
            hand: None,
        });
    }
    step(&mut out, &mut now, ticks);
    Ok(out)
}
