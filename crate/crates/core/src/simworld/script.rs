//! Leader scripts: a sorted timeline of what the human does, and the
//! per-tick input log they expand into.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skillspec::{IntentionId, ObjectId, Scenario};

/// Longest episode a script may describe (about six days at 30 Hz).
pub const MAX_TICKS: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntentionRef {
    Id(u16),
    Name(String),
}

/// A human disturbance. In script and wire form: `"contact"` (the leader's
/// hand is on the object being manipulated), `"clear"`, or `"take:<obj>"`
/// (the leader carries the object out of the scene). Scripts may join
/// several with commas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disturbance {
    Contact,
    Clear,
    Take(ObjectId),
}

impl Disturbance {
    pub fn parse(scenario: &Scenario, kind: &str) -> Option<Self> {
        match kind {
            "contact" => Some(Disturbance::Contact),
            "clear" => Some(Disturbance::Clear),
            other => {
                let name = other.strip_prefix("take:")?;
                scenario.object_by_name(name).map(|o| Disturbance::Take(o.id))
            }
        }
    }

    pub fn label(&self, scenario: &Scenario) -> String {
        match self {
            Disturbance::Contact => "contact".into(),
            Disturbance::Clear => "clear".into(),
            Disturbance::Take(k) => format!(
                "take:{}",
                scenario.object(*k).map_or_else(|| k.0.to_string(), |o| o.name.clone())
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub from_tick: u64,
    /// Exclusive.
    pub to_tick: u64,
    pub intention: IntentionRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hand: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<String>,
}

/// Ticks not covered by an entry are Idle with the hands at rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LeaderScript {
    pub entries: Vec<ScriptEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("script parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("entry {entry}: unknown intention `{intention}`")]
    UnknownIntention { entry: usize, intention: String },
    #[error("entry {entry}: empty tick range")]
    EmptyRange { entry: usize },
    #[error("entry {entry}: overlaps or precedes the previous entry")]
    Unsorted { entry: usize },
    #[error("entry {entry}: unknown disturbance `{kind}`")]
    BadDisturbance { entry: usize, kind: String },
    #[error("entry {entry}: hand position must be finite")]
    NonFinite { entry: usize },
    #[error("horizon of {0} ticks exceeds the supported maximum")]
    HorizonTooLong(u64),
    #[error("entry {entry}: ends at tick {to_tick}, past the {ticks}-tick horizon")]
    BeyondHorizon { entry: usize, to_tick: u64, ticks: u64 },
}

impl LeaderScript {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        serde_json::from_str(text).map_err(|e| ScriptError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scripts serialize")
    }

    /// First tick after the last entry.
    pub fn end_tick(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.to_tick)
    }
}

/// What the leader does during one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaderInput {
    pub intention: IntentionId,
    /// Right-hand position; `None` leaves it at rest.
    pub hand: Option<[f64; 3]>,
    pub contact: bool,
    /// One-shot removal of an object at this tick.
    pub take: Option<ObjectId>,
}

impl LeaderInput {
    pub fn idle(scenario: &Scenario) -> Self {
        Self {
            intention: scenario.idle_intention(),
            hand: None,
            contact: false,
            take: None,
        }
    }
}

/// The exact per-tick leader inputs of an episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InputLog {
    inputs: Vec<LeaderInput>,
}

fn resolve_intention(scenario: &Scenario, r: &IntentionRef) -> Option<IntentionId> {
    match r {
        IntentionRef::Id(id) => scenario.intention(IntentionId(*id)).map(|i| i.id),
        IntentionRef::Name(name) => scenario.intention_by_name(name).map(|i| i.id),
    }
}

impl InputLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, input: LeaderInput) {
        self.inputs.push(input);
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[LeaderInput] {
        &self.inputs
    }

    pub fn clear(&mut self) {
        self.inputs.clear();
    }

    /// Expands a script over `ticks` ticks after validating it against the
    /// scenario.
    pub fn from_script(scenario: &Scenario, script: &LeaderScript, ticks: u64) -> Result<Self, ScriptError> {
        if ticks > MAX_TICKS {
            return Err(ScriptError::HorizonTooLong(ticks));
        }
        let idle = LeaderInput::idle(scenario);
        let mut inputs = vec![idle; ticks as usize];
        let mut prev_end = 0;
        for (i, e) in script.entries.iter().enumerate() {
            if e.to_tick <= e.from_tick {
                return Err(ScriptError::EmptyRange { entry: i });
            }
            if e.from_tick < prev_end {
                return Err(ScriptError::Unsorted { entry: i });
            }
            prev_end = e.to_tick;
            if e.to_tick > ticks {
                return Err(ScriptError::BeyondHorizon {
                    entry: i,
                    to_tick: e.to_tick,
                    ticks,
                });
            }
            let intention = resolve_intention(scenario, &e.intention).ok_or_else(|| ScriptError::UnknownIntention {
                entry: i,
                intention: match &e.intention {
                    IntentionRef::Id(id) => id.to_string(),
                    IntentionRef::Name(n) => n.clone(),
                },
            })?;
            if let Some(h) = e.hand {
                if !h.iter().all(|v| v.is_finite()) {
                    return Err(ScriptError::NonFinite { entry: i });
                }
            }
            let mut disturbances = Vec::new();
            for kind in e.disturbance.iter().flat_map(|d| d.split(',')) {
                disturbances.push(
                    Disturbance::parse(scenario, kind).ok_or_else(|| ScriptError::BadDisturbance {
                        entry: i,
                        kind: kind.to_string(),
                    })?,
                );
            }
            for t in e.from_tick..e.to_tick {
                let slot = &mut inputs[t as usize];
                slot.intention = intention;
                slot.hand = e.hand;
                for d in &disturbances {
                    match *d {
                        Disturbance::Contact => slot.contact = true,
                        Disturbance::Take(k) if t == e.from_tick => slot.take = Some(k),
                        _ => {}
                    }
                }
            }
        }
        Ok(Self { inputs })
    }

    /// The shortest script that expands back into this log.
    pub fn to_script_for(&self, scenario: &Scenario) -> LeaderScript {
        let idle = LeaderInput::idle(scenario);
        let n = self.inputs.len();
        let mut entries = Vec::new();
        let mut t = 0;
        while t < n {
            let first = self.inputs[t];
            let mut end = t + 1;
            if first.take.is_none() {
                while end < n && self.inputs[end].take.is_none() && same_run(&self.inputs[end], &first) {
                    end += 1;
                }
            }
            if first != idle {
                let mut kinds = Vec::new();
                if first.contact {
                    kinds.push("contact".to_string());
                }
                if let Some(k) = first.take {
                    kinds.push(Disturbance::Take(k).label(scenario));
                }
                let disturbance = (!kinds.is_empty()).then(|| kinds.join(","));
                entries.push(ScriptEntry {
                    from_tick: t as u64,
                    to_tick: end as u64,
                    intention: scenario
                        .intention(first.intention)
                        .map_or(IntentionRef::Id(first.intention.0), |i| {
                            IntentionRef::Name(i.name.clone())
                        }),
                    hand: first.hand,
                    disturbance,
                });
            }
            t = end;
        }
        LeaderScript { entries }
    }
}

fn same_run(a: &LeaderInput, b: &LeaderInput) -> bool {
    a.intention == b.intention && a.hand == b.hand && a.contact == b.contact
}
