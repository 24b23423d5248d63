//! Append-only event log, the JSONL trace format, replay verification and
//! interaction metrics.
//!
//! A trace file is one header line followed by one event per line. Planner
//! events carry only integers (ticks, ids, occupancies) so traces are
//! identical across platforms.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simworld::{run_inputs, InputLog, LeaderScript, RunConfig, ScriptError};
use crate::skillspec::{HandOccupancy, IntentionId, Scenario, SkillId};

pub const TRACE_VERSION: u32 = 1;

/// Why a skill is running: requested directly, as a step toward a start
/// condition, or to roll back an interrupted skill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRole {
    Target,
    Path,
    Rollback,
}

/// Event payloads. Declaration order is the within-tick ordering priority.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    IntentionObserved { intention: IntentionId },
    IntentionStable { intention: IntentionId, since: u64 },
    SafetyHalt { robot_point: u16, hand_point: u16 },
    SafetyResume,
    SkillSucceeded { skill: SkillId },
    SkillTimedOut { skill: SkillId },
    SkillFailed { skill: SkillId },
    OccupancyChanged { from: HandOccupancy, to: HandOccupancy },
    SkillInterrupted { skill: SkillId, by: IntentionId },
    PathPlanned { target: SkillId, path: Vec<SkillId> },
    SkillStarted { skill: SkillId, role: StepRole },
    Diagnostic { message: String },
}

impl EventKind {
    pub fn priority(&self) -> u8 {
        match self {
            EventKind::IntentionObserved { .. } => 0,
            EventKind::IntentionStable { .. } => 1,
            EventKind::SafetyHalt { .. } => 2,
            EventKind::SafetyResume => 3,
            EventKind::SkillSucceeded { .. } => 4,
            EventKind::SkillTimedOut { .. } => 5,
            EventKind::SkillFailed { .. } => 6,
            EventKind::OccupancyChanged { .. } => 7,
            EventKind::SkillInterrupted { .. } => 8,
            EventKind::PathPlanned { .. } => 9,
            EventKind::SkillStarted { .. } => 10,
            EventKind::Diagnostic { .. } => 11,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EventKind::IntentionObserved { .. } => "IntentionObserved",
            EventKind::IntentionStable { .. } => "IntentionStable",
            EventKind::SafetyHalt { .. } => "SafetyHalt",
            EventKind::SafetyResume => "SafetyResume",
            EventKind::SkillSucceeded { .. } => "SkillSucceeded",
            EventKind::SkillTimedOut { .. } => "SkillTimedOut",
            EventKind::SkillFailed { .. } => "SkillFailed",
            EventKind::OccupancyChanged { .. } => "OccupancyChanged",
            EventKind::SkillInterrupted { .. } => "SkillInterrupted",
            EventKind::PathPlanned { .. } => "PathPlanned",
            EventKind::SkillStarted { .. } => "SkillStarted",
            EventKind::Diagnostic { .. } => "Diagnostic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl TraceEvent {
    pub fn new(tick: u64, kind: EventKind) -> Self {
        Self { tick, kind }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace events serialize")
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

/// Sorts one tick's events by kind priority, keeping emission order within a
/// kind.
pub fn order_tick_events(events: &mut [TraceEvent]) {
    events.sort_by_key(|e| (e.tick, e.kind.priority()));
}

/// Everything needed to re-execute an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub kind: HeaderTag,
    pub version: u32,
    pub scenario: String,
    pub seed: u64,
    pub ticks: u64,
    pub recognizer: bool,
    pub inputs: LeaderScript,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeaderTag {
    Header,
}

impl TraceHeader {
    pub fn new(scenario: &Scenario, config: &RunConfig, inputs: &InputLog) -> Self {
        Self {
            kind: HeaderTag::Header,
            version: TRACE_VERSION,
            scenario: scenario.name.clone(),
            seed: config.seed,
            ticks: inputs.len() as u64,
            recognizer: config.recognizer,
            inputs: inputs.to_script_for(scenario),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("event at tick {tick} precedes last tick {last}")]
    OutOfOrder { tick: u64, last: u64 },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("trace is missing its header line")]
    MissingHeader,
    #[error("trace version {0} is not supported")]
    Version(u32),
    #[error("trace inputs: {0}")]
    Inputs(#[from] ScriptError),
    #[error("trace recorded scenario `{recorded}` but `{given}` was supplied")]
    ScenarioMismatch { recorded: String, given: String },
}

/// Ordered, append-only event log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceLog {
    events: Vec<TraceEvent>,
}

impl TraceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, event: TraceEvent) -> Result<(), TraceError> {
        if let Some(last) = self.events.last() {
            if event.tick < last.tick {
                return Err(TraceError::OutOfOrder {
                    tick: event.tick,
                    last: last.tick,
                });
            }
        }
        self.events.push(event);
        Ok(())
    }

    pub fn extend(&mut self, events: impl IntoIterator<Item = TraceEvent>) -> Result<(), TraceError> {
        events.into_iter().try_for_each(|e| self.append(e))
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn clear(&mut self) {
        self.events.clear();
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }

    /// One JSON object per line, each terminated by `\n`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::with_capacity(self.events.len() * 64);
        for e in &self.events {
            out.push_str(&e.to_json());
            out.push('\n');
        }
        out
    }

    /// Parses event lines; `first_line` is the 1-based number of the first
    /// line for error reporting. Blank lines are skipped.
    pub fn parse_jsonl(text: &str, first_line: usize) -> Result<Self, TraceError> {
        let mut log = TraceLog::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = first_line + i;
            let event: TraceEvent = serde_json::from_str(line).map_err(|e| TraceError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
            log.append(event).map_err(|e| TraceError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        }
        Ok(log)
    }
}

/// A complete trace file: header plus events.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub log: TraceLog,
}

impl Trace {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("trace header serializes");
        out.push('\n');
        out.push_str(&self.log.to_jsonl());
        out
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let (first, rest) = match text.split_once('\n') {
            Some((first, rest)) => (first, rest),
            None => (text, ""),
        };
        if first.trim().is_empty() {
            return Err(TraceError::MissingHeader);
        }
        let header: TraceHeader = serde_json::from_str(first).map_err(|e| TraceError::Malformed {
            line: 1,
            message: e.to_string(),
        })?;
        if header.version != TRACE_VERSION {
            return Err(TraceError::Version(header.version));
        }
        let log = TraceLog::parse_jsonl(rest, 2)?;
        Ok(Self { header, log })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// Index into the event list.
    pub index: usize,
    pub tick: u64,
    pub recorded: Option<TraceEvent>,
    pub replayed: Option<TraceEvent>,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |e: &Option<TraceEvent>| e.as_ref().map_or("<none>".to_string(), |e| e.to_json());
        write!(
            f,
            "event {} (tick {}): recorded {} replayed {}",
            self.index,
            self.tick,
            show(&self.recorded),
            show(&self.replayed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayVerdict {
    Clean { events: usize },
    Diverged(Divergence),
}

impl ReplayVerdict {
    pub fn is_clean(&self) -> bool {
        matches!(self, ReplayVerdict::Clean { .. })
    }
}

/// First position where two event sequences differ.
pub fn first_divergence(recorded: &[TraceEvent], replayed: &[TraceEvent]) -> Option<Divergence> {
    let n = recorded.len().max(replayed.len());
    (0..n).find_map(|i| {
        let a = recorded.get(i);
        let b = replayed.get(i);
        (a != b).then(|| Divergence {
            index: i,
            tick: a.or(b).map_or(0, |e| e.tick),
            recorded: a.cloned(),
            replayed: b.cloned(),
        })
    })
}

/// Re-executes the recorded inputs and compares every emitted event.
pub fn replay(scenario: &Scenario, trace: &Trace) -> Result<ReplayVerdict, TraceError> {
    if trace.header.scenario != scenario.name {
        return Err(TraceError::ScenarioMismatch {
            recorded: trace.header.scenario.clone(),
            given: scenario.name.clone(),
        });
    }
    let inputs = InputLog::from_script(scenario, &trace.header.inputs, trace.header.ticks)?;
    let config = RunConfig {
        seed: trace.header.seed,
        recognizer: trace.header.recognizer,
    };
    let again = run_inputs(scenario, &inputs, &config);
    Ok(match first_divergence(trace.log.events(), again.log.events()) {
        None => ReplayVerdict::Clean {
            events: trace.log.len(),
        },
        Some(d) => ReplayVerdict::Diverged(d),
    })
}

/// Parses a trace file and replays it. An empty document replays clean.
pub fn replay_text(scenario: &Scenario, text: &str) -> Result<ReplayVerdict, TraceError> {
    if text.trim().is_empty() {
        return Ok(ReplayVerdict::Clean { events: 0 });
    }
    replay(scenario, &Trace::parse(text)?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SkillCounts {
    pub started: u32,
    pub succeeded: u32,
    pub interrupted: u32,
    pub timed_out: u32,
    pub failed: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Metrics {
    pub per_skill: BTreeMap<SkillId, SkillCounts>,
    /// Ticks from the first tick of an intention to the skill it started,
    /// for skills started on the tick the intention became stable.
    pub reaction_latency: Vec<u64>,
    /// Ticks from the first tick of an intention to the interruption it
    /// caused.
    pub interruption_latency: Vec<u64>,
    pub hold_ticks: u64,
}

pub fn metrics(events: &[TraceEvent]) -> Metrics {
    let mut m = Metrics::default();
    let mut stable_since: Option<(u64, u64)> = None;
    let mut halted_at: Option<u64> = None;
    let mut last_tick = 0;
    for e in events {
        last_tick = e.tick;
        match &e.kind {
            EventKind::IntentionStable { since, .. } => stable_since = Some((e.tick, *since)),
            EventKind::SkillStarted { skill, role } => {
                m.per_skill.entry(*skill).or_default().started += 1;
                if let (Some((tick, since)), StepRole::Target | StepRole::Path) = (stable_since, role) {
                    if tick == e.tick {
                        m.reaction_latency.push(e.tick.saturating_sub(since));
                        stable_since = None;
                    }
                }
            }
            EventKind::SkillInterrupted { skill, .. } => {
                m.per_skill.entry(*skill).or_default().interrupted += 1;
                if let Some((tick, since)) = stable_since {
                    if tick == e.tick {
                        m.interruption_latency.push(e.tick.saturating_sub(since));
                    }
                }
            }
            EventKind::SkillSucceeded { skill } => m.per_skill.entry(*skill).or_default().succeeded += 1,
            EventKind::SkillTimedOut { skill } => m.per_skill.entry(*skill).or_default().timed_out += 1,
            EventKind::SkillFailed { skill } => m.per_skill.entry(*skill).or_default().failed += 1,
            EventKind::SafetyHalt { .. } => halted_at = Some(e.tick),
            EventKind::SafetyResume => {
                if let Some(t) = halted_at.take() {
                    m.hold_ticks += e.tick.saturating_sub(t);
                }
            }
            _ => {}
        }
    }
    if let Some(t) = halted_at {
        m.hold_ticks += last_tick.saturating_sub(t);
    }
    m
}

/// Plain-text table of per-skill counts and latency summaries.
pub fn format_metrics(m: &Metrics, scenario: Option<&Scenario>) -> String {
    use std::fmt::Write as _;
    let name = |id: SkillId| {
        scenario
            .and_then(|s| s.try_skill(id))
            .map_or_else(|| format!("skill #{id}"), |k| k.name.clone())
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<28} {:>7} {:>9} {:>11} {:>9} {:>6}",
        "skill", "started", "succeeded", "interrupted", "timed_out", "failed"
    );
    for (id, c) in &m.per_skill {
        let _ = writeln!(
            out,
            "{:<28} {:>7} {:>9} {:>11} {:>9} {:>6}",
            name(*id),
            c.started,
            c.succeeded,
            c.interrupted,
            c.timed_out,
            c.failed
        );
    }
    let summary = |v: &[u64]| {
        if v.is_empty() {
            "-".to_string()
        } else {
            let mean = v.iter().sum::<u64>() as f64 / v.len() as f64;
            format!("n={} mean={:.2} max={}", v.len(), mean, v.iter().max().unwrap())
        }
    };
    let _ = writeln!(out, "reaction latency (ticks):     {}", summary(&m.reaction_latency));
    let _ = writeln!(
        out,
        "interruption latency (ticks): {}",
        summary(&m.interruption_latency)
    );
    let _ = writeln!(out, "safety hold (ticks):          {}", m.hold_ticks);
    out
}
