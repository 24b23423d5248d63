//! The 30 Hz simulated world and the engine that ties it to the planner,
//! the recognizer and the safety supervisor.
//!
//! Each tick runs in a fixed order: the world steps under the previous
//! planner command and reports skill feedback; the leader's intention is
//! taken from the input (or recognized from a noisy observation in raw
//! mode); the supervisor checks the new geometry; the planner decides the
//! next command.

mod executor;
mod leader;
mod motion;
mod script;
mod world;

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

pub use executor::{ManipExecutor, ManipStatus, PERIODIC_LEAD_IN, SUCCESS_STREAK};
pub use leader::{gesture, home_objects, observe, synthetic_model, LeaderPose, REST_HANDS};
pub use motion::{
    motion_chunk, solve_wrist_ik, wrist_position, Frame, History, LeaderFrame, MotionExecutor, CHUNK_FRAMES,
    DEFAULT_WAVE_PERIOD, HISTORY_TICKS, MAX_JOINT_DELTA,
};
pub use script::{Disturbance, InputLog, IntentionRef, LeaderInput, LeaderScript, ScriptEntry, ScriptError, MAX_TICKS};
pub use world::{Executor, LeaderState, Location, ObjectState, StepOutcome, WorldState};

use crate::intention::{encode_features, CentroidModel, FeatureVector, Recognizer};
use crate::planner::{Phase, Planner, PlannerCommand, PlannerError, PlannerState, SkillFeedback};
use crate::safety::{check, SafetyStatus, Verdict};
use crate::skillspec::{HandOccupancy, IntentionId, Scenario, SkillId};
use crate::trace::{order_tick_events, EventKind, StepRole, Trace, TraceEvent, TraceHeader, TraceLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunConfig {
    pub seed: u64,
    /// Recognize intentions from simulated observations instead of taking
    /// them from the input directly.
    pub recognizer: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

/// Everything one tick produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TickReport {
    pub tick: u64,
    pub intention: IntentionId,
    pub feedback: SkillFeedback,
    pub command: PlannerCommand,
    pub safety: SafetyStatus,
    pub events: Vec<TraceEvent>,
}

/// One planner and one world stepping in lockstep.
#[derive(Debug, Clone)]
pub struct Engine {
    scenario: Arc<Scenario>,
    config: RunConfig,
    planner: Planner,
    state: PlannerState,
    world: WorldState,
    model: Option<Arc<CentroidModel>>,
    last_command: PlannerCommand,
    safety: SafetyStatus,
    log: TraceLog,
    inputs: InputLog,
}

impl Engine {
    pub fn new(scenario: Arc<Scenario>, config: RunConfig) -> Self {
        let model = config
            .recognizer
            .then(|| Arc::new(synthetic_model(&scenario, config.seed)));
        Self::with_model(scenario, config, model)
    }

    /// Uses `model` for raw mode instead of fitting one.
    pub fn with_model(scenario: Arc<Scenario>, config: RunConfig, model: Option<Arc<CentroidModel>>) -> Self {
        let planner = Planner::new(scenario.clone());
        let state = planner.reset();
        let world = WorldState::new(&scenario, config.seed);
        Self {
            scenario,
            config,
            planner,
            state,
            world,
            model,
            last_command: PlannerCommand::NoOp,
            safety: SafetyStatus::safe(),
            log: TraceLog::new(),
            inputs: InputLog::new(),
        }
    }

    /// Back to tick 0 with the same scenario, seed and recognizer.
    pub fn reset(&mut self) {
        self.state = self.planner.reset();
        self.world = WorldState::new(&self.scenario, self.config.seed);
        self.last_command = PlannerCommand::NoOp;
        self.safety = SafetyStatus::safe();
        self.log.clear();
        self.inputs.clear();
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn config(&self) -> RunConfig {
        self.config
    }

    pub fn tick(&self) -> u64 {
        self.state.tick
    }

    pub fn planner_state(&self) -> &PlannerState {
        &self.state
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn safety(&self) -> &SafetyStatus {
        &self.safety
    }

    pub fn last_command(&self) -> PlannerCommand {
        self.last_command
    }

    pub fn log(&self) -> &TraceLog {
        &self.log
    }

    pub fn inputs(&self) -> &InputLog {
        &self.inputs
    }

    pub fn header(&self) -> TraceHeader {
        TraceHeader::new(&self.scenario, &self.config, &self.inputs)
    }

    pub fn trace(&self) -> Trace {
        Trace {
            header: self.header(),
            log: self.log.clone(),
        }
    }

    pub fn step(&mut self, input: &LeaderInput) -> Result<TickReport, EngineError> {
        if self.scenario.intention(input.intention).is_none() {
            return Err(PlannerError::UnknownIntention(input.intention).into());
        }
        let tick = self.state.tick;
        let scenario = self.scenario.clone();
        let outcome = self.world.step(&scenario, input, self.last_command);

        let intention = match &self.model {
            Some(model) => {
                let obs = self.world.observation(&scenario, true);
                model.recognize(&encode_features(&obs))
            }
            None => input.intention,
        };

        let robot = self.world.robot_keypoints(&scenario);
        let hands = self.world.hand_points();
        let p = &scenario.params;
        self.safety = check(&robot, &hands, p.safety_threshold, p.safety_hysteresis, &self.safety);

        let out = self
            .planner
            .tick(&mut self.state, intention, outcome.feedback, &self.safety)?;
        let mut events = out.events;
        events.extend(
            outcome
                .notes
                .into_iter()
                .map(|message| TraceEvent::new(tick, EventKind::Diagnostic { message })),
        );
        order_tick_events(&mut events);
        self.log
            .extend(events.iter().cloned())
            .expect("ticks only move forward");
        self.inputs.push(*input);
        self.last_command = out.command;
        Ok(TickReport {
            tick,
            intention,
            feedback: outcome.feedback,
            command: out.command,
            safety: self.safety,
            events,
        })
    }

    pub fn snapshot(&self) -> Snapshot {
        let robot = self.world.robot_keypoints(&self.scenario);
        let active = self.state.phase.active();
        let executor = match &self.world.executor {
            Executor::Manipulation(m) => Some(ExecutorView {
                kind: "manipulation",
                skill: Some(m.skill),
                progress: m.progress() as u64,
                signal: m.signal(),
                withdrawing: m.is_withdrawing(),
                paused: m.is_paused(),
            }),
            Executor::Motion(m) => Some(ExecutorView {
                kind: "motion",
                skill: m.skill,
                progress: m.t,
                signal: 0.0,
                withdrawing: false,
                paused: false,
            }),
            Executor::None => None,
        };
        Snapshot {
            tick: self.state.tick,
            phase: match (self.state.held, self.state.phase) {
                (true, _) => "held",
                (false, Phase::Idle) => "idle",
                (false, Phase::Executing(_)) => "executing",
            },
            skill: active.map(|a| a.skill),
            role: active.map(|a| a.role),
            occupancy: self.state.occupancy,
            debounce: DebounceView {
                candidate: self.state.debounce.candidate,
                streak: self.state.debounce.streak,
                since: self.state.debounce.since,
            },
            safety: SafetyView {
                verdict: self.safety.verdict,
                min_distance: self.safety.min_distance.is_finite().then_some(self.safety.min_distance),
                pair: self.safety.pair,
            },
            keypoints: KeypointsView {
                robot: robot
                    .iter()
                    .flat_map(|a| a.points.iter().map(|p| [p.x, p.y, p.z]))
                    .collect(),
                hands: self
                    .world
                    .hand_points()
                    .iter()
                    .flat_map(|h| h.points.iter().map(|p| [p.x, p.y, p.z]))
                    .collect(),
            },
            queue: self.state.queue.iter().map(|s| s.skill).collect(),
            executor,
            lamp_on: self.world.lamp_on,
            stamp_marks: self.world.stamp_marks,
            objects: self
                .world
                .objects
                .iter()
                .map(|o| ObjectView {
                    id: o.id.0,
                    location: o.location.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DebounceView {
    pub candidate: IntentionId,
    pub streak: u32,
    pub since: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetyView {
    pub verdict: Verdict,
    /// Absent when no hand is tracked.
    pub min_distance: Option<f64>,
    pub pair: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeypointsView {
    /// Seven per arm, left arm first.
    pub robot: Vec<[f64; 3]>,
    /// Five per tracked hand.
    pub hands: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutorView {
    pub kind: &'static str,
    pub skill: Option<SkillId>,
    pub progress: u64,
    pub signal: f64,
    pub withdrawing: bool,
    pub paused: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectView {
    pub id: u8,
    pub location: Location,
}

/// Best-effort view of an engine for displays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub tick: u64,
    pub phase: &'static str,
    pub skill: Option<SkillId>,
    pub role: Option<StepRole>,
    pub occupancy: HandOccupancy,
    pub debounce: DebounceView,
    pub safety: SafetyView,
    pub keypoints: KeypointsView,
    pub queue: Vec<SkillId>,
    pub executor: Option<ExecutorView>,
    pub lamp_on: bool,
    pub stamp_marks: u32,
    pub objects: Vec<ObjectView>,
}

/// A finished headless episode.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub header: TraceHeader,
    pub log: TraceLog,
    pub commands: Vec<PlannerCommand>,
    pub final_state: PlannerState,
    pub world: WorldState,
}

impl RunOutput {
    pub fn trace(&self) -> Trace {
        Trace {
            header: self.header.clone(),
            log: self.log.clone(),
        }
    }
}

/// Runs recorded inputs to completion. Inputs must name intentions of the
/// scenario.
pub fn run_inputs(scenario: &Scenario, inputs: &InputLog, config: &RunConfig) -> RunOutput {
    let mut engine = Engine::new(Arc::new(scenario.clone()), *config);
    let mut commands = Vec::with_capacity(inputs.len());
    for input in inputs.inputs() {
        let report = engine.step(input).expect("inputs are validated against the scenario");
        commands.push(report.command);
    }
    RunOutput {
        header: engine.header(),
        log: engine.log.clone(),
        commands,
        final_state: engine.state.clone(),
        world: engine.world.clone(),
    }
}

/// Runs a leader script for `ticks` ticks, or until its last entry ends.
pub fn run_script(
    scenario: &Scenario,
    script: &LeaderScript,
    config: &RunConfig,
    ticks: Option<u64>,
) -> Result<RunOutput, ScriptError> {
    let ticks = ticks.unwrap_or_else(|| script.end_tick());
    let inputs = InputLog::from_script(scenario, script, ticks)?;
    Ok(run_inputs(scenario, &inputs, config))
}

/// Noisy features for every tick of an episode, labelled with the intention
/// the leader held. The run draws observation noise exactly as raw mode
/// does but plans on the true intentions, as if recognition were perfect.
pub fn labeled_features(scenario: &Scenario, inputs: &InputLog, seed: u64) -> Vec<(FeatureVector, IntentionId)> {
    let scenario = Arc::new(scenario.clone());
    let mut engine = Engine::new(
        scenario.clone(),
        RunConfig {
            seed,
            recognizer: false,
        },
    );
    let mut out = Vec::with_capacity(inputs.len());
    for input in inputs.inputs() {
        engine.step(input).expect("inputs are validated against the scenario");
        let obs = engine.world.observation(&scenario, true);
        out.push((encode_features(&obs), input.intention));
    }
    out
}
