//! The reactive planner: intention debouncing, skill start and interruption
//! through reverse skills, automatic chaining along occupancy-graph paths,
//! success/timeout handling and safety holds.
//!
//! The planner is a pure state machine. [`Planner::tick`] is called once per
//! logical tick with the recognised intention, the executor feedback from the
//! world step of the same tick, and the safety verdict; it mutates the state
//! value and returns exactly one command plus the trace events of the tick.

use std::collections::VecDeque;
use std::sync::Arc;

use thiserror::Error;

pub use crate::skillspec::PlannerParams;

use crate::occgraph::{build_graph, OccGraph};
use crate::safety::SafetyStatus;
use crate::skillspec::{
    apply_transition, matches, HandOccupancy, IntentionId, IntentionRole, Scenario, SkillId, SkillKind,
};
use crate::trace::{order_tick_events, EventKind, StepRole, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActiveSkill {
    pub skill: SkillId,
    pub role: StepRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Idle,
    Executing(ActiveSkill),
}

impl Phase {
    pub fn active(&self) -> Option<ActiveSkill> {
        match self {
            Phase::Idle => None,
            Phase::Executing(a) => Some(*a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PlanStep {
    pub skill: SkillId,
    pub role: StepRole,
}

/// Run-length of the most recent recognised intention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Debounce {
    pub candidate: IntentionId,
    pub streak: u32,
    /// Tick at which the current run started.
    pub since: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SkillFeedback {
    NotRunning,
    Running(f64),
    Succeeded,
    Failed,
}

impl SkillFeedback {
    fn is_terminal(&self) -> bool {
        matches!(self, SkillFeedback::Succeeded | SkillFeedback::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FinishReason {
    Succeeded,
    TimedOut,
    Failed,
    Cancelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlannerCommand {
    NoOp,
    StartSkill(SkillId),
    ContinueSkill(SkillId),
    AbortToReverse { original: SkillId, reverse: SkillId },
    FinishToIdle(FinishReason),
    Hold,
    Resume,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerState {
    /// Number of ticks processed so far; the next tick gets this number.
    pub tick: u64,
    pub phase: Phase,
    /// Steps still to run after the active one.
    pub queue: VecDeque<PlanStep>,
    pub occupancy: HandOccupancy,
    pub debounce: Debounce,
    /// The intention the planner last acted on.
    pub active_intention: IntentionId,
    /// Unheld ticks since the active skill started.
    pub skill_elapsed: u32,
    pub held: bool,
    /// Terminal feedback that arrived while holding.
    pub deferred: Option<SkillFeedback>,
    /// A deferred success whose occupancy change is already applied.
    pub settled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub command: PlannerCommand,
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlannerError {
    #[error("intention {0} is not defined by the scenario")]
    UnknownIntention(IntentionId),
}

#[derive(Debug, Clone)]
pub struct Planner {
    scenario: Arc<Scenario>,
    graph: OccGraph,
    streak_cap: u32,
}

struct Emitter {
    tick: u64,
    events: Vec<TraceEvent>,
}

impl Emitter {
    fn push(&mut self, kind: EventKind) {
        self.events.push(TraceEvent::new(self.tick, kind));
    }
}

impl Planner {
    pub fn new(scenario: Arc<Scenario>) -> Self {
        let graph = build_graph(&scenario);
        let streak_cap = scenario.params.n_r.max(scenario.params.k_2);
        Self {
            scenario,
            graph,
            streak_cap,
        }
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn graph(&self) -> &OccGraph {
        &self.graph
    }

    pub fn reset(&self) -> PlannerState {
        let idle = self.scenario.idle_intention();
        PlannerState {
            tick: 0,
            phase: Phase::Idle,
            queue: VecDeque::new(),
            occupancy: self.scenario.initial_occupancy,
            debounce: Debounce {
                candidate: idle,
                streak: 0,
                since: 0,
            },
            active_intention: idle,
            skill_elapsed: 0,
            held: false,
            deferred: None,
            settled: false,
        }
    }

    pub fn tick(
        &self,
        st: &mut PlannerState,
        intention: IntentionId,
        feedback: SkillFeedback,
        safety: &SafetyStatus,
    ) -> Result<TickOutput, PlannerError> {
        if self.scenario.intention(intention).is_none() {
            return Err(PlannerError::UnknownIntention(intention));
        }
        let mut out = Emitter {
            tick: st.tick,
            events: Vec::new(),
        };
        st.tick += 1;

        if intention == st.debounce.candidate {
            st.debounce.streak = (st.debounce.streak + 1).min(self.streak_cap);
        } else {
            st.debounce = Debounce {
                candidate: intention,
                streak: 1,
                since: out.tick,
            };
            out.push(EventKind::IntentionObserved { intention });
        }

        let command = self.decide(st, feedback, safety, &mut out);
        let mut events = out.events;
        order_tick_events(&mut events);
        Ok(TickOutput { command, events })
    }

    fn decide(
        &self,
        st: &mut PlannerState,
        feedback: SkillFeedback,
        safety: &SafetyStatus,
        out: &mut Emitter,
    ) -> PlannerCommand {
        if safety.is_unsafe() {
            if !st.held {
                st.held = true;
                let (robot_point, hand_point) = safety.pair.unwrap_or((0, 0));
                out.push(EventKind::SafetyHalt {
                    robot_point: robot_point as u16,
                    hand_point: hand_point as u16,
                });
            }
            self.defer(st, feedback, out);
            return PlannerCommand::Hold;
        }
        if st.held {
            st.held = false;
            out.push(EventKind::SafetyResume);
            self.defer(st, feedback, out);
            return PlannerCommand::Resume;
        }

        let feedback = st.deferred.take().unwrap_or(feedback);
        if let Phase::Executing(active) = st.phase {
            st.skill_elapsed = st.skill_elapsed.saturating_add(1);
            // The world has already applied a terminal outcome, so it is
            // settled before any intention change is considered.
            match feedback {
                SkillFeedback::Succeeded => return self.on_success(st, active, out),
                SkillFeedback::Failed => {
                    out.push(EventKind::SkillFailed { skill: active.skill });
                    return finish(st, FinishReason::Failed);
                }
                _ => {}
            }
        }

        let threshold = match st.phase {
            Phase::Idle => self.scenario.params.n_r,
            Phase::Executing(_) => self.scenario.params.k_2,
        };
        if st.debounce.streak >= threshold && st.debounce.candidate != st.active_intention {
            if let Some(cmd) = self.on_stable_intention(st, out) {
                return cmd;
            }
        }

        match st.phase {
            Phase::Executing(active) => {
                let def = self.scenario.skill(active.skill);
                if st.skill_elapsed > def.timeout_ticks {
                    out.push(EventKind::SkillTimedOut { skill: active.skill });
                    finish(st, FinishReason::TimedOut)
                } else {
                    PlannerCommand::ContinueSkill(active.skill)
                }
            }
            Phase::Idle => PlannerCommand::NoOp,
        }
    }

    fn adopt(&self, st: &mut PlannerState, out: &mut Emitter) {
        st.active_intention = st.debounce.candidate;
        out.push(EventKind::IntentionStable {
            intention: st.debounce.candidate,
            since: st.debounce.since,
        });
    }

    /// Reacts to a newly stable intention. `None` means the intention does
    /// not change what runs and normal processing continues.
    fn on_stable_intention(&self, st: &mut PlannerState, out: &mut Emitter) -> Option<PlannerCommand> {
        let candidate = st.debounce.candidate;
        let def = self.scenario.intention(candidate)?;
        let active = st.phase.active();
        let current = active.map(|a| self.scenario.skill(a.skill));
        let current_kind = current.map(|s| s.kind);
        let interruptible = match (active, current) {
            (Some(a), Some(s)) => s.is_manipulation() && s.interruptible && a.role != StepRole::Rollback,
            _ => false,
        };
        let has_reverse = current.is_some_and(|s| s.reverse.is_some());

        match def.role {
            IntentionRole::Idle => match current_kind {
                Some(SkillKind::Manipulation) => {
                    self.adopt(st, out);
                    None
                }
                Some(_) => {
                    self.adopt(st, out);
                    let skill = active.expect("executing").skill;
                    out.push(EventKind::SkillSucceeded { skill });
                    Some(finish(st, FinishReason::Succeeded))
                }
                None => {
                    self.adopt(st, out);
                    Some(PlannerCommand::NoOp)
                }
            },
            IntentionRole::Cancel => match current_kind {
                Some(SkillKind::Manipulation) => {
                    self.adopt(st, out);
                    if !interruptible {
                        return None;
                    }
                    st.queue.clear();
                    if has_reverse {
                        Some(self.roll_back(st, out))
                    } else {
                        let skill = active.expect("executing").skill;
                        out.push(EventKind::SkillInterrupted { skill, by: candidate });
                        Some(finish(st, FinishReason::Cancelled))
                    }
                }
                Some(_) => {
                    self.adopt(st, out);
                    let skill = active.expect("executing").skill;
                    out.push(EventKind::SkillInterrupted { skill, by: candidate });
                    Some(finish(st, FinishReason::Cancelled))
                }
                None => {
                    self.adopt(st, out);
                    Some(PlannerCommand::NoOp)
                }
            },
            IntentionRole::Skill => {
                let target = def.skill?;
                if let Some(a) = active {
                    if a.skill == target && a.role != StepRole::Rollback {
                        // Already doing it; the rest of any chain is moot.
                        self.adopt(st, out);
                        st.queue.clear();
                        st.phase = Phase::Executing(ActiveSkill {
                            skill: target,
                            role: StepRole::Target,
                        });
                        return None;
                    }
                }
                if current_kind == Some(SkillKind::Manipulation) && !interruptible {
                    // Retried once the running skill finishes.
                    return None;
                }
                let start = self.scenario.skill(target).start;
                self.adopt(st, out);
                let path = match self.graph.find_path(st.occupancy, start) {
                    Ok(p) => p,
                    Err(e) => {
                        out.push(EventKind::Diagnostic {
                            message: format!(
                                "{e}: `{}` from {}",
                                self.scenario.skill(target).name,
                                self.scenario.occupancy_label(st.occupancy)
                            ),
                        });
                        return Some(PlannerCommand::NoOp);
                    }
                };
                if !path.is_empty() {
                    out.push(EventKind::PathPlanned {
                        target,
                        path: path.skills.clone(),
                    });
                }
                st.queue = path
                    .skills
                    .iter()
                    .map(|&skill| PlanStep {
                        skill,
                        role: StepRole::Path,
                    })
                    .chain(std::iter::once(PlanStep {
                        skill: target,
                        role: StepRole::Target,
                    }))
                    .collect();
                if interruptible && has_reverse {
                    return Some(self.roll_back(st, out));
                }
                if current_kind.is_some() {
                    // Motions and reverse-less manipulations simply stop.
                    out.push(EventKind::SkillInterrupted {
                        skill: active.expect("executing").skill,
                        by: candidate,
                    });
                }
                Some(self.start_next(st, out))
            }
        }
    }

    fn roll_back(&self, st: &mut PlannerState, out: &mut Emitter) -> PlannerCommand {
        let original = st.phase.active().expect("executing").skill;
        let reverse = self
            .scenario
            .skill(original)
            .reverse
            .expect("interruptible manipulation skills have a reverse");
        out.push(EventKind::SkillInterrupted {
            skill: original,
            by: st.active_intention,
        });
        out.push(EventKind::SkillStarted {
            skill: reverse,
            role: StepRole::Rollback,
        });
        st.phase = Phase::Executing(ActiveSkill {
            skill: reverse,
            role: StepRole::Rollback,
        });
        st.skill_elapsed = 0;
        PlannerCommand::AbortToReverse { original, reverse }
    }

    fn start_next(&self, st: &mut PlannerState, out: &mut Emitter) -> PlannerCommand {
        let Some(step) = st.queue.pop_front() else {
            return finish(st, FinishReason::Succeeded);
        };
        let def = self.scenario.skill(step.skill);
        if !matches(st.occupancy, def.start) {
            out.push(EventKind::Diagnostic {
                message: format!(
                    "queued skill `{}` cannot start from {}",
                    def.name,
                    self.scenario.occupancy_label(st.occupancy)
                ),
            });
            return finish(st, FinishReason::Failed);
        }
        out.push(EventKind::SkillStarted {
            skill: step.skill,
            role: step.role,
        });
        st.phase = Phase::Executing(ActiveSkill {
            skill: step.skill,
            role: step.role,
        });
        st.skill_elapsed = 0;
        PlannerCommand::StartSkill(step.skill)
    }

    fn on_success(&self, st: &mut PlannerState, active: ActiveSkill, out: &mut Emitter) -> PlannerCommand {
        if !std::mem::take(&mut st.settled) {
            self.settle_success(st, active, out);
        }
        if st.queue.is_empty() {
            finish(st, FinishReason::Succeeded)
        } else {
            self.start_next(st, out)
        }
    }

    /// Records a success and its occupancy change. The world moves objects
    /// as soon as a skill succeeds, held or not, so this never waits.
    fn settle_success(&self, st: &mut PlannerState, active: ActiveSkill, out: &mut Emitter) {
        let def = self.scenario.skill(active.skill);
        out.push(EventKind::SkillSucceeded { skill: active.skill });
        let before = st.occupancy;
        // The interrupted skill never completed, so undoing it leaves the
        // hands as they were when it started.
        if active.role != StepRole::Rollback {
            st.occupancy = apply_transition(before, def.end);
        }
        if st.occupancy != before {
            out.push(EventKind::OccupancyChanged {
                from: before,
                to: st.occupancy,
            });
        }
    }

    fn defer(&self, st: &mut PlannerState, feedback: SkillFeedback, out: &mut Emitter) {
        let Phase::Executing(active) = st.phase else {
            return;
        };
        if !feedback.is_terminal() || st.deferred.is_some() {
            return;
        }
        st.deferred = Some(feedback);
        if feedback == SkillFeedback::Succeeded {
            self.settle_success(st, active, out);
            st.settled = true;
        }
    }
}

fn finish(st: &mut PlannerState, reason: FinishReason) -> PlannerCommand {
    st.phase = Phase::Idle;
    st.queue.clear();
    st.skill_elapsed = 0;
    PlannerCommand::FinishToIdle(reason)
}
