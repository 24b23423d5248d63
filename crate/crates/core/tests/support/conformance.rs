//! Runs planner scripts written in the small language described at the top
//! of tests/data/algorithm1.scripts.

#![allow(dead_code)]

use std::sync::Arc;

use rhino_core::planner::{Planner, PlannerCommand, SkillFeedback};
use rhino_core::safety::{SafetyStatus, Verdict};
use rhino_core::skillspec::{builtin_scenario, Scenario};
use rhino_core::trace::{EventKind, StepRole, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feedback {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone)]
pub struct Step {
    pub ticks: u64,
    pub intention: String,
    pub feedback: Feedback,
    pub unsafe_: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Script {
    pub name: String,
    pub scenario: String,
    pub steps: Vec<Step>,
    pub events: Vec<(u64, String)>,
    pub commands: Vec<(u64, String)>,
    pub occupancy: Option<String>,
}

fn tick_and_rest(line: &str) -> Result<(u64, String), String> {
    let (t, rest) = line
        .split_once(' ')
        .ok_or_else(|| format!("missing tick in `{line}`"))?;
    let t = t.parse().map_err(|_| format!("bad tick in `{line}`"))?;
    Ok((t, rest.to_string()))
}

pub fn parse_scripts(text: &str) -> Result<Vec<Script>, String> {
    let mut scripts: Vec<Script> = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix("== ") {
            scripts.push(Script {
                name: name.to_string(),
                ..Script::default()
            });
            continue;
        }
        let script = scripts.last_mut().ok_or("step before the first script header")?;
        let (word, rest) = line.split_once(' ').unwrap_or((line, ""));
        let step = |ticks: u64, intention: &str, feedback, unsafe_| Step {
            ticks,
            intention: intention.to_string(),
            feedback,
            unsafe_,
        };
        match word {
            "scenario" => script.scenario = rest.to_string(),
            "hold" | "unsafe" => {
                let (n, name) = tick_and_rest(rest)?;
                script.steps.push(step(n, &name, Feedback::Running, word == "unsafe"));
            }
            "succeed" => script.steps.push(step(1, rest, Feedback::Succeeded, false)),
            "fail" => script.steps.push(step(1, rest, Feedback::Failed, false)),
            "unsafe-succeed" => script.steps.push(step(1, rest, Feedback::Succeeded, true)),
            "expect" => script.events.push(tick_and_rest(rest)?),
            "command" => script.commands.push(tick_and_rest(rest)?),
            "occupancy" => script.occupancy = Some(rest.to_string()),
            other => return Err(format!("{}: unknown directive `{other}`", script.name)),
        }
    }
    Ok(scripts)
}

fn role(r: StepRole) -> &'static str {
    match r {
        StepRole::Target => "target",
        StepRole::Path => "path",
        StepRole::Rollback => "rollback",
    }
}

pub fn describe_event(s: &Scenario, e: &EventKind) -> String {
    let intention = |id| s.intention(id).map_or("?".to_string(), |i| i.name.clone());
    let skill = |id| s.skill(id).name.clone();
    match e {
        EventKind::IntentionObserved { intention: i } => format!("observed {}", intention(*i)),
        EventKind::IntentionStable { intention: i, since } => format!("stable {} since {since}", intention(*i)),
        EventKind::SafetyHalt { .. } => "halt".into(),
        EventKind::SafetyResume => "resume".into(),
        EventKind::SkillSucceeded { skill: k } => format!("succeeded {}", skill(*k)),
        EventKind::SkillTimedOut { skill: k } => format!("timed out {}", skill(*k)),
        EventKind::SkillFailed { skill: k } => format!("failed {}", skill(*k)),
        EventKind::OccupancyChanged { from, to } => {
            format!("occupancy {} -> {}", s.occupancy_label(*from), s.occupancy_label(*to))
        }
        EventKind::SkillInterrupted { skill: k, by } => format!("interrupted {} by {}", skill(*k), intention(*by)),
        EventKind::PathPlanned { target, path } => format!(
            "path {}: {}",
            skill(*target),
            path.iter().map(|&k| skill(k)).collect::<Vec<_>>().join(", ")
        ),
        EventKind::SkillStarted { skill: k, role: r } => format!("started {} {}", skill(*k), role(*r)),
        EventKind::Diagnostic { .. } => "diagnostic".into(),
    }
}

pub fn describe_command(s: &Scenario, c: &PlannerCommand) -> String {
    let skill = |id| s.skill(id).name.clone();
    match c {
        PlannerCommand::NoOp => "NoOp".into(),
        PlannerCommand::Hold => "Hold".into(),
        PlannerCommand::Resume => "Resume".into(),
        PlannerCommand::StartSkill(k) => format!("StartSkill {}", skill(*k)),
        PlannerCommand::ContinueSkill(k) => format!("ContinueSkill {}", skill(*k)),
        PlannerCommand::AbortToReverse { original, reverse } => {
            format!("AbortToReverse {} -> {}", skill(*original), skill(*reverse))
        }
        PlannerCommand::FinishToIdle(reason) => format!("FinishToIdle {reason:?}"),
    }
}

/// Runs a script and compares the full event list, the spot-checked
/// commands and the final occupancy. The error names every mismatch.
pub fn run(script: &Script) -> Result<(), String> {
    let scenario =
        Arc::new(builtin_scenario(&script.scenario).ok_or_else(|| format!("unknown scenario `{}`", script.scenario))?);
    let planner = Planner::new(scenario.clone());
    let mut state = planner.reset();
    let mut events: Vec<TraceEvent> = Vec::new();
    let mut commands: Vec<PlannerCommand> = Vec::new();
    let unsafe_status = SafetyStatus {
        verdict: Verdict::Unsafe,
        min_distance: 0.05,
        pair: Some((3, 0)),
    };
    for step in &script.steps {
        let id = scenario
            .intention_by_name(&step.intention)
            .ok_or_else(|| format!("unknown intention `{}`", step.intention))?
            .id;
        for _ in 0..step.ticks {
            let feedback = match (step.feedback, state.phase.active()) {
                (Feedback::Succeeded, _) => SkillFeedback::Succeeded,
                (Feedback::Failed, _) => SkillFeedback::Failed,
                (Feedback::Running, Some(_)) => SkillFeedback::Running(0.0),
                (Feedback::Running, None) => SkillFeedback::NotRunning,
            };
            let safety = if step.unsafe_ {
                unsafe_status
            } else {
                SafetyStatus::safe()
            };
            let out = planner
                .tick(&mut state, id, feedback, &safety)
                .map_err(|e| e.to_string())?;
            events.extend(out.events);
            commands.push(out.command);
        }
    }

    let mut problems = Vec::new();
    let got: Vec<(u64, String)> = events
        .iter()
        .map(|e| (e.tick, describe_event(&scenario, &e.kind)))
        .collect();
    if got != script.events {
        let fmt = |v: &[(u64, String)]| {
            v.iter()
                .map(|(t, d)| format!("  {t} {d}"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        problems.push(format!(
            "events differ\nwant:\n{}\ngot:\n{}",
            fmt(&script.events),
            fmt(&got)
        ));
    }
    for (tick, want) in &script.commands {
        match commands.get(*tick as usize) {
            Some(c) => {
                let got = describe_command(&scenario, c);
                if &got != want {
                    problems.push(format!("tick {tick}: want command `{want}`, got `{got}`"));
                }
            }
            None => problems.push(format!("tick {tick}: script ran only {} ticks", commands.len())),
        }
    }
    if let Some(want) = &script.occupancy {
        let got = scenario.occupancy_label(state.occupancy);
        if &got != want {
            problems.push(format!("final occupancy: want {want}, got {got}"));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(format!("{}:\n{}", script.name, problems.join("\n")))
    }
}
