//! Long randomized planner runs against a shadow occupancy model.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rhino_core::occgraph::build_graph;
use rhino_core::planner::{Phase, Planner, PlannerCommand, SkillFeedback};
use rhino_core::safety::{SafetyStatus, Verdict};
use rhino_core::skillspec::{apply_transition, builtin_scenario, matches, HandOccupancy, IntentionId, SkillKind};
use rhino_core::trace::{EventKind, StepRole};

/// Stand-in executor: manipulation skills succeed after a random number of
/// unheld ticks, occasionally fail at once; motions run until replaced.
struct FakeWorld {
    remaining: Option<u32>,
    fail_next: bool,
}

impl FakeWorld {
    fn feedback(
        &mut self,
        last: PlannerCommand,
        rng: &mut ChaCha8Rng,
        manipulation: impl Fn(PlannerCommand) -> bool,
    ) -> SkillFeedback {
        match last {
            PlannerCommand::StartSkill(_) | PlannerCommand::AbortToReverse { .. } => {
                self.fail_next = rng.gen_bool(0.05) && matches!(last, PlannerCommand::StartSkill(_));
                self.remaining = manipulation(last).then(|| rng.gen_range(1..80));
            }
            PlannerCommand::FinishToIdle(_) | PlannerCommand::NoOp => {
                self.remaining = None;
                return SkillFeedback::NotRunning;
            }
            PlannerCommand::Hold => return SkillFeedback::Running(0.0),
            _ => {}
        }
        if std::mem::take(&mut self.fail_next) {
            self.remaining = None;
            return SkillFeedback::Failed;
        }
        match &mut self.remaining {
            Some(0) => SkillFeedback::Running(1.0),
            Some(n) => {
                *n -= 1;
                if *n == 0 {
                    SkillFeedback::Succeeded
                } else {
                    SkillFeedback::Running(0.0)
                }
            }
            None => SkillFeedback::Running(0.0),
        }
    }
}

/// Panics on the first violated invariant, or if the run was too tame to
/// exercise interruptions, holds, failures, rollbacks and paths.
pub fn fuzz(scenario_name: &str, seed: u64, ticks: u64) {
    let scenario = Arc::new(builtin_scenario(scenario_name).unwrap());
    let graph = build_graph(&scenario);
    let planner = Planner::new(scenario.clone());
    let mut st = planner.reset();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut world = FakeWorld {
        remaining: None,
        fail_next: false,
    };
    let ids: Vec<IntentionId> = scenario.intentions.iter().map(|i| i.id).collect();
    let mut last = PlannerCommand::NoOp;
    let mut intention = scenario.idle_intention();
    let mut run_left = 0u32;
    let mut unsafe_left = 0u32;
    let mut shadow = st.occupancy;
    // Occupancy when each interrupted skill started, keyed by its reverse.
    let mut before_interrupted: BTreeMap<u16, HandOccupancy> = BTreeMap::new();
    let mut started_at: BTreeMap<u16, HandOccupancy> = BTreeMap::new();
    let mut seen: BTreeMap<&'static str, u32> = BTreeMap::new();
    let manipulation = |c: PlannerCommand| {
        let k = match c {
            PlannerCommand::StartSkill(k) => k,
            PlannerCommand::AbortToReverse { reverse, .. } => reverse,
            _ => return false,
        };
        scenario.skill(k).kind == SkillKind::Manipulation
    };

    for _ in 0..ticks {
        if run_left == 0 {
            intention = ids[rng.gen_range(0..ids.len())];
            run_left = if rng.gen_bool(0.3) {
                rng.gen_range(1..15)
            } else {
                rng.gen_range(15..90)
            };
        }
        run_left -= 1;
        if unsafe_left == 0 && rng.gen_bool(0.004) {
            unsafe_left = rng.gen_range(1..20);
        }
        let safety = if unsafe_left > 0 {
            unsafe_left -= 1;
            SafetyStatus {
                verdict: Verdict::Unsafe,
                min_distance: 0.05,
                pair: Some((0, 0)),
            }
        } else {
            SafetyStatus::safe()
        };
        let feedback = world.feedback(last, &mut rng, manipulation);
        let active_before = st.phase.active();
        let elapsed_before = st.skill_elapsed;
        let out = planner.tick(&mut st, intention, feedback, &safety).unwrap();

        for e in &out.events {
            *seen.entry(e.kind.name()).or_default() += 1;
            if let EventKind::SkillStarted { role, .. } = &e.kind {
                *seen
                    .entry(match role {
                        StepRole::Target => "target",
                        StepRole::Path => "path",
                        StepRole::Rollback => "rollback",
                    })
                    .or_default() += 1;
            }
            match &e.kind {
                EventKind::SkillSucceeded { skill } => {
                    let role = active_before.map(|a| a.role);
                    if scenario.skill(*skill).is_manipulation() {
                        if role == Some(StepRole::Rollback) {
                            let want = before_interrupted
                                .remove(&skill.0)
                                .expect("rollback follows an interruption");
                            assert_eq!(
                                shadow, want,
                                "rollback returns occupancy to its value before the interrupted skill"
                            );
                        } else {
                            shadow = apply_transition(shadow, scenario.skill(*skill).end);
                        }
                    }
                }
                EventKind::SkillInterrupted { skill, .. } => {
                    if let Some(r) = scenario.skill(*skill).reverse {
                        if let Some(&p) = started_at.get(&skill.0) {
                            before_interrupted.insert(r.0, p);
                        }
                    }
                }
                EventKind::SkillStarted { skill, role } => {
                    let def = scenario.skill(*skill);
                    if *role != StepRole::Rollback {
                        assert!(
                            matches(st.occupancy, def.start),
                            "{} started from {}",
                            def.name,
                            scenario.occupancy_label(st.occupancy)
                        );
                    }
                    started_at.insert(skill.0, st.occupancy);
                }
                EventKind::SkillTimedOut { .. } | EventKind::SkillFailed { .. } => {}
                _ => {}
            }
        }
        assert_eq!(st.occupancy, shadow, "occupancy soundness at tick {}", st.tick - 1);
        assert!(graph.contains(st.occupancy));
        assert!(st.debounce.streak <= scenario.params.n_r.max(scenario.params.k_2));
        if safety.verdict == Verdict::Unsafe {
            assert_eq!(out.command, PlannerCommand::Hold);
            assert!(st.held);
            assert_eq!(st.skill_elapsed, elapsed_before);
        }
        if let Phase::Executing(a) = st.phase {
            assert!(scenario.try_skill(a.skill).is_some());
        }
        last = out.command;
    }
    for kind in [
        "SkillSucceeded",
        "SkillInterrupted",
        "SafetyHalt",
        "SkillFailed",
        "rollback",
        "path",
        "OccupancyChanged",
    ] {
        assert!(
            seen.get(kind).copied().unwrap_or(0) >= 5,
            "{scenario_name}: too few {kind}: {seen:?}"
        );
    }
}
