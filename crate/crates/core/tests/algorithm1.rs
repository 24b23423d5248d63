//! Planner conformance: exact event sequences for hand-written scripts and
//! long randomized runs checked against a shadow occupancy model.

mod support {
    pub mod conformance;
    pub mod planner_fuzz;
}

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rhino_core::planner::{Phase, Planner, PlannerCommand, SkillFeedback};
use rhino_core::safety::SafetyStatus;
use rhino_core::skillspec::{builtin_scenario, IntentionId};
use support::conformance::{parse_scripts, run};
use support::planner_fuzz::fuzz;

const SCRIPTS: &str = include_str!("data/algorithm1.scripts");

#[test]
fn every_script_produces_its_exact_events() {
    let scripts = parse_scripts(SCRIPTS).unwrap();
    assert!(scripts.len() >= 12, "only {} scripts", scripts.len());
    let failures: Vec<String> = scripts.iter().filter_map(|s| run(s).err()).collect();
    assert!(failures.is_empty(), "{}", failures.join("\n\n"));
}

#[test]
fn scripts_cover_every_behaviour() {
    let scripts = parse_scripts(SCRIPTS).unwrap();
    let all: Vec<&str> = scripts
        .iter()
        .flat_map(|s| s.events.iter().map(|(_, e)| e.as_str()))
        .collect();
    for needle in [
        "started",
        "rollback",
        "path ",
        "timed out",
        "halt",
        "resume",
        "diagnostic",
        "interrupted",
        "failed",
    ] {
        assert!(all.iter().any(|e| e.contains(needle)), "no script shows `{needle}`");
    }
}

#[test]
fn a_wrong_expectation_is_reported() {
    let mut scripts = parse_scripts(SCRIPTS).unwrap();
    let s = &mut scripts[0];
    s.events[2].0 += 1;
    assert!(run(s).is_err());
}

#[test]
fn hundred_thousand_random_ticks_keep_occupancy_sound() {
    fuzz("dining", 1, 60_000);
    fuzz("office", 2, 40_000);
}

#[test]
fn reset_equals_fresh_state_after_fuzzing() {
    let s = Arc::new(builtin_scenario("dining").unwrap());
    let planner = Planner::new(s.clone());
    let fresh = planner.reset();
    let mut st = planner.reset();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5_000 {
        let i = s.intentions[rng.gen_range(0..s.intentions.len())].id;
        planner
            .tick(&mut st, i, SkillFeedback::Running(0.0), &SafetyStatus::safe())
            .unwrap();
    }
    assert_ne!(st, fresh);
    assert_eq!(planner.reset(), fresh);
    assert_eq!(Planner::new(s).reset(), fresh);
}

fn commands_for(stream: &[IntentionId]) -> Vec<PlannerCommand> {
    let s = Arc::new(builtin_scenario("dining").unwrap());
    let planner = Planner::new(s);
    let mut st = planner.reset();
    stream
        .iter()
        .map(|&i| {
            let fb = if st.phase == Phase::Idle {
                SkillFeedback::NotRunning
            } else {
                SkillFeedback::Running(0.0)
            };
            planner.tick(&mut st, i, fb, &SafetyStatus::safe()).unwrap().command
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn short_bursts_never_change_the_running_skill(
        base in 2u16..17,
        burst in 0u16..17,
        burst_len in 1usize..15,
        at in 20usize..60,
    ) {
        prop_assume!(burst != base);
        let base = IntentionId(base);
        let mut stream = vec![base; 80];
        for t in stream.iter_mut().skip(at).take(burst_len) {
            *t = IntentionId(burst);
        }
        let cmds = commands_for(&stream);
        let baseline = commands_for(&[base; 80]);
        // Whatever the base intention started is still what runs.
        prop_assert_eq!(&cmds[..at], &baseline[..at]);
        for (c, b) in cmds.iter().zip(&baseline).skip(at) {
            prop_assert_eq!(c, b);
        }
    }

    #[test]
    fn identical_streams_give_identical_commands(stream in prop::collection::vec(0u16..17, 1..300)) {
        let stream: Vec<IntentionId> = stream.into_iter().map(IntentionId).collect();
        prop_assert_eq!(commands_for(&stream), commands_for(&stream));
    }

    #[test]
    fn skills_start_exactly_when_streak_reaches_n_r(lead in 0usize..30, hold in 1usize..40) {
        let mut stream = vec![IntentionId(0); lead];
        stream.extend(std::iter::repeat_n(IntentionId(2), hold));
        let cmds = commands_for(&stream);
        let first_start = cmds.iter().position(|c| matches!(c, PlannerCommand::StartSkill(_)));
        if hold >= 15 {
            prop_assert_eq!(first_start, Some(lead + 14));
        } else {
            prop_assert_eq!(first_start, None);
        }
    }
}
