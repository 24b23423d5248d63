//! Bodies of the fuzz targets. Each accepts arbitrary bytes, must not
//! panic, and checks that whatever parses survives a round trip.

use std::sync::OnceLock;

use rhino_core::intention::{classify, CentroidModel, FeatureVector, FEATURE_DIM};
use rhino_core::simworld::{InputLog, LeaderScript};
use rhino_core::skillspec::{builtin_scenario, load_scenario, load_scenario_str, Scenario};
use rhino_core::trace::{Trace, TraceLog};
use rhino_server::parse_client;

/// Longest horizon a script input is expanded over.
const MAX_FUZZ_TICKS: u64 = 20_000;

fn dining() -> &'static Scenario {
    static S: OnceLock<Scenario> = OnceLock::new();
    S.get_or_init(|| builtin_scenario("dining").expect("builtin scenario"))
}

pub fn scenario_load(data: &[u8]) {
    if let Ok(s) = load_scenario(data) {
        let again = load_scenario_str(&s.to_json()).expect("serialized scenario reloads");
        assert_eq!(again, s);
    }
}

pub fn trace_parse(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = Trace::parse(text) {
        assert_eq!(Trace::parse(&t.to_jsonl()).expect("written trace parses"), t);
    }
    if let Ok(log) = TraceLog::parse_jsonl(text, 1) {
        assert_eq!(
            TraceLog::parse_jsonl(&log.to_jsonl(), 1).expect("written log parses"),
            log
        );
    }
}

pub fn leader_script(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(script) = LeaderScript::parse(text) else { return };
    let s = dining();
    let ticks = script.end_tick();
    if ticks > MAX_FUZZ_TICKS {
        return;
    }
    if let Ok(inputs) = InputLog::from_script(s, &script, ticks) {
        let compact = inputs.to_script_for(s);
        let again = InputLog::from_script(s, &compact, ticks).expect("compacted script expands");
        assert_eq!(again, inputs);
    }
}

pub fn wire_message(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(msg) = parse_client(text) {
        let json = serde_json::to_string(&msg).expect("client messages serialize");
        assert_eq!(parse_client(&json).expect("serialized message parses"), msg);
    }
}

pub fn centroid_model(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = CentroidModel::from_json(text) {
        let again = CentroidModel::from_json(&m.to_json()).expect("written model loads");
        assert_eq!(again, m);
        let (best, scores) = classify(&m, &FeatureVector([0.0; FEATURE_DIM]));
        assert_eq!(scores.len(), m.classes().len());
        assert!(m.classes().iter().any(|c| c.id == best));
    }
}
