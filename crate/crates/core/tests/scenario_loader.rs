//! Scenario documents: round trips and hostile input.

use proptest::prelude::*;

use rhino_core::skillspec::{
    builtin_scenario, builtin_scenarios, load_scenario, load_scenario_str, ScenarioError, SkillKind, ValidationIssue,
    DINING_SCENARIO, OFFICE_SCENARIO,
};

#[test]
fn serialized_scenarios_load_back_equal() {
    for s in builtin_scenarios() {
        let again = load_scenario_str(&s.to_json()).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.to_json(), s.to_json());
    }
}

#[test]
fn builtin_counts() {
    let dining = builtin_scenario("dining").unwrap();
    let office = builtin_scenario("office").unwrap();
    assert_eq!(dining.skills.len(), 17);
    assert_eq!(office.skills.len(), 13);
    assert_eq!(dining.count_kind(SkillKind::Manipulation), 10);
    assert_eq!(dining.count_kind(SkillKind::Motion), 6);
    assert_eq!(office.count_kind(SkillKind::Manipulation), 7);
    assert!(builtin_scenario("kitchen").is_none());
}

#[test]
fn unknown_fields_are_rejected() {
    let mut doc: serde_json::Value = serde_json::from_str(DINING_SCENARIO).unwrap();
    doc["skills"][1]["colour"] = "red".into();
    assert!(matches!(
        load_scenario_str(&doc.to_string()),
        Err(ScenarioError::Parse { .. })
    ));
}

#[test]
fn duplicate_names_are_reported() {
    let mut doc: serde_json::Value = serde_json::from_str(OFFICE_SCENARIO).unwrap();
    let name = doc["skills"][1]["name"].clone();
    doc["skills"][2]["name"] = name;
    let err = load_scenario_str(&doc.to_string()).unwrap_err();
    assert!(
        err.issues()
            .iter()
            .any(|i| matches!(i, ValidationIssue::Duplicate { what: "skill", .. })),
        "{err}"
    );
}

#[test]
fn non_utf8_is_a_parse_error() {
    assert!(matches!(
        load_scenario(&[0xff, 0xfe, b'{']),
        Err(ScenarioError::Parse { .. })
    ));
}

fn document() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just(DINING_SCENARIO), Just(OFFICE_SCENARIO)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn truncated_documents_fail_cleanly(doc in document(), cut in any::<prop::sample::Index>()) {
        let end = cut.index(doc.len());
        prop_assume!(doc.is_char_boundary(end));
        prop_assert!(load_scenario_str(&doc[..end]).is_err());
    }

    #[test]
    fn byte_flips_never_panic(doc in document(), at in any::<prop::sample::Index>(), byte in any::<u8>()) {
        let mut bytes = doc.as_bytes().to_vec();
        let i = at.index(bytes.len());
        bytes[i] = byte;
        if let Ok(s) = load_scenario(&bytes) {
            // Whatever loads is internally consistent.
            for k in &s.skills {
                if let Some(r) = k.reverse {
                    prop_assert!(s.try_skill(r).is_some());
                }
            }
            prop_assert_eq!(load_scenario_str(&s.to_json()).unwrap(), s);
        }
    }

    #[test]
    fn numeric_fields_accept_only_valid_values(field in 0usize..3, value in -5i64..2000) {
        let mut doc: serde_json::Value = serde_json::from_str(DINING_SCENARIO).unwrap();
        let key = ["n_r", "k_2", "tick_rate"][field];
        doc["params"][key] = value.into();
        let loaded = load_scenario_str(&doc.to_string());
        if value <= 0 {
            prop_assert!(loaded.is_err());
        }
    }
}
