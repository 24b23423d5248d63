//! The skills table transcription in tests/data and its comparison with
//! the shipped scenarios.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rhino_core::skillspec::{Arm, Scenario, SkillKind};

pub struct Row {
    pub group: String,
    pub object: String,
    pub skill: String,
    pub start: String,
    pub end: String,
    pub arm: String,
}

fn data_lines(text: &str) -> impl Iterator<Item = Vec<&str>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split('\t').collect())
}

pub fn rows(text: &str) -> Vec<Row> {
    data_lines(text)
        .map(|f| {
            assert_eq!(f.len(), 6, "bad row: {f:?}");
            Row {
                group: f[0].into(),
                object: f[1].into(),
                skill: f[2].into(),
                start: f[3].into(),
                end: f[4].into(),
                arm: f[5].into(),
            }
        })
        .collect()
}

/// (scenario, skill, reverse) triples.
pub fn reverse_pairs(text: &str) -> Vec<(String, String, String)> {
    data_lines(text)
        .map(|f| (f[0].into(), f[1].into(), f[2].into()))
        .collect()
}

fn arm_label(arm: Arm) -> &'static str {
    match arm {
        Arm::Left => "Left",
        Arm::Right => "Right",
        Arm::Dual => "Dual-Arm",
    }
}

/// The row as the scenario defines it, in the table's notation.
pub fn render(s: &Scenario, name: &str) -> Option<(String, String, String, String)> {
    let k = s.skill_by_name(name)?;
    let object = match k.object {
        Some(o) => s.object(o).unwrap().name.clone(),
        None => "None".into(),
    };
    let start = format!(
        "[{}, {}]",
        s.occ_atom_label(k.start.left),
        s.occ_atom_label(k.start.right)
    );
    let end = format!(
        "[{}, {}]",
        s.trans_atom_label(k.end.left),
        s.trans_atom_label(k.end.right)
    );
    Some((object, start, end, arm_label(k.arm).into()))
}

/// Rows the scenarios do not reproduce exactly.
pub fn row_diffs(rows: &[Row], scenarios: &[Scenario]) -> Vec<String> {
    let mut diffs = Vec::new();
    for row in rows {
        let owners: Vec<&Scenario> = match row.group.as_str() {
            "motion" => scenarios
                .iter()
                .filter(|s| s.skill_by_name(&row.skill).is_some())
                .collect(),
            g => scenarios.iter().filter(|s| s.name == g).collect(),
        };
        if owners.is_empty() {
            diffs.push(format!("{}: defined by no scenario", row.skill));
        }
        for s in owners {
            let want = (row.object.clone(), row.start.clone(), row.end.clone(), row.arm.clone());
            match render(s, &row.skill) {
                Some(got) if got == want => {}
                Some(got) => diffs.push(format!("{}/{}: want {want:?}, got {got:?}", s.name, row.skill)),
                None => diffs.push(format!("{}/{}: missing", s.name, row.skill)),
            }
        }
    }
    diffs
}

/// Skills a scenario defines that the table does not list for it.
pub fn extra_skills(rows: &[Row], scenarios: &[Scenario]) -> Vec<String> {
    let mut extra = Vec::new();
    for s in scenarios {
        for k in s.skills.iter().filter(|k| k.kind != SkillKind::Idle) {
            match rows.iter().find(|r| r.skill == k.name) {
                None => extra.push(format!("{}/{} is not in the table", s.name, k.name)),
                Some(r) if r.group != s.name && r.group != "motion" => {
                    extra.push(format!("{}/{} belongs to {}", s.name, k.name, r.group))
                }
                Some(r) if (k.kind == SkillKind::Motion) != (r.group == "motion") => {
                    extra.push(format!("{}/{} has the wrong kind", s.name, k.name))
                }
                Some(_) => {}
            }
        }
    }
    extra
}

/// Scenarios whose reverse links differ from the listed pairs (taken both
/// ways).
pub fn reverse_diffs(pairs: &[(String, String, String)], scenarios: &[Scenario]) -> Vec<String> {
    let mut diffs = Vec::new();
    for s in scenarios {
        let expected: BTreeSet<(String, String)> = pairs
            .iter()
            .filter(|(g, _, _)| *g == s.name)
            .flat_map(|(_, a, b)| [(a.clone(), b.clone()), (b.clone(), a.clone())])
            .collect();
        let actual: BTreeSet<(String, String)> = s
            .skills
            .iter()
            .filter_map(|k| k.reverse.map(|r| (k.name.clone(), s.skill(r).name.clone())))
            .collect();
        if actual != expected {
            diffs.push(format!("{}: reverses {actual:?}, want {expected:?}", s.name));
        }
    }
    diffs
}
