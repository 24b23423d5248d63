//! Exhaustive shortest-chain oracle for the occupancy graph.

#![allow(dead_code)]

use rhino_core::occgraph::{NoPath, OccGraph};
use rhino_core::skillspec::{apply_transition, matches, HandOccupancy, OccupancyPattern, Scenario, SkillId};

/// Every acyclic manipulation-skill sequence of exactly `len` steps from
/// `from`, in lexicographic skill-id order, stopping at the first that ends
/// in `goal`.
fn first_of_length(
    s: &Scenario,
    from: HandOccupancy,
    goal: OccupancyPattern,
    len: usize,
    visited: &mut Vec<HandOccupancy>,
    seq: &mut Vec<SkillId>,
) -> Option<Vec<SkillId>> {
    let here = *visited.last().unwrap_or(&from);
    if seq.len() == len {
        return matches(here, goal).then(|| seq.clone());
    }
    let mut skills: Vec<_> = s.manipulation_skills().collect();
    skills.sort_by_key(|k| k.id);
    for k in skills {
        if !matches(here, k.start) {
            continue;
        }
        let next = apply_transition(here, k.end);
        if next == from || visited.contains(&next) {
            continue;
        }
        visited.push(next);
        seq.push(k.id);
        let found = first_of_length(s, from, goal, len, visited, seq);
        seq.pop();
        visited.pop();
        if found.is_some() {
            return found;
        }
    }
    None
}

pub fn oracle(s: &Scenario, g: &OccGraph, from: HandOccupancy, goal: OccupancyPattern) -> Option<Vec<SkillId>> {
    (0..=g.nodes().len()).find_map(|len| first_of_length(s, from, goal, len, &mut Vec::new(), &mut Vec::new()))
}

pub fn replay(s: &Scenario, from: HandOccupancy, path: &[SkillId]) -> HandOccupancy {
    path.iter().fold(from, |p, &k| {
        let def = s.skill(k);
        assert!(
            matches(p, def.start),
            "{} cannot start from {}",
            def.name,
            s.occupancy_label(p)
        );
        apply_transition(p, def.end)
    })
}

/// Compares `find_path` with the oracle from every node to every skill's
/// start condition. Returns the pairs checked and how many had no path.
pub fn check_all(s: &Scenario, g: &OccGraph) -> Result<(usize, usize), String> {
    let mut checked = 0;
    let mut no_path = 0;
    for &from in g.nodes() {
        for k in &s.skills {
            let label = || format!("{} from {} to {}", s.name, s.occupancy_label(from), k.name);
            match (g.find_path(from, k.start), oracle(s, g, from, k.start)) {
                (Ok(path), Some(seq)) => {
                    if path.skills != seq {
                        return Err(format!("{}: graph {:?}, oracle {seq:?}", label(), path.skills));
                    }
                    if replay(s, from, &path.skills) != path.terminal || !matches(path.terminal, k.start) {
                        return Err(format!("{}: path does not end where it claims", label()));
                    }
                }
                (Err(NoPath), None) => no_path += 1,
                (got, want) => return Err(format!("{}: graph {got:?}, oracle {want:?}", label())),
            }
            checked += 1;
        }
    }
    Ok((checked, no_path))
}
