//! Directed occupancy-transition graph: hand occupancies are nodes and
//! manipulation skills are edges. Breadth-first search over it yields the
//! shortest chain of skills that establishes an unmet start condition.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::skillspec::{
    apply_transition, matches, HandOccupancy, OccupancyPattern, Scenario, SkillId, TransitionPattern,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: HandOccupancy,
    pub skill: SkillId,
    pub to: HandOccupancy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccGraph {
    nodes: Vec<HandOccupancy>,
    edges: Vec<Edge>,
    /// Manipulation skills sorted by id.
    skills: Vec<(SkillId, OccupancyPattern, TransitionPattern)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillPath {
    pub skills: Vec<SkillId>,
    pub terminal: HandOccupancy,
}

impl SkillPath {
    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no skill chain reaches the requested start condition")]
pub struct NoPath;

/// Builds the graph of occupancies reachable from the scenario's initial
/// occupancy. Only manipulation skills contribute edges.
pub fn build_graph(s: &Scenario) -> OccGraph {
    let mut skills: Vec<_> = s.manipulation_skills().map(|k| (k.id, k.start, k.end)).collect();
    skills.sort_by_key(|(id, _, _)| *id);

    let mut graph = OccGraph {
        nodes: Vec::new(),
        edges: Vec::new(),
        skills,
    };
    let mut seen = BTreeSet::from([s.initial_occupancy]);
    let mut queue = VecDeque::from([s.initial_occupancy]);
    while let Some(p) = queue.pop_front() {
        let next: Vec<_> = graph.successors(p).collect();
        for (skill, to) in next {
            graph.edges.push(Edge { from: p, skill, to });
            if seen.insert(to) {
                queue.push_back(to);
            }
        }
    }
    graph.nodes = seen.into_iter().collect();
    graph.edges.sort();
    graph
}

impl OccGraph {
    pub fn nodes(&self) -> &[HandOccupancy] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains(&self, p: HandOccupancy) -> bool {
        self.nodes.binary_search(&p).is_ok()
    }

    /// Outgoing (skill, target) pairs of `p` in ascending skill id order.
    pub fn successors(&self, p: HandOccupancy) -> impl Iterator<Item = (SkillId, HandOccupancy)> + '_ {
        self.skills
            .iter()
            .filter(move |(_, start, _)| matches(p, *start))
            .map(move |(id, _, end)| (*id, apply_transition(p, *end)))
    }

    /// Fewest-skill chain from `from` to any occupancy matching `goal`.
    /// Among equally short chains the lexicographically smallest sequence of
    /// skill ids wins: successors are expanded in ascending id order and each
    /// node keeps the parent that discovered it first.
    pub fn find_path(&self, from: HandOccupancy, goal: OccupancyPattern) -> Result<SkillPath, NoPath> {
        if matches(from, goal) {
            return Ok(SkillPath {
                skills: Vec::new(),
                terminal: from,
            });
        }
        let mut parent: BTreeMap<HandOccupancy, (HandOccupancy, SkillId)> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        while let Some(p) = queue.pop_front() {
            for (skill, to) in self.successors(p) {
                if to == from || parent.contains_key(&to) {
                    continue;
                }
                parent.insert(to, (p, skill));
                if matches(to, goal) {
                    let mut skills = vec![skill];
                    let mut cur = p;
                    while cur != from {
                        let (prev, k) = parent[&cur];
                        skills.push(k);
                        cur = prev;
                    }
                    skills.reverse();
                    return Ok(SkillPath { skills, terminal: to });
                }
                queue.push_back(to);
            }
        }
        Err(NoPath)
    }
}

pub fn find_path(g: &OccGraph, from: HandOccupancy, goal: OccupancyPattern) -> Result<SkillPath, NoPath> {
    g.find_path(from, goal)
}

/// Graphviz rendering with occupancy labels as node names.
pub fn to_dot(g: &OccGraph, s: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", s.name);
    let _ = writeln!(out, "  rankdir=LR;");
    for &n in g.nodes() {
        let label = s.occupancy_label(n);
        if n == s.initial_occupancy {
            let _ = writeln!(out, "  \"{label}\" [shape=doublecircle];");
        } else {
            let _ = writeln!(out, "  \"{label}\";");
        }
    }
    for e in g.edges() {
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{}\"];",
            s.occupancy_label(e.from),
            s.occupancy_label(e.to),
            s.skill(e.skill).name
        );
    }
    out.push_str("}\n");
    out
}
