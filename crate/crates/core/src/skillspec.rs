//! Scenario and skill definitions, the hand-occupancy pattern algebra, and
//! loading/validation of scenario documents.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::safety::{Joint, KinematicChain, NamedFrames};

/// The occupancy one-hot has five slots per hand.
pub const MAX_OBJECTS: usize = 5;
pub const DEFAULT_SUCCESS_TAIL: u32 = 25;
pub const DEFAULT_NOMINAL_TICKS: u32 = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SkillId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntentionId(pub u16);

impl fmt::Display for SkillId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for IntentionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub const BOTH: [Hand; 2] = [Hand::Left, Hand::Right];

    pub fn index(self) -> usize {
        match self {
            Hand::Left => 0,
            Hand::Right => 1,
        }
    }
}

/// What each robot hand currently holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[Option<ObjectId>; 2]", into = "[Option<ObjectId>; 2]")]
pub struct HandOccupancy {
    pub left: Option<ObjectId>,
    pub right: Option<ObjectId>,
}

impl HandOccupancy {
    pub const EMPTY: HandOccupancy = HandOccupancy {
        left: None,
        right: None,
    };

    pub fn new(left: Option<ObjectId>, right: Option<ObjectId>) -> Self {
        Self { left, right }
    }

    pub fn hand(&self, hand: Hand) -> Option<ObjectId> {
        match hand {
            Hand::Left => self.left,
            Hand::Right => self.right,
        }
    }

    /// Every occupancy over `objects` (including empty hands), in
    /// lexicographic order.
    pub fn enumerate(objects: &[ObjectId]) -> Vec<HandOccupancy> {
        let slots: Vec<Option<ObjectId>> = std::iter::once(None).chain(objects.iter().copied().map(Some)).collect();
        let mut all = Vec::with_capacity(slots.len() * slots.len());
        for &l in &slots {
            for &r in &slots {
                all.push(HandOccupancy::new(l, r));
            }
        }
        all
    }
}

impl From<[Option<ObjectId>; 2]> for HandOccupancy {
    fn from([left, right]: [Option<ObjectId>; 2]) -> Self {
        Self { left, right }
    }
}

impl From<HandOccupancy> for [Option<ObjectId>; 2] {
    fn from(p: HandOccupancy) -> Self {
        [p.left, p.right]
    }
}

/// Start-condition atom for one hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OccAtom {
    Empty,
    Any,
    Exactly(ObjectId),
}

impl OccAtom {
    pub fn matches(self, held: Option<ObjectId>) -> bool {
        match self {
            OccAtom::Empty => held.is_none(),
            OccAtom::Any => true,
            OccAtom::Exactly(k) => held == Some(k),
        }
    }
}

/// End-transition atom for one hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransAtom {
    Unchanged,
    SetEmpty,
    Set(ObjectId),
}

impl TransAtom {
    pub fn apply(self, held: Option<ObjectId>) -> Option<ObjectId> {
        match self {
            TransAtom::Unchanged => held,
            TransAtom::SetEmpty => None,
            TransAtom::Set(k) => Some(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OccupancyPattern {
    pub left: OccAtom,
    pub right: OccAtom,
}

impl OccupancyPattern {
    pub const ANY: OccupancyPattern = OccupancyPattern {
        left: OccAtom::Any,
        right: OccAtom::Any,
    };

    pub fn new(left: OccAtom, right: OccAtom) -> Self {
        Self { left, right }
    }

    pub fn atom(&self, hand: Hand) -> OccAtom {
        match hand {
            Hand::Left => self.left,
            Hand::Right => self.right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransitionPattern {
    pub left: TransAtom,
    pub right: TransAtom,
}

impl TransitionPattern {
    pub const IDENTITY: TransitionPattern = TransitionPattern {
        left: TransAtom::Unchanged,
        right: TransAtom::Unchanged,
    };

    pub fn new(left: TransAtom, right: TransAtom) -> Self {
        Self { left, right }
    }

    pub fn atom(&self, hand: Hand) -> TransAtom {
        match hand {
            Hand::Left => self.left,
            Hand::Right => self.right,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

pub fn matches(p: HandOccupancy, pat: OccupancyPattern) -> bool {
    pat.left.matches(p.left) && pat.right.matches(p.right)
}

pub fn apply_transition(p: HandOccupancy, t: TransitionPattern) -> HandOccupancy {
    HandOccupancy {
        left: t.left.apply(p.left),
        right: t.right.apply(p.right),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillKind {
    Motion,
    Manipulation,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Left,
    Right,
    Dual,
}

/// What a manipulation executor does while the leader disturbs it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbancePolicy {
    PauseInPlace,
    Withdraw,
}

/// Procedural generator behind a motion skill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionPrimitive {
    Cheers,
    Wave,
    ShakeHands,
    TakePhoto,
    ThumbUp,
    SpreadHands,
}

/// Side effects on the world applied when a manipulation skill succeeds, in
/// addition to its hand transition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum WorldEffect {
    ToggleLamp,
    StampMark,
    Move { object: ObjectId, to: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectKind {
    pub id: ObjectId,
    pub name: String,
    /// Named location the object starts at and returns to when released.
    pub home: String,
    pub position: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillDef {
    pub id: SkillId,
    pub name: String,
    pub kind: SkillKind,
    pub object: Option<ObjectId>,
    pub start: OccupancyPattern,
    pub end: TransitionPattern,
    pub reverse: Option<SkillId>,
    pub arm: Arm,
    pub timeout_ticks: u32,
    pub interruptible: bool,
    pub success_tail_ticks: u32,
    pub nominal_ticks: u32,
    pub periodic: bool,
    pub disturbance: DisturbancePolicy,
    pub motion: Option<MotionPrimitive>,
    pub release_to: Option<String>,
    pub effects: Vec<WorldEffect>,
}

impl SkillDef {
    pub fn is_manipulation(&self) -> bool {
        self.kind == SkillKind::Manipulation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentionRole {
    #[default]
    Skill,
    Idle,
    Cancel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentionDef {
    pub id: IntentionId,
    pub name: String,
    pub skill: Option<SkillId>,
    pub role: IntentionRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerParams {
    /// Consecutive ticks an intention must persist to start a skill.
    pub n_r: u32,
    /// Consecutive ticks a conflicting intention must persist to interrupt.
    pub k_2: u32,
    pub tick_rate: u32,
    pub safety_threshold: f64,
    pub safety_hysteresis: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            n_r: 15,
            k_2: 15,
            tick_rate: 30,
            safety_threshold: 0.1,
            safety_hysteresis: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmModel {
    pub side: Hand,
    pub chain: KinematicChain,
    pub default_pose: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotModel {
    /// Left arm first, then right.
    pub arms: Vec<ArmModel>,
}

impl RobotModel {
    /// Five-joint arms (shoulder pitch/roll/yaw, elbow, wrist) with an upper
    /// arm of 0.3 m and a forearm of 0.25 m, shoulders 0.25 m either side
    /// of the torso at 1.25 m height.
    pub fn humanoid_default() -> Self {
        let arm = |side: Hand| {
            let s = if side == Hand::Left { 1.0 } else { -1.0 };
            let j = |name: &str, parent: Option<usize>, offset: [f64; 3], axis: [f64; 3]| Joint {
                name: name.into(),
                parent,
                offset,
                axis,
            };
            ArmModel {
                side,
                chain: KinematicChain {
                    joints: vec![
                        j("shoulder_pitch", None, [0.0, s * 0.2, 1.25], [0.0, 1.0, 0.0]),
                        j("shoulder_roll", Some(0), [0.0, s * 0.05, 0.0], [1.0, 0.0, 0.0]),
                        j("shoulder_yaw", Some(1), [0.0, 0.0, -0.1], [0.0, 0.0, 1.0]),
                        j("elbow", Some(2), [0.0, 0.0, -0.2], [0.0, 1.0, 0.0]),
                        j("wrist", Some(3), [0.0, 0.0, -0.25], [0.0, 0.0, 1.0]),
                    ],
                    frames: NamedFrames {
                        shoulder_pitch: Some(0),
                        shoulder_yaw: Some(2),
                        elbow: Some(3),
                        wrist: Some(4),
                    },
                },
                default_pose: vec![0.0, 0.0, 0.0, -1.5, 0.0],
            }
        };
        Self {
            arms: vec![arm(Hand::Left), arm(Hand::Right)],
        }
    }

    pub fn arm(&self, hand: Hand) -> &ArmModel {
        &self.arms[hand.index()]
    }
}

impl Default for RobotModel {
    fn default() -> Self {
        Self::humanoid_default()
    }
}

/// A validated scenario. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub objects: Vec<ObjectKind>,
    pub skills: Vec<SkillDef>,
    pub intentions: Vec<IntentionDef>,
    pub params: PlannerParams,
    pub initial_occupancy: HandOccupancy,
    pub robot: RobotModel,
    skill_index: BTreeMap<SkillId, usize>,
    intention_index: BTreeMap<IntentionId, usize>,
}

impl Scenario {
    pub fn skill(&self, id: SkillId) -> &SkillDef {
        &self.skills[self.skill_index[&id]]
    }

    pub fn try_skill(&self, id: SkillId) -> Option<&SkillDef> {
        self.skill_index.get(&id).map(|&i| &self.skills[i])
    }

    pub fn intention(&self, id: IntentionId) -> Option<&IntentionDef> {
        self.intention_index.get(&id).map(|&i| &self.intentions[i])
    }

    pub fn skill_by_name(&self, name: &str) -> Option<&SkillDef> {
        self.skills.iter().find(|s| s.name == name)
    }

    pub fn intention_by_name(&self, name: &str) -> Option<&IntentionDef> {
        self.intentions.iter().find(|i| i.name == name)
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectKind> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_by_name(&self, name: &str) -> Option<&ObjectKind> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn object_ids(&self) -> Vec<ObjectId> {
        self.objects.iter().map(|o| o.id).collect()
    }

    pub fn idle_skill(&self) -> &SkillDef {
        self.skills
            .iter()
            .find(|s| s.kind == SkillKind::Idle)
            .expect("validated scenario has an idle skill")
    }

    pub fn idle_intention(&self) -> IntentionId {
        self.intentions
            .iter()
            .find(|i| i.role == IntentionRole::Idle)
            .expect("validated scenario has an idle intention")
            .id
    }

    pub fn manipulation_skills(&self) -> impl Iterator<Item = &SkillDef> {
        self.skills.iter().filter(|s| s.is_manipulation())
    }

    pub fn count_kind(&self, kind: SkillKind) -> usize {
        self.skills.iter().filter(|s| s.kind == kind).count()
    }

    fn slot_label(&self, held: Option<ObjectId>) -> String {
        match held {
            None => "none".into(),
            Some(k) => self
                .object(k)
                .map(|o| o.name.clone())
                .unwrap_or_else(|| format!("#{}", k.0)),
        }
    }

    /// `[left,right]` with object names, `none` for an empty hand.
    pub fn occupancy_label(&self, p: HandOccupancy) -> String {
        format!("[{},{}]", self.slot_label(p.left), self.slot_label(p.right))
    }

    pub fn occ_atom_label(&self, atom: OccAtom) -> String {
        match atom {
            OccAtom::Empty => "empty".into(),
            OccAtom::Any => "any".into(),
            OccAtom::Exactly(k) => self.slot_label(Some(k)),
        }
    }

    pub fn trans_atom_label(&self, atom: TransAtom) -> String {
        match atom {
            TransAtom::Unchanged => "-".into(),
            TransAtom::SetEmpty => "empty".into(),
            TransAtom::Set(k) => self.slot_label(Some(k)),
        }
    }

    /// Serializes back into the scenario document format.
    pub fn to_json(&self) -> String {
        let doc = ScenarioDoc::from(self);
        let mut out = serde_json::to_string_pretty(&doc).expect("scenario document serializes");
        out.push('\n');
        out
    }
}

/// One problem found while validating a scenario document.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationIssue {
    #[error("scenario requires an Idle skill")]
    MissingIdleSkill,
    #[error("scenario has {0} Idle skills, expected exactly one")]
    MultipleIdleSkills(usize),
    #[error("scenario requires an Idle intention")]
    MissingIdleIntention,
    #[error("scenario has {0} Idle intentions, expected exactly one")]
    MultipleIdleIntentions(usize),
    #[error("scenario has {0} Cancel intentions, expected at most one")]
    MultipleCancelIntentions(usize),
    #[error("unresolved skill reference {id} in {context}")]
    UnresolvedSkill { context: String, id: u16 },
    #[error("unknown object `{name}` in {context}")]
    UnknownObject { context: String, name: String },
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("scenario declares {0} objects, at most 5 are supported")]
    TooManyObjects(usize),
    #[error("object `{name}` has id {id}, ids must be below 5")]
    ObjectIdOutOfRange { name: String, id: u8 },
    #[error("{context}: {reason}")]
    Invalid { context: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{} validation error(s): {}", .0.len(), join_issues(.0))]
    Invalid(Vec<ValidationIssue>),
}

fn join_issues(issues: &[ValidationIssue]) -> String {
    issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ")
}

impl ScenarioError {
    pub fn issues(&self) -> &[ValidationIssue] {
        match self {
            ScenarioError::Invalid(v) => v,
            ScenarioError::Parse { .. } => &[],
        }
    }
}

// ---------------------------------------------------------------------------
// Document format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    name: String,
    objects: Vec<ObjectDoc>,
    skills: Vec<SkillDoc>,
    intentions: Vec<IntentionDoc>,
    params: PlannerParams,
    initial_occupancy: [String; 2],
    #[serde(default)]
    robot: Option<RobotModel>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    id: u8,
    name: String,
    home: String,
    position: [f64; 3],
    #[serde(default = "default_radius")]
    radius: f64,
}

fn default_radius() -> f64 {
    0.04
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SkillDoc {
    id: u16,
    name: String,
    kind: SkillKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    object: Option<String>,
    start: [String; 2],
    end: [String; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reverse: Option<u16>,
    arm: Arm,
    timeout_ticks: u32,
    #[serde(default)]
    interruptible: Option<bool>,
    #[serde(default)]
    success_tail_ticks: Option<u32>,
    #[serde(default)]
    nominal_ticks: Option<u32>,
    #[serde(default)]
    periodic: Option<bool>,
    #[serde(default)]
    disturbance: Option<DisturbancePolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    motion: Option<MotionPrimitive>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    release_to: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    effects: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntentionDoc {
    id: u16,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    skill: Option<u16>,
    #[serde(default, skip_serializing_if = "is_skill_role")]
    role: IntentionRole,
}

fn is_skill_role(role: &IntentionRole) -> bool {
    *role == IntentionRole::Skill
}

impl From<&Scenario> for ScenarioDoc {
    fn from(s: &Scenario) -> Self {
        let occ = |p: HandOccupancy| {
            [
                p.left.map_or("empty".into(), |k| s.slot_label(Some(k))),
                p.right.map_or("empty".into(), |k| s.slot_label(Some(k))),
            ]
        };
        ScenarioDoc {
            name: s.name.clone(),
            objects: s
                .objects
                .iter()
                .map(|o| ObjectDoc {
                    id: o.id.0,
                    name: o.name.clone(),
                    home: o.home.clone(),
                    position: o.position,
                    radius: o.radius,
                })
                .collect(),
            skills: s
                .skills
                .iter()
                .map(|k| SkillDoc {
                    id: k.id.0,
                    name: k.name.clone(),
                    kind: k.kind,
                    object: k.object.map(|o| s.slot_label(Some(o))),
                    start: [s.occ_atom_label(k.start.left), s.occ_atom_label(k.start.right)],
                    end: [s.trans_atom_label(k.end.left), s.trans_atom_label(k.end.right)],
                    reverse: k.reverse.map(|r| r.0),
                    arm: k.arm,
                    timeout_ticks: k.timeout_ticks,
                    interruptible: Some(k.interruptible),
                    success_tail_ticks: Some(k.success_tail_ticks),
                    nominal_ticks: Some(k.nominal_ticks),
                    periodic: Some(k.periodic),
                    disturbance: Some(k.disturbance),
                    motion: k.motion,
                    release_to: k.release_to.clone(),
                    effects: k
                        .effects
                        .iter()
                        .map(|e| match e {
                            WorldEffect::ToggleLamp => "toggle_lamp".to_string(),
                            WorldEffect::StampMark => "stamp_mark".to_string(),
                            WorldEffect::Move { object, to } => {
                                format!("move:{}:{}", s.slot_label(Some(*object)), to)
                            }
                        })
                        .collect(),
                })
                .collect(),
            intentions: s
                .intentions
                .iter()
                .map(|i| IntentionDoc {
                    id: i.id.0,
                    name: i.name.clone(),
                    skill: i.skill.map(|k| k.0),
                    role: i.role,
                })
                .collect(),
            params: s.params,
            initial_occupancy: occ(s.initial_occupancy),
            robot: Some(s.robot.clone()),
        }
    }
}

const RESERVED_NAMES: [&str; 4] = ["empty", "any", "-", "none"];

/// Parses and validates a scenario document. Semantic problems are collected
/// rather than reported one at a time.
pub fn load_scenario(document: &[u8]) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_slice(document).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate(doc).map_err(ScenarioError::Invalid)
}

pub fn load_scenario_str(document: &str) -> Result<Scenario, ScenarioError> {
    load_scenario(document.as_bytes())
}

fn validate(doc: ScenarioDoc) -> Result<Scenario, Vec<ValidationIssue>> {
    let mut issues = Vec::new();
    let invalid = |context: String, reason: &str| ValidationIssue::Invalid {
        context,
        reason: reason.to_string(),
    };

    // objects
    if doc.objects.len() > MAX_OBJECTS {
        issues.push(ValidationIssue::TooManyObjects(doc.objects.len()));
    }
    let mut object_names: BTreeMap<String, ObjectId> = BTreeMap::new();
    let mut object_ids = BTreeSet::new();
    let mut objects = Vec::new();
    for o in &doc.objects {
        if o.id as usize >= MAX_OBJECTS {
            issues.push(ValidationIssue::ObjectIdOutOfRange {
                name: o.name.clone(),
                id: o.id,
            });
        }
        if !object_ids.insert(o.id) {
            issues.push(ValidationIssue::Duplicate {
                what: "object id",
                name: o.id.to_string(),
            });
        }
        if object_names.insert(o.name.clone(), ObjectId(o.id)).is_some() {
            issues.push(ValidationIssue::Duplicate {
                what: "object",
                name: o.name.clone(),
            });
        }
        if RESERVED_NAMES.contains(&o.name.as_str()) || o.name.contains(':') || o.name.is_empty() {
            issues.push(invalid(format!("object `{}`", o.name), "reserved or malformed name"));
        }
        if o.radius.is_nan() || o.radius <= 0.0 || !o.position.iter().all(|v| v.is_finite()) {
            issues.push(invalid(format!("object `{}`", o.name), "bad geometry"));
        }
        objects.push(ObjectKind {
            id: ObjectId(o.id),
            name: o.name.clone(),
            home: o.home.clone(),
            position: o.position,
            radius: o.radius,
        });
    }

    let resolve_object = |name: &str, context: &str, issues: &mut Vec<ValidationIssue>| {
        object_names.get(name).copied().or_else(|| {
            issues.push(ValidationIssue::UnknownObject {
                context: context.to_string(),
                name: name.to_string(),
            });
            None
        })
    };

    let parse_start = |s: &str, context: &str, issues: &mut Vec<ValidationIssue>| match s {
        "empty" => OccAtom::Empty,
        "any" => OccAtom::Any,
        "-" => {
            issues.push(invalid(context.to_string(), "`-` is not a start-condition atom"));
            OccAtom::Any
        }
        name => resolve_object(name, context, issues)
            .map(OccAtom::Exactly)
            .unwrap_or(OccAtom::Any),
    };
    let parse_end = |s: &str, context: &str, issues: &mut Vec<ValidationIssue>| match s {
        "-" => TransAtom::Unchanged,
        "empty" => TransAtom::SetEmpty,
        "any" => {
            issues.push(invalid(context.to_string(), "`any` is not an end-transition atom"));
            TransAtom::Unchanged
        }
        name => resolve_object(name, context, issues)
            .map(TransAtom::Set)
            .unwrap_or(TransAtom::Unchanged),
    };

    // skills
    let skill_kinds: BTreeMap<u16, SkillKind> = doc.skills.iter().map(|s| (s.id, s.kind)).collect();
    let mut skill_names = BTreeSet::new();
    let mut skill_ids = BTreeSet::new();
    let mut skills = Vec::new();
    for s in &doc.skills {
        let ctx = format!("skill `{}`", s.name);
        if !skill_ids.insert(s.id) {
            issues.push(ValidationIssue::Duplicate {
                what: "skill id",
                name: s.id.to_string(),
            });
        }
        if !skill_names.insert(s.name.clone()) {
            issues.push(ValidationIssue::Duplicate {
                what: "skill",
                name: s.name.clone(),
            });
        }
        let start = OccupancyPattern::new(
            parse_start(&s.start[0], &ctx, &mut issues),
            parse_start(&s.start[1], &ctx, &mut issues),
        );
        let end = TransitionPattern::new(
            parse_end(&s.end[0], &ctx, &mut issues),
            parse_end(&s.end[1], &ctx, &mut issues),
        );
        let object = s
            .object
            .as_deref()
            .and_then(|name| resolve_object(name, &ctx, &mut issues));
        if let Some(r) = s.reverse {
            match skill_kinds.get(&r) {
                None => issues.push(ValidationIssue::UnresolvedSkill {
                    context: format!("{ctx} reverse"),
                    id: r,
                }),
                Some(SkillKind::Manipulation) => {}
                Some(_) => issues.push(invalid(ctx.clone(), "reverse skill must be a manipulation skill")),
            }
        }
        if s.timeout_ticks == 0 {
            issues.push(invalid(ctx.clone(), "timeout_ticks must be positive"));
        }
        let success_tail_ticks = s.success_tail_ticks.unwrap_or(DEFAULT_SUCCESS_TAIL);
        if success_tail_ticks == 0 {
            issues.push(invalid(ctx.clone(), "success_tail_ticks must be positive"));
        }
        let interruptible = s.interruptible.unwrap_or(match s.kind {
            SkillKind::Manipulation => s.reverse.is_some(),
            _ => true,
        });
        match s.kind {
            SkillKind::Motion | SkillKind::Idle => {
                if s.reverse.is_some() {
                    issues.push(invalid(ctx.clone(), "only manipulation skills have a reverse skill"));
                }
                if !end.is_identity() {
                    issues.push(invalid(ctx.clone(), "motion and idle skills cannot change occupancy"));
                }
                if s.kind == SkillKind::Motion && s.motion.is_none() {
                    issues.push(invalid(ctx.clone(), "motion skill requires a motion primitive"));
                }
            }
            SkillKind::Manipulation => {
                if interruptible && s.reverse.is_none() && !end.is_identity() {
                    issues.push(invalid(
                        ctx.clone(),
                        "interruptible manipulation skill needs a reverse skill",
                    ));
                }
                if s.motion.is_some() {
                    issues.push(invalid(
                        ctx.clone(),
                        "manipulation skill cannot name a motion primitive",
                    ));
                }
            }
        }
        let nominal_ticks = s.nominal_ticks.unwrap_or(match s.kind {
            SkillKind::Manipulation => DEFAULT_NOMINAL_TICKS,
            _ => 0,
        });
        let periodic = s.periodic.unwrap_or(false);
        if s.kind == SkillKind::Manipulation && !periodic && nominal_ticks < success_tail_ticks {
            issues.push(invalid(ctx.clone(), "nominal_ticks shorter than the success tail"));
        }
        let mut effects = Vec::new();
        for e in &s.effects {
            match e.as_str() {
                "toggle_lamp" => effects.push(WorldEffect::ToggleLamp),
                "stamp_mark" => effects.push(WorldEffect::StampMark),
                other => {
                    let parts: Vec<&str> = other.splitn(3, ':').collect();
                    match parts.as_slice() {
                        ["move", obj, to] if !to.is_empty() => {
                            if let Some(object) = resolve_object(obj, &ctx, &mut issues) {
                                effects.push(WorldEffect::Move {
                                    object,
                                    to: to.to_string(),
                                });
                            }
                        }
                        _ => issues.push(invalid(ctx.clone(), &format!("unknown effect `{other}`"))),
                    }
                }
            }
        }
        skills.push(SkillDef {
            id: SkillId(s.id),
            name: s.name.clone(),
            kind: s.kind,
            object,
            start,
            end,
            reverse: s.reverse.map(SkillId),
            arm: s.arm,
            timeout_ticks: s.timeout_ticks,
            interruptible,
            success_tail_ticks,
            nominal_ticks,
            periodic,
            disturbance: s.disturbance.unwrap_or(DisturbancePolicy::Withdraw),
            motion: s.motion,
            release_to: s.release_to.clone(),
            effects,
        });
    }
    match skills.iter().filter(|s| s.kind == SkillKind::Idle).count() {
        0 => issues.push(ValidationIssue::MissingIdleSkill),
        1 => {}
        n => issues.push(ValidationIssue::MultipleIdleSkills(n)),
    }

    // intentions
    let mut intention_names = BTreeSet::new();
    let mut intention_ids = BTreeSet::new();
    let mut intentions = Vec::new();
    for i in &doc.intentions {
        let ctx = format!("intention `{}`", i.name);
        if !intention_ids.insert(i.id) {
            issues.push(ValidationIssue::Duplicate {
                what: "intention id",
                name: i.id.to_string(),
            });
        }
        if !intention_names.insert(i.name.clone()) {
            issues.push(ValidationIssue::Duplicate {
                what: "intention",
                name: i.name.clone(),
            });
        }
        match (i.role, i.skill) {
            (IntentionRole::Skill, None) => issues.push(invalid(ctx.clone(), "intention maps to no skill")),
            (IntentionRole::Skill, Some(k)) => match skill_kinds.get(&k) {
                None => issues.push(ValidationIssue::UnresolvedSkill {
                    context: ctx.clone(),
                    id: k,
                }),
                Some(SkillKind::Idle) => {
                    issues.push(invalid(ctx.clone(), "only the Idle intention may stand for idling"))
                }
                Some(_) => {}
            },
            (_, Some(_)) => issues.push(invalid(ctx.clone(), "Idle and Cancel intentions map to no skill")),
            (_, None) => {}
        }
        intentions.push(IntentionDef {
            id: IntentionId(i.id),
            name: i.name.clone(),
            skill: i.skill.map(SkillId),
            role: i.role,
        });
    }
    match intentions.iter().filter(|i| i.role == IntentionRole::Idle).count() {
        0 => issues.push(ValidationIssue::MissingIdleIntention),
        1 => {}
        n => issues.push(ValidationIssue::MultipleIdleIntentions(n)),
    }
    let cancels = intentions.iter().filter(|i| i.role == IntentionRole::Cancel).count();
    if cancels > 1 {
        issues.push(ValidationIssue::MultipleCancelIntentions(cancels));
    }

    // params
    let p = doc.params;
    if p.n_r == 0 || p.k_2 == 0 || p.tick_rate == 0 {
        issues.push(invalid("params".into(), "n_r, k_2 and tick_rate must be positive"));
    }
    if p.safety_threshold.is_nan()
        || p.safety_threshold <= 0.0
        || !(p.safety_hysteresis.is_finite() && p.safety_hysteresis >= 0.0)
    {
        issues.push(invalid(
            "params".into(),
            "safety threshold must be positive and hysteresis non-negative",
        ));
    }

    // initial occupancy
    let mut initial = [None, None];
    for (slot, name) in doc.initial_occupancy.iter().enumerate() {
        initial[slot] = match name.as_str() {
            "empty" | "none" => None,
            other => resolve_object(other, "initial_occupancy", &mut issues),
        };
    }
    if initial[0].is_some() && initial[0] == initial[1] {
        issues.push(invalid(
            "initial_occupancy".into(),
            "one object cannot be in both hands",
        ));
    }

    // robot
    let robot = doc.robot.unwrap_or_default();
    let sides: Vec<Hand> = robot.arms.iter().map(|a| a.side).collect();
    if sides != [Hand::Left, Hand::Right] {
        issues.push(invalid(
            "robot.arms".into(),
            "expected a left arm followed by a right arm",
        ));
    }
    for arm in &robot.arms {
        let ctx = format!("robot.arms[{:?}]", arm.side);
        for e in arm.chain.validate() {
            issues.push(invalid(ctx.clone(), &e.to_string()));
        }
        if arm.default_pose.len() != arm.chain.len() {
            issues.push(invalid(ctx.clone(), "default_pose length differs from joint count"));
        }
    }

    if !issues.is_empty() {
        return Err(issues);
    }
    let skill_index = skills.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
    let intention_index = intentions.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
    Ok(Scenario {
        name: doc.name,
        objects,
        skills,
        intentions,
        params: p,
        initial_occupancy: HandOccupancy::new(initial[0], initial[1]),
        robot,
        skill_index,
        intention_index,
    })
}

pub const DINING_SCENARIO: &str = include_str!("../scenarios/dining.scenario.json");
pub const OFFICE_SCENARIO: &str = include_str!("../scenarios/office.scenario.json");

/// The two scenarios shipped with the crate, keyed by name.
pub fn builtin_scenarios() -> Vec<Scenario> {
    [DINING_SCENARIO, OFFICE_SCENARIO]
        .iter()
        .map(|doc| load_scenario_str(doc).expect("shipped scenario is valid"))
        .collect()
}

pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}
