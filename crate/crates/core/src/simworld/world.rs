//! The simulated interaction world: object placements, robot joints, the
//! leader, and whichever skill executor is running.

use nalgebra::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

use crate::intention::{ObjectObservation, ObservationBundle};
use crate::planner::{PlannerCommand, SkillFeedback};
use crate::safety::{arm_keypoints, ArmKeypoints, HumanHandPoints};
use crate::skillspec::{
    Arm, Hand, HandOccupancy, IntentionId, ObjectId, Scenario, SkillDef, SkillKind, TransAtom, WorldEffect,
};

use super::executor::{ManipExecutor, ManipStatus, PERIODIC_LEAD_IN};
use super::leader::{gesture, observe, REST_HANDS};
use super::motion::{solve_wrist_ik, wrist_position, Frame, History, LeaderFrame, MotionExecutor};
use super::script::LeaderInput;

/// Where an object is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Slot(String),
    RobotHand(Hand),
    Leader,
    Away,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectState {
    pub id: ObjectId,
    pub location: Location,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub enum Executor {
    None,
    Manipulation(ManipExecutor),
    Motion(MotionExecutor),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderState {
    pub intention: IntentionId,
    pub hands: [[f64; 3]; 2],
    pub contact: bool,
}

/// Result of one world step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub feedback: SkillFeedback,
    pub notes: Vec<String>,
}

/// Clearance kept above an object when approaching it (m).
const APPROACH_HEIGHT: f64 = 0.12;
/// Lateral offset of each hand in two-handed skills (m).
const DUAL_SPREAD: f64 = 0.12;
/// Offset of named slots other than an object's home (m).
const AWAY_SLOT_OFFSET: [f64; 3] = [0.0, 0.25, 0.0];
const SCRUB_AMPLITUDE: f64 = 0.05;
const SCRUB_PERIOD: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub tick: u64,
    rng: ChaCha8Rng,
    pub objects: Vec<ObjectState>,
    pub lamp_on: bool,
    pub stamp_marks: u32,
    pub joints: Frame,
    pub leader: LeaderState,
    pub executor: Executor,
    pub held: bool,
    leader_history: History<LeaderFrame>,
    robot_history: History<Frame>,
}

impl WorldState {
    pub fn new(scenario: &Scenario, seed: u64) -> Self {
        let joints = Frame::default_pose(&scenario.robot);
        let mut robot_history = History::filled(Frame::zeros(&scenario.robot));
        robot_history.push(joints.clone());
        let mut world = Self {
            tick: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            objects: Vec::new(),
            lamp_on: true,
            stamp_marks: 0,
            joints,
            leader: LeaderState {
                intention: scenario.idle_intention(),
                hands: REST_HANDS,
                contact: false,
            },
            executor: Executor::None,
            held: false,
            leader_history: History::filled([[0.0; 3]; 2]),
            robot_history,
        };
        world.objects = scenario
            .objects
            .iter()
            .map(|o| {
                let location = if scenario.initial_occupancy.left == Some(o.id) {
                    Location::RobotHand(Hand::Left)
                } else if scenario.initial_occupancy.right == Some(o.id) {
                    Location::RobotHand(Hand::Right)
                } else if o.home == "leader" {
                    Location::Leader
                } else {
                    Location::Slot(o.home.clone())
                };
                ObjectState {
                    id: o.id,
                    location,
                    position: o.position,
                }
            })
            .collect();
        world.refresh_positions(scenario);
        world
    }

    /// Objects currently in the robot's hands.
    pub fn hand_contents(&self) -> HandOccupancy {
        let mut p = HandOccupancy::EMPTY;
        for o in &self.objects {
            match o.location {
                Location::RobotHand(Hand::Left) => p.left = Some(o.id),
                Location::RobotHand(Hand::Right) => p.right = Some(o.id),
                _ => {}
            }
        }
        p
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectState> {
        self.objects.iter().find(|o| o.id == id)
    }

    fn object_mut(&mut self, id: ObjectId) -> Option<&mut ObjectState> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn robot_keypoints(&self, scenario: &Scenario) -> [ArmKeypoints; 2] {
        Hand::BOTH.map(|h| {
            arm_keypoints(&scenario.robot.arm(h).chain, &self.joints.arms[h.index()])
                .expect("validated chain with matching pose length")
        })
    }

    pub fn hand_points(&self) -> [HumanHandPoints; 2] {
        self.leader.hands.map(|c| HumanHandPoints::around(Point3::from(c)))
    }

    fn wrist(&self, scenario: &Scenario, hand: Hand) -> [f64; 3] {
        wrist_position(&scenario.robot.arm(hand).chain, &self.joints.arms[hand.index()])
            .map_or([0.0; 3], |v| [v.x, v.y, v.z])
    }

    fn slot_position(scenario: &Scenario, id: ObjectId, slot: &str) -> [f64; 3] {
        let kind = scenario.object(id).expect("world objects come from the scenario");
        if slot == kind.home {
            kind.position
        } else {
            std::array::from_fn(|i| kind.position[i] + AWAY_SLOT_OFFSET[i])
        }
    }

    fn refresh_positions(&mut self, scenario: &Scenario) {
        let wrists = Hand::BOTH.map(|h| self.wrist(scenario, h));
        let leader = self.leader.hands[Hand::Right.index()];
        for o in &mut self.objects {
            o.position = match &o.location {
                Location::Slot(s) => Self::slot_position(scenario, o.id, s),
                Location::RobotHand(h) => wrists[h.index()],
                Location::Leader => leader,
                Location::Away => o.position,
            };
        }
    }

    pub fn observation(&mut self, scenario: &Scenario, noisy: bool) -> ObservationBundle {
        let objects = self
            .objects
            .iter()
            .filter(|o| o.location != Location::Away)
            .map(|o| ObjectObservation {
                id: o.id,
                center: o.position,
                radius: scenario.object(o.id).map_or(0.05, |k| k.radius),
            })
            .collect();
        let pose = gesture(scenario, self.leader.intention);
        let occupancy = self.hand_contents();
        let hands = self.leader.hands;
        observe(&pose, hands, occupancy, objects, noisy.then_some(&mut self.rng))
    }

    pub fn leader_history(&self) -> &History<LeaderFrame> {
        &self.leader_history
    }

    pub fn robot_history(&self) -> &History<Frame> {
        &self.robot_history
    }

    fn apply_leader(&mut self, scenario: &Scenario, input: &LeaderInput, notes: &mut Vec<String>) {
        self.leader.intention = input.intention;
        self.leader.hands = [REST_HANDS[0], input.hand.unwrap_or(REST_HANDS[1])];
        self.leader.contact = input.contact;
        if let Some(k) = input.take {
            let name = scenario.object(k).map_or_else(|| k.0.to_string(), |o| o.name.clone());
            match self.object_mut(k) {
                Some(o) if !matches!(o.location, Location::RobotHand(_)) => o.location = Location::Away,
                Some(_) => notes.push(format!("leader cannot take `{name}` from the robot's hand")),
                None => notes.push(format!("no object `{name}` to take")),
            }
        }
    }

    /// Checks that the objects a skill needs are where it expects them.
    fn precondition(&self, scenario: &Scenario, skill: &SkillDef) -> Result<(), String> {
        let available = |k: ObjectId| {
            let name = scenario.object(k).map_or_else(|| k.0.to_string(), |o| o.name.clone());
            match self.object(k).map(|o| &o.location) {
                Some(Location::RobotHand(_)) => Err(format!("`{name}` is already in a robot hand")),
                Some(Location::Away) | None => Err(format!("`{name}` is not in the scene")),
                _ => Ok(()),
            }
        };
        for hand in Hand::BOTH {
            if let TransAtom::Set(k) = skill.end.atom(hand) {
                available(k)?;
            }
        }
        for e in &skill.effects {
            if let WorldEffect::Move { object, .. } = e {
                available(*object)?;
            }
        }
        Ok(())
    }

    fn target_of(&self, scenario: &Scenario, skill: &SkillDef) -> [f64; 3] {
        let releasing = Hand::BOTH
            .iter()
            .find(|h| skill.end.atom(**h) == TransAtom::SetEmpty)
            .copied();
        match (skill.object, releasing) {
            (Some(k), Some(_)) => match skill.release_to.as_deref() {
                Some("leader") => self.leader.hands[Hand::Right.index()],
                Some(slot) => Self::slot_position(scenario, k, slot),
                None => Self::slot_position(scenario, k, &scenario.object(k).expect("object").home),
            },
            (Some(k), None) => self.object(k).map_or([0.4, 0.0, 0.9], |o| o.position),
            (None, _) => [0.4, 0.0, 0.9],
        }
    }

    /// Joint-space trajectory for a manipulation skill: approach above the
    /// target, reach it, lift, and return home.
    fn trajectory(&self, scenario: &Scenario, skill: &SkillDef) -> Vec<Frame> {
        let robot = &scenario.robot;
        let n = skill.nominal_ticks.max(2) as usize;
        let target = self.target_of(scenario, skill);
        let hands: Vec<Hand> = match skill.arm {
            Arm::Left => vec![Hand::Left],
            Arm::Right => vec![Hand::Right],
            Arm::Dual => vec![Hand::Left, Hand::Right],
        };
        let home = Frame::default_pose(robot);
        let reach = |offset: [f64; 3]| {
            let mut f = self.joints.clone();
            for &h in &hands {
                let spread = match (skill.arm, h) {
                    (Arm::Dual, Hand::Left) => DUAL_SPREAD,
                    (Arm::Dual, Hand::Right) => -DUAL_SPREAD,
                    _ => 0.0,
                };
                let p = [
                    target[0] + offset[0],
                    target[1] + offset[1] + spread,
                    target[2] + offset[2],
                ];
                let arm = robot.arm(h);
                f.arms[h.index()] = solve_wrist_ik(&arm.chain, &arm.default_pose, p);
            }
            f
        };
        let start = self.joints.clone();
        let above = reach([0.0, 0.0, APPROACH_HEIGHT]);
        let at = reach([0.0, 0.0, 0.0]);

        if skill.periodic {
            let lead = PERIODIC_LEAD_IN.min(n - 1);
            let side = reach([0.0, SCRUB_AMPLITUDE, 0.0]);
            return (0..=n)
                .map(|k| {
                    if k <= lead {
                        start.lerp(&at, k as f64 / lead as f64)
                    } else {
                        let phase = 2.0 * PI * (k - lead - 1) as f64 / SCRUB_PERIOD as f64;
                        at.lerp(&side, 0.5 - 0.5 * phase.cos())
                    }
                })
                .collect();
        }

        let keys = [(0.0, &start), (0.35, &above), (0.55, &at), (0.75, &above), (1.0, &home)];
        (0..=n)
            .map(|k| {
                let s = k as f64 / n as f64;
                let i = keys.windows(2).position(|w| s <= w[1].0).unwrap_or(keys.len() - 2);
                let (s0, a) = keys[i];
                let (s1, b) = keys[i + 1];
                a.lerp(b, ((s - s0) / (s1 - s0)).clamp(0.0, 1.0))
            })
            .collect()
    }

    fn apply_success(&mut self, scenario: &Scenario, skill: &SkillDef) {
        for hand in Hand::BOTH {
            match skill.end.atom(hand) {
                TransAtom::Unchanged => {}
                TransAtom::Set(k) => {
                    if let Some(o) = self.object_mut(k) {
                        o.location = Location::RobotHand(hand);
                    }
                }
                TransAtom::SetEmpty => {
                    let held = self
                        .objects
                        .iter()
                        .position(|o| o.location == Location::RobotHand(hand));
                    if let Some(i) = held {
                        let kind = scenario.object(self.objects[i].id).expect("object");
                        let to = skill.release_to.clone().unwrap_or_else(|| kind.home.clone());
                        self.objects[i].location = if to == "leader" {
                            Location::Leader
                        } else {
                            Location::Slot(to)
                        };
                    }
                }
            }
        }
        for e in &skill.effects {
            match e {
                WorldEffect::ToggleLamp => self.lamp_on = !self.lamp_on,
                WorldEffect::StampMark => self.stamp_marks += 1,
                WorldEffect::Move { object, to } => {
                    let to = to.clone();
                    if let Some(o) = self.object_mut(*object) {
                        o.location = if to == "leader" {
                            Location::Leader
                        } else {
                            Location::Slot(to)
                        };
                    }
                }
            }
        }
    }

    fn start(&mut self, scenario: &Scenario, skill: &SkillDef, notes: &mut Vec<String>) -> SkillFeedback {
        match skill.kind {
            SkillKind::Manipulation => {
                if let Err(why) = self.precondition(scenario, skill) {
                    notes.push(format!("cannot start `{}`: {why}", skill.name));
                    self.executor = Executor::None;
                    return SkillFeedback::Failed;
                }
                let frames = self.trajectory(scenario, skill);
                self.executor = Executor::Manipulation(ManipExecutor::new(skill, frames));
                self.advance(scenario)
            }
            SkillKind::Motion => {
                self.executor = Executor::Motion(MotionExecutor::new(Some(skill.id), skill.motion));
                self.advance(scenario)
            }
            SkillKind::Idle => {
                self.executor = Executor::None;
                SkillFeedback::NotRunning
            }
        }
    }

    fn advance(&mut self, scenario: &Scenario) -> SkillFeedback {
        let contact = self.leader.contact;
        match &mut self.executor {
            Executor::Manipulation(m) => {
                let status = m.advance(contact);
                self.joints = m.frame().clone();
                match status {
                    ManipStatus::Running(s) => SkillFeedback::Running(s),
                    ManipStatus::Succeeded => {
                        let skill = scenario.skill(m.skill).clone();
                        let rollback = m.is_rollback();
                        self.executor = Executor::None;
                        if !rollback {
                            self.apply_success(scenario, &skill);
                        }
                        SkillFeedback::Succeeded
                    }
                }
            }
            Executor::Motion(m) => {
                self.joints = m.next_frame(&scenario.robot, &self.leader_history, &self.robot_history);
                SkillFeedback::Running(0.0)
            }
            Executor::None => {
                let mut idle = MotionExecutor::idle();
                self.joints = idle.next_frame(&scenario.robot, &self.leader_history, &self.robot_history);
                SkillFeedback::NotRunning
            }
        }
    }

    /// Advances the world by one tick under the planner's previous command.
    pub fn step(&mut self, scenario: &Scenario, input: &LeaderInput, command: PlannerCommand) -> StepOutcome {
        let mut notes = Vec::new();
        self.apply_leader(scenario, input, &mut notes);
        self.leader_history.push(self.leader.hands);

        let feedback = match command {
            PlannerCommand::Hold => {
                self.held = true;
                self.idle_feedback()
            }
            PlannerCommand::Resume => {
                self.held = false;
                self.idle_feedback()
            }
            _ if self.held => self.idle_feedback(),
            PlannerCommand::StartSkill(id) => self.start(scenario, scenario.skill(id), &mut notes),
            PlannerCommand::AbortToReverse { reverse, .. } => {
                let rev = scenario.skill(reverse);
                let rollback = match &self.executor {
                    Executor::Manipulation(m) => ManipExecutor::rollback_of(m, rev),
                    _ => {
                        let frames = vec![self.joints.clone(), self.joints.clone()];
                        ManipExecutor::rollback_of(&ManipExecutor::new(rev, frames), rev)
                    }
                };
                self.executor = Executor::Manipulation(rollback);
                self.advance(scenario)
            }
            PlannerCommand::FinishToIdle(_) => {
                self.executor = Executor::None;
                self.advance(scenario)
            }
            PlannerCommand::ContinueSkill(_) | PlannerCommand::NoOp => self.advance(scenario),
        };

        self.robot_history.push(self.joints.clone());
        self.refresh_positions(scenario);
        self.tick += 1;
        StepOutcome { feedback, notes }
    }

    fn idle_feedback(&self) -> SkillFeedback {
        match &self.executor {
            Executor::Manipulation(m) => SkillFeedback::Running(m.signal()),
            Executor::Motion(_) => SkillFeedback::Running(0.0),
            Executor::None => SkillFeedback::NotRunning,
        }
    }
}
