//! Procedural motion generators streamed in chunks of five frames, and a
//! small wrist inverse-kinematics solver shared with the manipulation
//! trajectories.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Serialize;

use crate::safety::{forward_kinematics, KinematicChain};
use crate::skillspec::{ArmModel, Hand, MotionPrimitive, RobotModel, SkillId};

pub const CHUNK_FRAMES: usize = 5;
pub const HISTORY_TICKS: usize = 30;
/// Largest per-tick change of any joint in streamed motion (rad).
pub const MAX_JOINT_DELTA: f64 = 0.1;
pub const DEFAULT_WAVE_PERIOD: u32 = 30;

/// Joint targets for both arms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frame {
    pub arms: [Vec<f64>; 2],
}

impl Frame {
    pub fn default_pose(robot: &RobotModel) -> Self {
        Self {
            arms: [
                robot.arm(Hand::Left).default_pose.clone(),
                robot.arm(Hand::Right).default_pose.clone(),
            ],
        }
    }

    pub fn zeros(robot: &RobotModel) -> Self {
        Self {
            arms: [
                vec![0.0; robot.arm(Hand::Left).chain.len()],
                vec![0.0; robot.arm(Hand::Right).chain.len()],
            ],
        }
    }

    /// Largest absolute joint difference to `other`.
    pub fn max_delta(&self, other: &Frame) -> f64 {
        self.arms
            .iter()
            .zip(&other.arms)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Moves from `self` toward `target` by at most `step` per joint.
    pub fn step_toward(&self, target: &Frame, step: f64) -> Frame {
        let mv = |a: &Vec<f64>, b: &Vec<f64>| a.iter().zip(b).map(|(x, y)| x + (y - x).clamp(-step, step)).collect();
        Frame {
            arms: [mv(&self.arms[0], &target.arms[0]), mv(&self.arms[1], &target.arms[1])],
        }
    }

    pub fn lerp(&self, other: &Frame, s: f64) -> Frame {
        let mix = |a: &Vec<f64>, b: &Vec<f64>| a.iter().zip(b).map(|(x, y)| x + (y - x) * s).collect();
        Frame {
            arms: [mix(&self.arms[0], &other.arms[0]), mix(&self.arms[1], &other.arms[1])],
        }
    }
}

/// Leader hand positions (left, right); zeros when unknown.
pub type LeaderFrame = [[f64; 3]; 2];

/// Fixed-length history, oldest first, zero-padded until filled.
#[derive(Debug, Clone, PartialEq)]
pub struct History<T> {
    items: VecDeque<T>,
}

impl<T: Clone> History<T> {
    pub fn filled(pad: T) -> Self {
        Self {
            items: std::iter::repeat_n(pad, HISTORY_TICKS).collect(),
        }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == HISTORY_TICKS {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn latest(&self) -> &T {
        self.items.back().expect("history is never empty")
    }

    pub fn as_vec(&self) -> Vec<T> {
        self.items.iter().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }
}

/// Streams a motion skill, or drifts to the default pose when `primitive`
/// is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionExecutor {
    pub skill: Option<SkillId>,
    pub primitive: Option<MotionPrimitive>,
    pub period_ticks: u32,
    /// Frames emitted so far.
    pub t: u64,
    pub chunks: u64,
    buffer: VecDeque<Frame>,
    ik_seed: Option<Vec<f64>>,
}

impl MotionExecutor {
    pub fn new(skill: Option<SkillId>, primitive: Option<MotionPrimitive>) -> Self {
        Self {
            skill,
            primitive,
            period_ticks: DEFAULT_WAVE_PERIOD,
            t: 0,
            chunks: 0,
            buffer: VecDeque::new(),
            ik_seed: None,
        }
    }

    pub fn idle() -> Self {
        Self::new(None, None)
    }

    pub fn with_period(mut self, ticks: u32) -> Self {
        self.period_ticks = ticks.max(2);
        self
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Next frame, generating a new chunk only once the previous one is
    /// used up.
    pub fn next_frame(
        &mut self,
        robot: &RobotModel,
        leader: &History<LeaderFrame>,
        robot_history: &History<Frame>,
    ) -> Frame {
        if self.buffer.is_empty() {
            let chunk = motion_chunk(self, robot, &leader.as_vec(), &robot_history.as_vec());
            self.buffer.extend(chunk);
        }
        self.t += 1;
        self.buffer.pop_front().expect("chunk has frames")
    }
}

fn set_joint(pose: &mut [f64], frame: Option<usize>, value: f64) {
    if let Some(i) = frame {
        if i < pose.len() {
            pose[i] = value;
        }
    }
}

fn roll_index(arm: &ArmModel) -> Option<usize> {
    arm.chain.joints.iter().position(|j| j.name == "shoulder_roll")
}

/// Pose of one arm from named joint values; unnamed joints keep their
/// default value.
fn posed(arm: &ArmModel, pitch: f64, roll: f64, yaw: f64, elbow: f64, wrist: f64) -> Vec<f64> {
    let mut q = arm.default_pose.clone();
    let f = &arm.chain.frames;
    set_joint(&mut q, f.shoulder_pitch, pitch);
    set_joint(&mut q, roll_index(arm), roll);
    set_joint(&mut q, f.shoulder_yaw, yaw);
    set_joint(&mut q, f.elbow, elbow);
    set_joint(&mut q, f.wrist, wrist);
    q
}

fn primitive_target(exec: &mut MotionExecutor, robot: &RobotModel, t: u64, leader: Option<[f64; 3]>) -> Frame {
    let left = robot.arm(Hand::Left);
    let right = robot.arm(Hand::Right);
    let phase = 2.0 * PI * t as f64 / exec.period_ticks as f64;
    let rest = Frame::default_pose(robot);
    match exec.primitive {
        None => rest,
        Some(MotionPrimitive::Wave) => Frame {
            arms: [
                rest.arms[0].clone(),
                posed(right, -2.6, -0.2, 0.0, -0.6 + 0.35 * phase.sin(), 0.0),
            ],
        },
        Some(MotionPrimitive::Cheers) => Frame {
            arms: [
                rest.arms[0].clone(),
                posed(right, -1.2, 0.1, 0.0, -1.2 + 0.1 * phase.sin(), 0.0),
            ],
        },
        Some(MotionPrimitive::ThumbUp) => Frame {
            arms: [rest.arms[0].clone(), posed(right, -0.8, 0.0, 0.3, -1.2, 1.0)],
        },
        Some(MotionPrimitive::TakePhoto) => Frame {
            arms: [
                posed(left, -1.4, 0.3, 0.0, -1.6, 0.0),
                posed(right, -1.4, -0.3, 0.0, -1.6, 0.0),
            ],
        },
        Some(MotionPrimitive::SpreadHands) => Frame {
            arms: [
                posed(left, -0.3, 0.9, 0.0, -0.4, 0.0),
                posed(right, -0.3, -0.9, 0.0, -0.4, 0.0),
            ],
        },
        Some(MotionPrimitive::ShakeHands) => {
            let q = match leader {
                Some(target) => {
                    let seed = exec.ik_seed.clone().unwrap_or_else(|| right.default_pose.clone());
                    let q = solve_wrist_ik(&right.chain, &seed, target);
                    exec.ik_seed = Some(q.clone());
                    q
                }
                None => right.default_pose.clone(),
            };
            Frame {
                arms: [rest.arms[0].clone(), q],
            }
        }
    }
}

/// The next five target frames. Each frame moves every joint by at most
/// [`MAX_JOINT_DELTA`] from the one before, starting at the latest robot
/// frame, so consecutive chunks join smoothly.
pub fn motion_chunk(
    exec: &mut MotionExecutor,
    robot: &RobotModel,
    leader_history: &[LeaderFrame],
    robot_history: &[Frame],
) -> [Frame; CHUNK_FRAMES] {
    let current = robot_history
        .last()
        .cloned()
        .unwrap_or_else(|| Frame::default_pose(robot));
    let leader = leader_history
        .last()
        .map(|f| f[Hand::Right.index()])
        .filter(|p| p.iter().any(|v| *v != 0.0));
    let start = exec.t;
    exec.chunks += 1;
    let mut prev = current;
    std::array::from_fn(|i| {
        let target = primitive_target(exec, robot, start + i as u64 + 1, leader);
        prev = prev.step_toward(&target, MAX_JOINT_DELTA);
        prev.clone()
    })
}

pub fn wrist_position(chain: &KinematicChain, q: &[f64]) -> Option<Vector3<f64>> {
    let wrist = chain.frames.wrist?;
    let origins = forward_kinematics(chain, q).ok()?;
    origins.get(wrist).map(|p| p.coords)
}

/// Damped least-squares IK on the wrist origin, from `seed`. Unreachable
/// targets converge to the closest reachable point.
pub fn solve_wrist_ik(chain: &KinematicChain, seed: &[f64], target: [f64; 3]) -> Vec<f64> {
    const ITERATIONS: usize = 60;
    const DAMPING: f64 = 0.05;
    const STEP: f64 = 1e-6;
    const MAX_STEP: f64 = 0.3;
    let target = Vector3::from(target);
    let n = seed.len();
    let mut q = seed.to_vec();
    for _ in 0..ITERATIONS {
        let Some(p) = wrist_position(chain, &q) else { return q };
        let err = target - p;
        if err.norm() < 1e-5 {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(3, n);
        for j in 0..n {
            let mut dq = q.clone();
            dq[j] += STEP;
            let pj = wrist_position(chain, &dq).unwrap_or(p);
            jac.set_column(j, &((pj - p) / STEP));
        }
        let jjt = &jac * jac.transpose() + DMatrix::<f64>::identity(3, 3) * (DAMPING * DAMPING);
        let Some(inv) = jjt.try_inverse() else { break };
        let e = DVector::from_column_slice(err.as_slice());
        let delta = jac.transpose() * inv * e;
        for j in 0..n {
            q[j] += delta[j].clamp(-MAX_STEP, MAX_STEP);
        }
    }
    q
}
