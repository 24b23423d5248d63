//! Forward kinematics for serial arm chains, the per-arm key-point set and
//! the minimum-distance safety supervisor.
//!
//! All positions are in metres in the world frame: X forward from the robot
//! torso, Y to the robot's left, Z up against gravity.

use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the norm of a joint rotation axis.
pub const AXIS_NORM_TOLERANCE: f64 = 1e-9;
/// Number of key points generated per arm.
pub const KEYPOINTS_PER_ARM: usize = 7;
/// Number of points a detected human hand is reduced to.
pub const POINTS_PER_HAND: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SafetyError {
    #[error("expected {expected} joint angles, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("chain does not declare the `{0}` frame")]
    MissingFrame(&'static str),
    #[error("joint {index} ({name}): {reason}")]
    InvalidJoint { index: usize, name: String, reason: String },
}

/// One revolute joint. The joint origin sits at `offset` in the parent's
/// frame; the joint then rotates its children about `axis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    #[serde(default)]
    pub parent: Option<usize>,
    pub offset: [f64; 3],
    pub axis: [f64; 3],
}

/// Indices of the joints whose origins become key points.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedFrames {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shoulder_pitch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shoulder_yaw: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elbow: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrist: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicChain {
    pub joints: Vec<Joint>,
    pub frames: NamedFrames,
}

impl KinematicChain {
    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    /// Checks the tree ordering, axis norms and named frame indices.
    pub fn validate(&self) -> Vec<SafetyError> {
        let mut issues = Vec::new();
        for (index, joint) in self.joints.iter().enumerate() {
            if let Some(parent) = joint.parent {
                if parent >= index {
                    issues.push(SafetyError::InvalidJoint {
                        index,
                        name: joint.name.clone(),
                        reason: format!("parent {parent} does not precede the joint"),
                    });
                }
            }
            let norm = Vector3::from(joint.axis).norm();
            if (norm - 1.0).abs() > AXIS_NORM_TOLERANCE {
                issues.push(SafetyError::InvalidJoint {
                    index,
                    name: joint.name.clone(),
                    reason: format!("axis norm {norm} is not unit"),
                });
            }
            if !joint.offset.iter().chain(joint.axis.iter()).all(|v| v.is_finite()) {
                issues.push(SafetyError::InvalidJoint {
                    index,
                    name: joint.name.clone(),
                    reason: "non-finite geometry".into(),
                });
            }
        }
        let frames = [
            ("shoulder_pitch", self.frames.shoulder_pitch),
            ("shoulder_yaw", self.frames.shoulder_yaw),
            ("elbow", self.frames.elbow),
            ("wrist", self.frames.wrist),
        ];
        for (name, frame) in frames {
            match frame {
                None => issues.push(SafetyError::MissingFrame(name)),
                Some(i) if i >= self.joints.len() => issues.push(SafetyError::InvalidJoint {
                    index: i,
                    name: name.into(),
                    reason: "named frame index out of range".into(),
                }),
                Some(_) => {}
            }
        }
        issues
    }
}

/// World-frame origin of every joint for the joint angles `q` (radians).
pub fn forward_kinematics(chain: &KinematicChain, q: &[f64]) -> Result<Vec<Point3<f64>>, SafetyError> {
    if q.len() != chain.joints.len() {
        return Err(SafetyError::DimensionMismatch {
            expected: chain.joints.len(),
            got: q.len(),
        });
    }
    let mut frames: Vec<Isometry3<f64>> = Vec::with_capacity(q.len());
    let mut origins = Vec::with_capacity(q.len());
    for (joint, &angle) in chain.joints.iter().zip(q) {
        let parent = joint.parent.map(|p| frames[p]).unwrap_or_else(Isometry3::identity);
        let origin = parent * Translation3::from(Vector3::from(joint.offset));
        let axis = Unit::new_unchecked(Vector3::from(joint.axis));
        frames.push(origin * UnitQuaternion::from_axis_angle(&axis, angle));
        origins.push(Point3::from(origin.translation.vector));
    }
    Ok(origins)
}

/// The seven collision markers of one arm.
///
/// Order: shoulder pitch, shoulder yaw, elbow and wrist origins, the
/// yaw-elbow midpoint, the elbow-wrist midpoint, and the point one third of
/// the way from the elbow to the wrist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmKeypoints {
    pub points: [Point3<f64>; KEYPOINTS_PER_ARM],
}

impl ArmKeypoints {
    pub fn from_joint_origins(
        shoulder_pitch: Point3<f64>,
        shoulder_yaw: Point3<f64>,
        elbow: Point3<f64>,
        wrist: Point3<f64>,
    ) -> Self {
        let mid = |a: Point3<f64>, b: Point3<f64>| Point3::from((a.coords + b.coords) / 2.0);
        Self {
            points: [
                shoulder_pitch,
                shoulder_yaw,
                elbow,
                wrist,
                mid(shoulder_yaw, elbow),
                mid(elbow, wrist),
                elbow + (wrist - elbow) / 3.0,
            ],
        }
    }

    pub fn wrist(&self) -> Point3<f64> {
        self.points[3]
    }
}

pub fn arm_keypoints(chain: &KinematicChain, q: &[f64]) -> Result<ArmKeypoints, SafetyError> {
    let frame = |f: Option<usize>, name: &'static str| {
        f.filter(|&i| i < chain.joints.len())
            .ok_or(SafetyError::MissingFrame(name))
    };
    let pitch = frame(chain.frames.shoulder_pitch, "shoulder_pitch")?;
    let yaw = frame(chain.frames.shoulder_yaw, "shoulder_yaw")?;
    let elbow = frame(chain.frames.elbow, "elbow")?;
    let wrist = frame(chain.frames.wrist, "wrist")?;
    let origins = forward_kinematics(chain, q)?;
    Ok(ArmKeypoints::from_joint_origins(
        origins[pitch],
        origins[yaw],
        origins[elbow],
        origins[wrist],
    ))
}

/// Points reconstructed for one human hand. Empty when the hand is not
/// detected, which never produces an unsafe verdict.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HumanHandPoints {
    pub points: Vec<Point3<f64>>,
}

impl HumanHandPoints {
    pub fn absent() -> Self {
        Self::default()
    }

    /// Palm centre plus four finger markers 3 cm around it.
    pub fn around(center: Point3<f64>) -> Self {
        const SPREAD: f64 = 0.03;
        let offsets = [
            Vector3::zeros(),
            Vector3::new(SPREAD, 0.0, 0.0),
            Vector3::new(-SPREAD, 0.0, 0.0),
            Vector3::new(0.0, SPREAD, 0.0),
            Vector3::new(0.0, -SPREAD, 0.0),
        ];
        Self {
            points: offsets.iter().map(|o| center + o).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Safe,
    Unsafe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyStatus {
    pub verdict: Verdict,
    /// Minimum hand-to-arm distance; infinite when no hand is visible.
    pub min_distance: f64,
    /// (robot point index 0..14, hand point index 0..10) while unsafe.
    pub pair: Option<(usize, usize)>,
}

impl SafetyStatus {
    pub fn safe() -> Self {
        Self {
            verdict: Verdict::Safe,
            min_distance: f64::INFINITY,
            pair: None,
        }
    }

    pub fn is_unsafe(&self) -> bool {
        self.verdict == Verdict::Unsafe
    }
}

impl Default for SafetyStatus {
    fn default() -> Self {
        Self::safe()
    }
}

/// Minimum distance over all robot-point / hand-point pairs along with the
/// indices achieving it. Hand point indices are `hand_slot * 5 + point`.
pub fn min_distance(robot: &[ArmKeypoints], hands: &[HumanHandPoints]) -> (f64, Option<(usize, usize)>) {
    let mut best = f64::INFINITY;
    let mut pair = None;
    for (a, arm) in robot.iter().enumerate() {
        for (i, rp) in arm.points.iter().enumerate() {
            for (h, hand) in hands.iter().enumerate() {
                for (j, hp) in hand.points.iter().enumerate() {
                    let d = (rp - hp).norm();
                    if d < best {
                        best = d;
                        pair = Some((a * KEYPOINTS_PER_ARM + i, h * POINTS_PER_HAND + j));
                    }
                }
            }
        }
    }
    (best, pair)
}

/// One supervisor evaluation with hysteresis: a safe supervisor trips when
/// the distance drops strictly below `threshold`, and an unsafe one clears
/// only once the distance is back at or above `threshold + hysteresis`.
pub fn check(
    robot: &[ArmKeypoints],
    hands: &[HumanHandPoints],
    threshold: f64,
    hysteresis: f64,
    prev: &SafetyStatus,
) -> SafetyStatus {
    let (d, pair) = min_distance(robot, hands);
    let unsafe_now = match prev.verdict {
        Verdict::Safe => d < threshold,
        Verdict::Unsafe => d < threshold + hysteresis,
    };
    SafetyStatus {
        verdict: if unsafe_now { Verdict::Unsafe } else { Verdict::Safe },
        min_distance: d,
        pair: if unsafe_now { pair } else { None },
    }
}
