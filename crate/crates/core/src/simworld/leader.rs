//! Synthetic leader: a distinct upper-body gesture per intention, and the
//! reference recognizer fitted on samples of those gestures.

use nalgebra::Rotation3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::intention::{
    encode_features, fit_centroids, ArmRotations, CentroidModel, ObjectObservation, ObservationBundle,
};
use crate::skillspec::{HandOccupancy, IntentionId, Scenario};

/// Left then right hand at rest, in front of the robot.
pub const REST_HANDS: [[f64; 3]; 2] = [[0.8, 0.2, 0.9], [0.8, -0.2, 0.9]];
pub const HEAD_HEIGHT: f64 = 1.25;
/// Per-angle noise (rad) in raw observations.
pub const ANGLE_NOISE: f64 = 0.02;
/// Per-axis noise (m) on tracked positions.
pub const POSITION_NOISE: f64 = 0.005;
const SAMPLES_PER_OCCUPANCY: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderPose {
    /// Euler angles of wrist, elbow and shoulder per arm.
    pub angles: [[[f64; 3]; 3]; 2],
    pub hand_pose: [[f64; 6]; 2],
    pub head_height: f64,
}

/// The nominal gesture for an intention. The idle intention is the rest
/// pose; every other intention gets a fixed pseudo-random pose.
pub fn gesture(scenario: &Scenario, intention: IntentionId) -> LeaderPose {
    if intention == scenario.idle_intention() {
        return LeaderPose {
            angles: [[[0.0; 3]; 3]; 2],
            hand_pose: [[0.0; 6]; 2],
            head_height: HEAD_HEIGHT,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e57_0000 + intention.0 as u64);
    let mut angles = [[[0.0; 3]; 3]; 2];
    for arm in &mut angles {
        for joint in arm.iter_mut() {
            for a in joint.iter_mut() {
                *a = rng.gen_range(-1.2..1.2);
            }
        }
    }
    let mut hand_pose = [[0.0; 6]; 2];
    for hand in &mut hand_pose {
        for v in hand.iter_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
    }
    LeaderPose {
        angles,
        hand_pose,
        head_height: HEAD_HEIGHT + rng.gen_range(-0.15..0.05),
    }
}

fn rotations(angles: &[[[f64; 3]; 3]; 2]) -> [ArmRotations; 2] {
    angles.map(|arm| {
        arm.map(|[r, p, y]| {
            let m = Rotation3::from_euler_angles(r, p, y);
            std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
        })
    })
}

/// What the recognizer sees: the gesture, hand positions and objects,
/// with sensor noise when `rng` is given.
pub fn observe(
    pose: &LeaderPose,
    hands: [[f64; 3]; 2],
    occupancy: HandOccupancy,
    objects: Vec<ObjectObservation>,
    rng: Option<&mut ChaCha8Rng>,
) -> ObservationBundle {
    let mut angles = pose.angles;
    let mut hands = hands;
    let mut hand_pose = pose.hand_pose;
    let mut head = pose.head_height;
    if let Some(rng) = rng {
        let angle = Normal::new(0.0, ANGLE_NOISE).expect("valid sigma");
        let pos = Normal::new(0.0, POSITION_NOISE).expect("valid sigma");
        for a in angles.iter_mut().flatten().flatten() {
            *a += angle.sample(rng);
        }
        for v in hand_pose.iter_mut().flatten() {
            *v += angle.sample(rng);
        }
        for v in hands.iter_mut().flatten() {
            *v += pos.sample(rng);
        }
        head += pos.sample(rng);
    }
    ObservationBundle {
        body: Some(rotations(&angles)),
        hand_pose: hand_pose.map(Some),
        hands: hands.map(Some),
        head_height: Some(head),
        occupancy,
        objects,
    }
}

/// Objects at their home positions.
pub fn home_objects(scenario: &Scenario) -> Vec<ObjectObservation> {
    scenario
        .objects
        .iter()
        .map(|o| ObjectObservation {
            id: o.id,
            center: o.position,
            radius: o.radius,
        })
        .collect()
}

/// Nearest-centroid model fitted on noisy gestures of every intention,
/// under every hand occupancy and random right-hand positions.
pub fn synthetic_model(scenario: &Scenario, seed: u64) -> CentroidModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00c0_ffee);
    let objects = home_objects(scenario);
    let occupancies = HandOccupancy::enumerate(&scenario.object_ids());
    let mut samples = Vec::new();
    for intention in &scenario.intentions {
        let pose = gesture(scenario, intention.id);
        for &occ in &occupancies {
            for _ in 0..SAMPLES_PER_OCCUPANCY {
                let right = [
                    rng.gen_range(0.3..0.9),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(0.75..1.25),
                ];
                let obs = observe(&pose, [REST_HANDS[0], right], occ, objects.clone(), Some(&mut rng));
                samples.push((encode_features(&obs), intention.id));
            }
        }
    }
    let classes: Vec<IntentionId> = scenario.intentions.iter().map(|i| i.id).collect();
    fit_centroids(&samples, &classes).expect("every intention has samples")
}
