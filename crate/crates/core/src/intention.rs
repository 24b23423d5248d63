//! Observation features and the reference intention recognizer.
//!
//! The feature vector has 77 entries laid out as
//!
//! | range   | block                                                   |
//! |---------|---------------------------------------------------------|
//! | 0..36   | 6D rotation of wrist, elbow, shoulder for each arm      |
//! | 36..48  | six retargeted joint values per hand                    |
//! | 48..58  | five-slot one-hot of the held object per robot hand     |
//! | 58..77  | hand x/y, head height, nearest-object block per hand    |
//!
//! The nearest-object block is a five-slot one-hot, the hand-to-center
//! distance, and the mean of IOU and IOF between a hand sphere and the
//! object sphere.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skillspec::{Hand, HandOccupancy, IntentionId, ObjectId, MAX_OBJECTS};

pub const BODY_DIM: usize = 36;
pub const HAND_DIM: usize = 12;
pub const OCCUPANCY_DIM: usize = 10;
pub const DETAIL_DIM: usize = 19;
pub const FEATURE_DIM: usize = BODY_DIM + HAND_DIM + OCCUPANCY_DIM + DETAIL_DIM;

const BODY: usize = 0;
const HAND: usize = BODY + BODY_DIM;
const OCCUPANCY: usize = HAND + HAND_DIM;
const DETAIL: usize = OCCUPANCY + OCCUPANCY_DIM;
const NEAREST: usize = DETAIL + 5;
const NEAREST_DIM: usize = MAX_OBJECTS + 2;

/// Radius of the sphere standing in for a human hand in overlap scores.
pub const HAND_SPHERE_RADIUS: f64 = 0.05;
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl Default for FeatureVector {
    fn default() -> Self {
        Self([0.0; FEATURE_DIM])
    }
}

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn body(&self) -> &[f64] {
        &self.0[BODY..HAND]
    }

    pub fn hand_pose(&self) -> &[f64] {
        &self.0[HAND..OCCUPANCY]
    }

    pub fn occupancy(&self) -> &[f64] {
        &self.0[OCCUPANCY..DETAIL]
    }

    pub fn details(&self) -> &[f64] {
        &self.0[DETAIL..]
    }

    /// The seven-entry nearest-object block of one hand.
    pub fn nearest(&self, hand: Hand) -> &[f64] {
        let start = NEAREST + hand.index() * NEAREST_DIM;
        &self.0[start..start + NEAREST_DIM]
    }
}

/// Leader joint rotations in the order wrist, elbow, shoulder.
pub type ArmRotations = [[[f64; 3]; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectObservation {
    pub id: ObjectId,
    pub center: [f64; 3],
    pub radius: f64,
}

/// One tick of raw leader and robot observations in the world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBundle {
    /// Rotation matrices per arm (left, right). `None` when the skeleton
    /// was not tracked.
    pub body: Option<[ArmRotations; 2]>,
    pub hand_pose: [Option<[f64; 6]>; 2],
    pub hands: [Option<[f64; 3]>; 2],
    pub head_height: Option<f64>,
    pub occupancy: HandOccupancy,
    pub objects: Vec<ObjectObservation>,
}

impl Default for ObservationBundle {
    fn default() -> Self {
        Self {
            body: None,
            hand_pose: [None; 2],
            hands: [None; 2],
            head_height: None,
            occupancy: HandOccupancy::EMPTY,
            objects: Vec::new(),
        }
    }
}

impl ObservationBundle {
    /// True when any sub-signal is missing and was zero-filled.
    pub fn has_gaps(&self) -> bool {
        self.body.is_none()
            || self.hand_pose.iter().any(Option::is_none)
            || self.hands.iter().any(Option::is_none)
            || self.head_height.is_none()
    }
}

/// Volume of the intersection of two spheres at center distance `d`.
pub fn sphere_intersection_volume(r1: f64, r2: f64, d: f64) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    if d <= (r1 - r2).abs() {
        let r = r1.min(r2);
        return 4.0 / 3.0 * PI * r.powi(3);
    }
    PI * (r1 + r2 - d).powi(2) * (d * d + 2.0 * d * r2 - 3.0 * r2 * r2 + 2.0 * d * r1 + 6.0 * r2 * r1 - 3.0 * r1 * r1)
        / (12.0 * d)
}

/// Mean of intersection-over-union and intersection-over-foreground, with
/// the object as foreground.
pub fn overlap_score(hand_radius: f64, object_radius: f64, d: f64) -> f64 {
    let inter = sphere_intersection_volume(hand_radius, object_radius, d);
    if inter <= 0.0 {
        return 0.0;
    }
    let vol = |r: f64| 4.0 / 3.0 * PI * r.powi(3);
    let iou = inter / (vol(hand_radius) + vol(object_radius) - inter);
    let iof = inter / vol(object_radius);
    (0.5 * (iou + iof)).clamp(0.0, 1.0)
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn encode_features(obs: &ObservationBundle) -> FeatureVector {
    let mut f = [0.0; FEATURE_DIM];

    if let Some(arms) = &obs.body {
        let mut i = BODY;
        for arm in arms {
            for m in arm {
                // first two columns
                for col in 0..2 {
                    for row in m {
                        f[i] = row[col];
                        i += 1;
                    }
                }
            }
        }
    }

    for (h, pose) in obs.hand_pose.iter().enumerate() {
        if let Some(p) = pose {
            f[HAND + 6 * h..HAND + 6 * h + 6].copy_from_slice(p);
        }
    }

    for hand in Hand::BOTH {
        if let Some(k) = obs.occupancy.hand(hand) {
            let slot = k.0 as usize;
            if slot < MAX_OBJECTS {
                f[OCCUPANCY + MAX_OBJECTS * hand.index() + slot] = 1.0;
            }
        }
    }

    for (h, pos) in obs.hands.iter().enumerate() {
        if let Some(p) = pos {
            f[DETAIL + 2 * h] = p[0];
            f[DETAIL + 2 * h + 1] = p[1];
        }
    }
    f[DETAIL + 4] = obs.head_height.unwrap_or(0.0);

    for (h, pos) in obs.hands.iter().enumerate() {
        let Some(p) = pos else { continue };
        let nearest = obs
            .objects
            .iter()
            .filter(|o| (o.id.0 as usize) < MAX_OBJECTS)
            .map(|o| (distance(*p, o.center), o))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
        if let Some((d, o)) = nearest {
            let base = NEAREST + h * NEAREST_DIM;
            f[base + o.id.0 as usize] = 1.0;
            f[base + MAX_OBJECTS] = d;
            f[base + MAX_OBJECTS + 1] = overlap_score(HAND_SPHERE_RADIUS, o.radius, d);
        }
    }
    FeatureVector(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Centroid {
    pub id: IntentionId,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Nearest-centroid recognizer with per-class, per-dimension scaling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentroidModel {
    dim: usize,
    /// Sorted by id.
    classes: Vec<Centroid>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("no samples for intention(s) {}", join_ids(.0))]
    MissingClasses(Vec<IntentionId>),
    #[error("model parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("model dimension {0} differs from {FEATURE_DIM}")]
    Dimension(usize),
    #[error("class {id}: {reason}")]
    BadClass { id: IntentionId, reason: String },
    #[error("model has no classes")]
    Empty,
}

fn join_ids(ids: &[IntentionId]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    dim: usize,
    classes: Vec<Centroid>,
}

impl CentroidModel {
    pub fn new(mut classes: Vec<Centroid>) -> Result<Self, ModelError> {
        if classes.is_empty() {
            return Err(ModelError::Empty);
        }
        classes.sort_by_key(|c| c.id);
        let mut seen = BTreeSet::new();
        for c in &classes {
            let bad = |reason: &str| ModelError::BadClass {
                id: c.id,
                reason: reason.to_string(),
            };
            if !seen.insert(c.id) {
                return Err(bad("duplicate class"));
            }
            if c.mean.len() != FEATURE_DIM || c.std.len() != FEATURE_DIM {
                return Err(bad("vector length differs from the feature dimension"));
            }
            if !c.mean.iter().all(|v| v.is_finite()) {
                return Err(bad("non-finite mean"));
            }
            if !c.std.iter().all(|v| v.is_finite() && *v > 0.0) {
                return Err(bad("scales must be finite and positive"));
            }
        }
        Ok(Self {
            dim: FEATURE_DIM,
            classes,
        })
    }

    pub fn classes(&self) -> &[Centroid] {
        &self.classes
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if doc.dim != FEATURE_DIM {
            return Err(ModelError::Dimension(doc.dim));
        }
        Self::new(doc.classes)
    }

    fn distance(c: &Centroid, fv: &FeatureVector) -> f64 {
        c.mean
            .iter()
            .zip(&c.std)
            .zip(fv.as_slice())
            .map(|((m, s), x)| ((x - m) / s).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Per-class mean and population standard deviation (floored at
/// [`STD_FLOOR`]). Every id in `classes` needs at least one sample.
pub fn fit_centroids(
    samples: &[(FeatureVector, IntentionId)],
    classes: &[IntentionId],
) -> Result<CentroidModel, ModelError> {
    let wanted: BTreeSet<IntentionId> = classes.iter().copied().collect();
    let mut out = Vec::with_capacity(wanted.len());
    let mut missing = Vec::new();
    for &id in &wanted {
        let members: Vec<&FeatureVector> = samples.iter().filter(|(_, c)| *c == id).map(|(f, _)| f).collect();
        if members.is_empty() {
            missing.push(id);
            continue;
        }
        let n = members.len() as f64;
        let mut mean = vec![0.0; FEATURE_DIM];
        for f in &members {
            for (m, x) in mean.iter_mut().zip(f.as_slice()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; FEATURE_DIM];
        for f in &members {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(f.as_slice()) {
                *v += (x - m).powi(2);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        out.push(Centroid { id, mean, std });
    }
    if !missing.is_empty() {
        return Err(ModelError::MissingClasses(missing));
    }
    CentroidModel::new(out)
}

/// Closest class and the negated distance to every class, in class id order.
pub fn classify(model: &CentroidModel, fv: &FeatureVector) -> (IntentionId, Vec<f64>) {
    let scores: Vec<f64> = model.classes.iter().map(|c| -CentroidModel::distance(c, fv)).collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    (model.classes[best].id, scores)
}

/// Anything that maps a feature vector to an intention each tick.
pub trait Recognizer {
    fn recognize(&self, fv: &FeatureVector) -> IntentionId;
}

impl Recognizer for CentroidModel {
    fn recognize(&self, fv: &FeatureVector) -> IntentionId {
        classify(self, fv).0
    }
}
