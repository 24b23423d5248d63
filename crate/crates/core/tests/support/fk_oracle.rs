//! Forward kinematics by explicit 4x4 homogeneous matrices.

#![allow(dead_code)]

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rhino_core::safety::{forward_kinematics, KinematicChain};
use rhino_core::skillspec::RobotModel;

type M4 = [[f64; 4]; 4];

fn identity() -> M4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn mul(a: &M4, b: &M4) -> M4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn translation(t: [f64; 3]) -> M4 {
    let mut m = identity();
    for i in 0..3 {
        m[i][3] = t[i];
    }
    m
}

/// Rodrigues: R = I + sin(a) K + (1 - cos(a)) K².
fn rotation(axis: [f64; 3], angle: f64) -> M4 {
    let [x, y, z] = axis;
    let k = [[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]];
    let mut k2 = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k2[i][j] = (0..3).map(|n| k[i][n] * k[n][j]).sum();
        }
    }
    let (s, c) = angle.sin_cos();
    let mut m = identity();
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] += s * k[i][j] + (1.0 - c) * k2[i][j];
        }
    }
    m
}

pub fn oracle_origins(chain: &KinematicChain, q: &[f64]) -> Vec<[f64; 3]> {
    let mut frames: Vec<M4> = Vec::new();
    let mut origins = Vec::new();
    for (joint, &angle) in chain.joints.iter().zip(q) {
        let parent = joint.parent.map(|p| frames[p]).unwrap_or_else(identity);
        let at = mul(&parent, &translation(joint.offset));
        origins.push([at[0][3], at[1][3], at[2][3]]);
        frames.push(mul(&at, &rotation(joint.axis, angle)));
    }
    origins
}

pub fn max_err(a: &[Point3<f64>], b: &[[f64; 3]]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(p, o)| (0..3).map(move |i| (p[i] - o[i]).abs()))
        .fold(0.0, f64::max)
}

/// Largest coordinate error of `forward_kinematics` against the oracle
/// over `n` random configurations of the default arms.
pub fn worst_default_arm_error(n: usize, seed: u64) -> f64 {
    let robot = RobotModel::humanoid_default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..n {
        let arm = &robot.arms[i % 2];
        let q: Vec<f64> = arm.chain.joints.iter().map(|_| rng.gen_range(-3.2..3.2)).collect();
        let got = forward_kinematics(&arm.chain, &q).unwrap();
        worst = worst.max(max_err(&got, &oracle_origins(&arm.chain, &q)));
    }
    worst
}
