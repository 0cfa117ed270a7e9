//! Parametric synthetic sequences for tests, fixtures and desk-scale runs.
//!
//! Six motion families deform a fixed standing rest pose with sinusoidal
//! joint trajectories. Each family moves a different set of joints, so any
//! two classes differ on at least one joint whenever the amplitude is
//! non-zero. Generation is a pure function of (class, seed, frames, params).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BodyFrame, SkeletonSequence, JOINT_COUNT};
use crate::math::Vec3;

/// Number of motion classes the generator understands.
pub const MOTION_CLASS_COUNT: u32 = 6;

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error("unknown motion class {0}, valid classes are 0..{MOTION_CLASS_COUNT}")]
    UnknownClass(u32),
    #[error("frame count must be at least 2, got {0}")]
    BadFrameCount(usize),
}

/// Knobs for the generator. `amplitude` scales every joint excursion (0 gives
/// a static pose), `jitter` randomizes per-sequence phase and amplitude, and
/// `frequency` is the number of motion cycles over the whole sequence.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SynthesisParams {
    pub amplitude: f64,
    pub jitter: f64,
    pub frequency: f64,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self { amplitude: 1.0, jitter: 0.25, frequency: 2.0 }
    }
}

/// Standing rest pose, roughly three metres from the camera, facing it.
/// Left-side joints sit at positive x so the hip line runs along +x.
const REST_POSE: [Vec3; JOINT_COUNT] = [
    Vec3 { x: 0.00, y: 0.00, z: 3.00 },  // base of spine
    Vec3 { x: 0.00, y: 0.25, z: 3.00 },  // middle of spine
    Vec3 { x: 0.00, y: 0.50, z: 3.00 },  // neck
    Vec3 { x: 0.00, y: 0.65, z: 3.00 },  // head
    Vec3 { x: 0.20, y: 0.45, z: 3.00 },  // left shoulder
    Vec3 { x: 0.25, y: 0.20, z: 3.00 },  // left elbow
    Vec3 { x: 0.28, y: -0.02, z: 3.00 }, // left wrist
    Vec3 { x: 0.29, y: -0.08, z: 3.00 }, // left hand
    Vec3 { x: -0.20, y: 0.45, z: 3.00 }, // right shoulder
    Vec3 { x: -0.25, y: 0.20, z: 3.00 }, // right elbow
    Vec3 { x: -0.28, y: -0.02, z: 3.00 }, // right wrist
    Vec3 { x: -0.29, y: -0.08, z: 3.00 }, // right hand
    Vec3 { x: 0.10, y: -0.05, z: 3.00 }, // left hip
    Vec3 { x: 0.12, y: -0.45, z: 3.00 }, // left knee
    Vec3 { x: 0.13, y: -0.85, z: 3.00 }, // left ankle
    Vec3 { x: 0.15, y: -0.90, z: 3.05 }, // left foot
    Vec3 { x: -0.10, y: -0.05, z: 3.00 }, // right hip
    Vec3 { x: -0.12, y: -0.45, z: 3.00 }, // right knee
    Vec3 { x: -0.13, y: -0.85, z: 3.00 }, // right ankle
    Vec3 { x: -0.15, y: -0.90, z: 3.05 }, // right foot
    Vec3 { x: 0.00, y: 0.40, z: 3.00 },  // spine at shoulders
    Vec3 { x: 0.30, y: -0.14, z: 3.00 }, // left hand tip
    Vec3 { x: 0.26, y: -0.12, z: 2.97 }, // left thumb
    Vec3 { x: -0.30, y: -0.14, z: 3.00 }, // right hand tip
    Vec3 { x: -0.26, y: -0.12, z: 2.97 }, // right thumb
];

/// Returns the rest pose the generator deforms.
pub fn rest_pose() -> [Vec3; JOINT_COUNT] {
    REST_POSE
}

/// Adds the class-specific displacement for one frame. `s` is the signed
/// oscillation in [-1, 1], `u = (s + 1) / 2` its unsigned form, and `amp`
/// the effective amplitude for this sequence.
fn apply_motion(class_id: u32, pose: &mut [Vec3; JOINT_COUNT], s: f64, u: f64, amp: f64) {
    let mut push = |joint: usize, d: Vec3, scale: f64| {
        pose[joint] = pose[joint] + d * (scale * amp);
    };
    match class_id {
        // Left arm raise.
        0 => {
            push(5, Vec3::new(0.02, 0.18, 0.0), u);
            push(6, Vec3::new(0.03, 0.30, 0.0), u);
            push(7, Vec3::new(0.03, 0.33, 0.0), u);
            push(21, Vec3::new(0.03, 0.36, 0.0), u);
            push(22, Vec3::new(0.03, 0.33, 0.0), u);
        }
        // Squat: everything above the knees dips, knees push forward.
        1 => {
            for joint in [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 16, 20, 21, 22, 23, 24] {
                push(joint, Vec3::new(0.0, -0.16, 0.0), u);
            }
            push(13, Vec3::new(0.0, -0.04, -0.09), u);
            push(17, Vec3::new(0.0, -0.04, -0.09), u);
        }
        // Lateral wave of the left hand.
        2 => {
            push(5, Vec3::new(0.08, 0.02, 0.0), s);
            push(6, Vec3::new(0.16, 0.04, 0.0), s);
            push(7, Vec3::new(0.18, 0.05, 0.0), s);
            push(21, Vec3::new(0.20, 0.05, 0.0), s);
            push(22, Vec3::new(0.18, 0.05, 0.0), s);
        }
        // Right-leg kick towards the camera.
        3 => {
            push(17, Vec3::new(0.0, 0.05, -0.12), u);
            push(18, Vec3::new(0.0, 0.12, -0.30), u);
            push(19, Vec3::new(0.0, 0.14, -0.34), u);
        }
        // Sideways torso lean.
        4 => {
            push(1, Vec3::new(0.05, 0.0, 0.0), s);
            push(20, Vec3::new(0.09, 0.0, 0.0), s);
            push(2, Vec3::new(0.11, 0.0, 0.0), s);
            push(3, Vec3::new(0.13, 0.0, 0.0), s);
            for joint in [4, 5, 6, 7, 21, 22] {
                push(joint, Vec3::new(0.10, 0.0, 0.0), s);
            }
            for joint in [8, 9, 10, 11, 23, 24] {
                push(joint, Vec3::new(0.10, 0.0, 0.0), s);
            }
        }
        // Clap: both hand clusters move towards the body midline.
        5 => {
            push(5, Vec3::new(-0.08, 0.04, -0.02), u);
            push(6, Vec3::new(-0.18, 0.08, -0.05), u);
            push(7, Vec3::new(-0.20, 0.09, -0.06), u);
            push(21, Vec3::new(-0.22, 0.09, -0.06), u);
            push(22, Vec3::new(-0.20, 0.09, -0.06), u);
            push(9, Vec3::new(0.08, 0.04, -0.02), u);
            push(10, Vec3::new(0.18, 0.08, -0.05), u);
            push(11, Vec3::new(0.20, 0.09, -0.06), u);
            push(23, Vec3::new(0.22, 0.09, -0.06), u);
            push(24, Vec3::new(0.20, 0.09, -0.06), u);
        }
        _ => unreachable!("class id validated by caller"),
    }
}

fn body_track(
    class_id: u32,
    seed: u64,
    frames: usize,
    params: &SynthesisParams,
) -> Result<Vec<[Vec3; JOINT_COUNT]>, SynthesisError> {
    if class_id >= MOTION_CLASS_COUNT {
        return Err(SynthesisError::UnknownClass(class_id));
    }
    if frames < 2 {
        return Err(SynthesisError::BadFrameCount(frames));
    }
    // Mix the class into the stream so sequences of different classes do not
    // share phase draws.
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ u64::from(class_id),
    );
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU) * params.jitter.clamp(0.0, 1.0);
    let amp_scale: f64 = 1.0 + params.jitter.clamp(0.0, 1.0) * rng.gen_range(-0.5..0.5);
    let amp = params.amplitude * amp_scale;
    let omega = std::f64::consts::TAU * params.frequency / frames as f64;

    let mut track = Vec::with_capacity(frames);
    for t in 0..frames {
        let s = (omega * t as f64 + phase).sin();
        let u = 0.5 * (s + 1.0);
        let mut pose = REST_POSE;
        apply_motion(class_id, &mut pose, s, u, amp);
        track.push(pose);
    }
    Ok(track)
}

/// Generates a single-body sequence for the given motion class.
pub fn synthesize_sequence(
    class_id: u32,
    seed: u64,
    frames: usize,
    params: &SynthesisParams,
) -> Result<SkeletonSequence, SynthesisError> {
    let track = body_track(class_id, seed, frames, params)?;
    Ok(SkeletonSequence {
        source_id: format!("synth-c{class_id}-s{seed}-t{frames}"),
        frames: track
            .into_iter()
            .map(|pose| vec![BodyFrame::new("1", pose)])
            .collect(),
    })
}

/// Generates a two-body sequence: body "1" performs `class_a` at full
/// amplitude, body "2" performs `class_b` beside it at 60% amplitude, so
/// body "1" is always the higher-variation subject.
pub fn synthesize_two_body(
    class_a: u32,
    class_b: u32,
    seed: u64,
    frames: usize,
    params: &SynthesisParams,
) -> Result<SkeletonSequence, SynthesisError> {
    let track_a = body_track(class_a, seed, frames, params)?;
    let damped = SynthesisParams { amplitude: params.amplitude * 0.6, ..*params };
    let track_b = body_track(class_b, seed.wrapping_add(1), frames, &damped)?;
    let offset = Vec3::new(0.9, 0.0, 0.15);

    let frames_out = track_a
        .into_iter()
        .zip(track_b)
        .map(|(pose_a, pose_b)| {
            let mut shifted = pose_b;
            for joint in &mut shifted {
                *joint = *joint + offset;
            }
            vec![BodyFrame::new("1", pose_a), BodyFrame::new("2", shifted)]
        })
        .collect();

    Ok(SkeletonSequence {
        source_id: format!("synth2-a{class_a}-b{class_b}-s{seed}-t{frames}"),
        frames: frames_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_arguments_give_identical_sequences() {
        let params = SynthesisParams::default();
        let a = synthesize_sequence(2, 41, 12, &params).unwrap();
        let b = synthesize_sequence(2, 41, 12, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_amplitude_repeats_the_static_pose() {
        let params = SynthesisParams { amplitude: 0.0, ..Default::default() };
        let seq = synthesize_sequence(0, 9, 5, &params).unwrap();
        for frame in &seq.frames {
            assert_eq!(frame[0].joints, seq.frames[0][0].joints);
        }
    }

    #[test]
    fn different_classes_move_different_joints() {
        let params = SynthesisParams::default();
        let a = synthesize_sequence(0, 7, 16, &params).unwrap();
        let b = synthesize_sequence(1, 7, 16, &params).unwrap();
        let max_diff = a
            .frames
            .iter()
            .zip(&b.frames)
            .flat_map(|(fa, fb)| {
                fa[0].joints
                    .iter()
                    .zip(&fb[0].joints)
                    .map(|(ja, jb)| (*ja - *jb).norm())
            })
            .fold(0.0f64, f64::max);
        assert!(max_diff > 0.0);
    }

    #[test]
    fn all_classes_synthesize_finite_joints() {
        let params = SynthesisParams::default();
        for class in 0..MOTION_CLASS_COUNT {
            let seq = synthesize_sequence(class, 3, 8, &params).unwrap();
            for frame in &seq.frames {
                assert!(frame[0].joints.iter().all(|j| j.is_finite()));
            }
        }
    }

    #[test]
    fn unknown_class_is_rejected() {
        let err = synthesize_sequence(MOTION_CLASS_COUNT, 0, 8, &SynthesisParams::default());
        assert!(matches!(err, Err(SynthesisError::UnknownClass(_))));
    }

    #[test]
    fn two_body_sequences_have_two_ids_per_frame() {
        let seq = synthesize_two_body(0, 3, 5, 10, &SynthesisParams::default()).unwrap();
        for frame in &seq.frames {
            assert_eq!(frame.len(), 2);
            assert_eq!(frame[0].body_id, "1");
            assert_eq!(frame[1].body_id, "2");
        }
    }
}
