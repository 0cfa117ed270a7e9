//! Skeleton sequence model, file I/O and synthetic sequence generation.
//!
//! A sequence is an ordered list of frames; each frame holds zero or more
//! tracked bodies; each body is exactly 25 joints in the fixed index order
//! given by [`JOINT_NAMES`]. Parsing keeps every body it finds and flags
//! empty frames; reducing to two subjects is the preprocessing stage's job.

mod parse;
mod synth;

pub use parse::{parse_skeleton_file, parse_skeleton_reader, write_skeleton, write_skeleton_file, ParseError};
pub use synth::{
    rest_pose, synthesize_sequence, synthesize_two_body, SynthesisError, SynthesisParams,
    MOTION_CLASS_COUNT,
};

use crate::math::{Mat3, Vec3};

/// Number of joints per tracked body.
pub const JOINT_COUNT: usize = 25;

/// Joint names in index order (0-based). Index 0 is the base of the spine,
/// index 1 the middle of the spine, index 20 the spine at shoulder level.
pub const JOINT_NAMES: [&str; JOINT_COUNT] = [
    "base of spine",      // 0
    "middle of spine",    // 1
    "neck",               // 2
    "head",               // 3
    "left shoulder",      // 4
    "left elbow",         // 5
    "left wrist",         // 6
    "left hand",          // 7
    "right shoulder",     // 8
    "right elbow",        // 9
    "right wrist",        // 10
    "right hand",         // 11
    "left hip",           // 12
    "left knee",          // 13
    "left ankle",         // 14
    "left foot",          // 15
    "right hip",          // 16
    "right knee",         // 17
    "right ankle",        // 18
    "right foot",         // 19
    "spine at shoulders", // 20
    "left hand tip",      // 21
    "left thumb",         // 22
    "right hand tip",     // 23
    "right thumb",        // 24
];

/// Well-known joint indices used by the preprocessing stage.
pub const SPINE_BASE: usize = 0;
pub const SPINE_MID: usize = 1;
pub const SPINE_SHOULDER: usize = 20;
pub const LEFT_HIP: usize = 12;
pub const RIGHT_HIP: usize = 16;

/// Kinematic tree of the 25-joint body, as undirected (parent, child) pairs.
/// Hand tips and thumbs attach to the hands; feet to the ankles.
pub const KINEMATIC_EDGES: [(usize, usize); 24] = [
    (0, 1),
    (1, 20),
    (2, 20),
    (2, 3),
    (4, 20),
    (4, 5),
    (5, 6),
    (6, 7),
    (8, 20),
    (8, 9),
    (9, 10),
    (10, 11),
    (0, 12),
    (12, 13),
    (13, 14),
    (14, 15),
    (0, 16),
    (16, 17),
    (17, 18),
    (18, 19),
    (7, 21),
    (7, 22),
    (11, 23),
    (11, 24),
];

/// One tracked body in one frame: 25 joints plus the tracker's body id.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyFrame {
    pub body_id: String,
    pub joints: [Vec3; JOINT_COUNT],
}

impl BodyFrame {
    pub fn new(body_id: impl Into<String>, joints: [Vec3; JOINT_COUNT]) -> Self {
        Self { body_id: body_id.into(), joints }
    }
}

/// An ordered sequence of frames. Frames may hold any number of bodies,
/// including none; `T` is always `frames.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub source_id: String,
    pub frames: Vec<Vec<BodyFrame>>,
}

impl SkeletonSequence {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Indices of frames that contain no tracked body.
    pub fn empty_frames(&self) -> Vec<usize> {
        self.frames
            .iter()
            .enumerate()
            .filter(|(_, bodies)| bodies.is_empty())
            .map(|(t, _)| t)
            .collect()
    }

    /// Distinct body ids in first-seen order.
    pub fn body_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for frame in &self.frames {
            for body in frame {
                if !ids.iter().any(|id| *id == body.body_id) {
                    ids.push(body.body_id.clone());
                }
            }
        }
        ids
    }

    /// Histogram of bodies-per-frame counts, indexed by body count.
    pub fn body_histogram(&self) -> Vec<usize> {
        let max = self.frames.iter().map(Vec::len).max().unwrap_or(0);
        let mut hist = vec![0usize; max + 1];
        for frame in &self.frames {
            hist[frame.len()] += 1;
        }
        hist
    }

    /// Applies one global rigid motion (rotation then translation) to every
    /// joint of every body in every frame.
    pub fn transformed(&self, rotation: &Mat3, translation: Vec3) -> SkeletonSequence {
        let frames = self
            .frames
            .iter()
            .map(|frame| {
                frame
                    .iter()
                    .map(|body| {
                        let mut joints = body.joints;
                        for joint in &mut joints {
                            *joint = rotation.apply(*joint) + translation;
                        }
                        BodyFrame { body_id: body.body_id.clone(), joints }
                    })
                    .collect()
            })
            .collect();
        SkeletonSequence { source_id: self.source_id.clone(), frames }
    }

    /// Scales every coordinate by `s` about the origin.
    pub fn scaled(&self, s: f64) -> SkeletonSequence {
        let frames = self
            .frames
            .iter()
            .map(|frame| {
                frame
                    .iter()
                    .map(|body| {
                        let mut joints = body.joints;
                        for joint in &mut joints {
                            *joint = *joint * s;
                        }
                        BodyFrame { body_id: body.body_id.clone(), joints }
                    })
                    .collect()
            })
            .collect();
        SkeletonSequence { source_id: self.source_id.clone(), frames }
    }
}

/// Orders body ids numerically when both parse as integers, falling back to
/// the string order. Used for deterministic tie-breaking.
pub fn body_id_order(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<u128>(), b.parse::<u128>()) {
        (Ok(na), Ok(nb)) => na.cmp(&nb),
        _ => a.cmp(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinematic_edges_form_a_tree_over_all_joints() {
        // 24 edges over 25 nodes with full connectivity.
        let mut adj = vec![Vec::new(); JOINT_COUNT];
        for &(a, b) in &KINEMATIC_EDGES {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = [false; JOINT_COUNT];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn body_id_order_is_numeric_when_possible() {
        use std::cmp::Ordering;
        assert_eq!(body_id_order("3", "7"), Ordering::Less);
        assert_eq!(body_id_order("9", "10"), Ordering::Less);
        assert_eq!(body_id_order("abc", "abd"), Ordering::Less);
    }
}
