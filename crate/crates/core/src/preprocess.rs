//! Raw sequences to two normalized subjects.
//!
//! The pipeline always works on exactly two subjects per sequence: the main
//! subject (the body track with the larger temporal variation) and an
//! auxiliary subject, which is either the second-best track or a shadow copy
//! of the main subject. Selection variance is measured after a per-frame
//! change to body coordinates so camera placement cannot influence it, while
//! the output coordinates are spine-normalized camera-frame positions.

use crate::math::{Mat3, Vec3};
use crate::skeleton::{
    body_id_order, SkeletonSequence, JOINT_COUNT, LEFT_HIP, RIGHT_HIP, SPINE_BASE, SPINE_MID,
    SPINE_SHOULDER,
};

/// One pose: 25 joints of a single subject in a single frame.
pub type Pose = [Vec3; JOINT_COUNT];

const DEGENERATE_EPS: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    #[error("sequence {0:?} has no bodies in any frame")]
    EmptySequence(String),
    #[error("frame {frame}: spine length below {DEGENERATE_EPS} and no earlier valid frame to borrow a scale from")]
    NoValidSpineScale { frame: usize },
}

/// All poses of one body id across the sequence; `None` where the tracker
/// lost the body in that frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyTrack {
    pub body_id: String,
    pub poses: Vec<Option<Pose>>,
}

impl BodyTrack {
    pub fn present_frames(&self) -> usize {
        self.poses.iter().filter(|p| p.is_some()).count()
    }
}

/// Exactly two spine-normalized subjects over `T` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSequence {
    pub source_id: String,
    pub main: Vec<Pose>,
    pub auxiliary: Vec<Pose>,
    /// True when no second body track existed and the auxiliary is a shadow
    /// copy of the main subject for the whole sequence.
    pub shadow: bool,
    /// Number of frames whose auxiliary pose was copied from the main
    /// subject (equals `T` for pure shadow sequences).
    pub shadow_frames: usize,
}

impl NormalizedSequence {
    pub fn frame_count(&self) -> usize {
        self.main.len()
    }

    pub fn subject_poses(&self, subject: crate::features::Subject) -> &[Pose] {
        match subject {
            crate::features::Subject::Main => &self.main,
            crate::features::Subject::Auxiliary => &self.auxiliary,
        }
    }
}

/// Groups a sequence's bodies into per-id tracks, ordered by first appearance.
pub fn collect_tracks(seq: &SkeletonSequence) -> Vec<BodyTrack> {
    let t = seq.frame_count();
    let mut tracks: Vec<BodyTrack> = Vec::new();
    for (frame_idx, frame) in seq.frames.iter().enumerate() {
        for body in frame {
            let track = match tracks.iter_mut().find(|tr| tr.body_id == body.body_id) {
                Some(track) => track,
                None => {
                    tracks.push(BodyTrack { body_id: body.body_id.clone(), poses: vec![None; t] });
                    tracks.last_mut().expect("just pushed")
                }
            };
            track.poses[frame_idx] = Some(body.joints);
        }
    }
    tracks
}

/// Per-frame change to body coordinates: origin at the middle of the spine,
/// +y along the spine (base of spine towards the shoulder-level spine
/// joint), +x along the hip line (right hip towards left hip) orthogonalized
/// against y, +z completing the right-handed frame. Returns the transformed
/// pose and whether the frame was too degenerate to rotate (in which case
/// only the translation is applied).
pub fn to_body_coordinates(pose: &Pose) -> (Pose, bool) {
    let origin = pose[SPINE_MID];
    let spine = pose[SPINE_SHOULDER] - pose[SPINE_BASE];
    let hips = pose[LEFT_HIP] - pose[RIGHT_HIP];

    let rotation = match spine.normalized(DEGENERATE_EPS) {
        Some(y_axis) => {
            let x_raw = hips - y_axis * hips.dot(y_axis);
            match x_raw.normalized(DEGENERATE_EPS) {
                Some(x_axis) => Some(Mat3::from_basis_rows(x_axis, y_axis, x_axis.cross(y_axis))),
                None => None,
            }
        }
        None => None,
    };

    let degenerate = rotation.is_none();
    let rotation = rotation.unwrap_or(Mat3::IDENTITY);
    let mut out = [Vec3::ZERO; JOINT_COUNT];
    for (slot, joint) in out.iter_mut().zip(pose.iter()) {
        *slot = rotation.apply(*joint - origin);
    }
    (out, degenerate)
}

/// Sum over joints and axes of the temporal variance of that coordinate,
/// computed in body coordinates over the frames where the track is present.
pub fn variation_score(track: &BodyTrack) -> f64 {
    let transformed: Vec<Pose> = track
        .poses
        .iter()
        .flatten()
        .map(|pose| to_body_coordinates(pose).0)
        .collect();
    let n = transformed.len();
    if n < 2 {
        return 0.0;
    }
    let mut score = 0.0;
    for joint in 0..JOINT_COUNT {
        for axis in 0..3 {
            let mean = transformed.iter().map(|p| p[joint].component(axis)).sum::<f64>() / n as f64;
            let var = transformed
                .iter()
                .map(|p| {
                    let d = p[joint].component(axis) - mean;
                    d * d
                })
                .sum::<f64>()
                / n as f64;
            score += var;
        }
    }
    score
}

/// Picks the main subject (largest variation score, ties going to the lower
/// body id) and, when present, the best remaining track as the other subject.
pub fn select_main_subject(
    seq: &SkeletonSequence,
) -> Result<(BodyTrack, Option<BodyTrack>), PreprocessError> {
    let mut tracks = collect_tracks(seq);
    if tracks.is_empty() {
        return Err(PreprocessError::EmptySequence(seq.source_id.clone()));
    }
    let mut scored: Vec<(f64, BodyTrack)> =
        tracks.drain(..).map(|tr| (variation_score(&tr), tr)).collect();
    scored.sort_by(|(sa, ta), (sb, tb)| {
        sb.partial_cmp(sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| body_id_order(&ta.body_id, &tb.body_id))
    });
    let mut it = scored.into_iter();
    let main = it.next().expect("non-empty").1;
    let other = it.next().map(|(_, tr)| tr);
    Ok((main, other))
}

/// Deep copy of the main track, used as the auxiliary subject when no second
/// body exists.
pub fn make_shadow(main: &BodyTrack) -> BodyTrack {
    main.clone()
}

/// Scales each frame so the distance from the base of the spine to the
/// middle of the spine is exactly 1, keeping the base of the spine fixed.
/// Frames with a degenerate spine reuse the nearest earlier valid scale.
pub fn normalize_spine(poses: &mut [Pose]) -> Result<(), PreprocessError> {
    let mut last_scale: Option<f64> = None;
    for (frame, pose) in poses.iter_mut().enumerate() {
        let measured = (pose[SPINE_MID] - pose[SPINE_BASE]).norm();
        let scale = if measured < DEGENERATE_EPS {
            last_scale.ok_or(PreprocessError::NoValidSpineScale { frame })?
        } else {
            last_scale = Some(measured);
            measured
        };
        let base = pose[SPINE_BASE];
        for joint in pose.iter_mut() {
            *joint = base + (*joint - base) / scale;
        }
    }
    Ok(())
}

/// Fills track gaps with the nearest earlier pose, falling back to the
/// nearest later pose for leading gaps. The track must have at least one
/// present frame.
fn fill_gaps(track: &BodyTrack) -> Vec<Pose> {
    let mut filled: Vec<Option<Pose>> = track.poses.clone();
    let mut last: Option<Pose> = None;
    for slot in filled.iter_mut() {
        match slot {
            Some(pose) => last = Some(*pose),
            None => *slot = last,
        }
    }
    let mut next: Option<Pose> = None;
    for slot in filled.iter_mut().rev() {
        match slot {
            Some(pose) => next = Some(*pose),
            None => *slot = next,
        }
    }
    filled
        .into_iter()
        .map(|p| p.expect("track has at least one present frame"))
        .collect()
}

/// Full normalization: select subjects, shadow-fill the auxiliary where it
/// is missing, and spine-normalize both subjects.
pub fn preprocess(seq: &SkeletonSequence) -> Result<NormalizedSequence, PreprocessError> {
    let (main_track, other_track) = select_main_subject(seq)?;
    let main = fill_gaps(&main_track);

    let mut shadow_frames = 0usize;
    let (auxiliary, shadow) = match &other_track {
        Some(other) => {
            let aux: Vec<Pose> = other
                .poses
                .iter()
                .zip(&main)
                .map(|(pose, main_pose)| match pose {
                    Some(p) => *p,
                    None => {
                        shadow_frames += 1;
                        *main_pose
                    }
                })
                .collect();
            (aux, false)
        }
        None => {
            shadow_frames = main.len();
            (make_shadow(&main_track).poses.iter().zip(&main).map(|(p, m)| p.unwrap_or(*m)).collect(), true)
        }
    };

    let mut main = main;
    let mut auxiliary = auxiliary;
    normalize_spine(&mut main)?;
    normalize_spine(&mut auxiliary)?;

    Ok(NormalizedSequence {
        source_id: seq.source_id.clone(),
        main,
        auxiliary,
        shadow,
        shadow_frames,
    })
}

/// Serializes a normalized sequence as a small headered text format.
pub fn write_normalized(seq: &NormalizedSequence) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "skeltex-normalized v1");
    let _ = writeln!(out, "source {}", seq.source_id);
    let _ = writeln!(out, "frames {}", seq.frame_count());
    let _ = writeln!(out, "shadow {}", if seq.shadow { 1 } else { 0 });
    let _ = writeln!(out, "shadow_frames {}", seq.shadow_frames);
    for t in 0..seq.frame_count() {
        for pose in [&seq.main[t], &seq.auxiliary[t]] {
            for joint in pose.iter() {
                let _ = writeln!(out, "{} {} {}", joint.x, joint.y, joint.z);
            }
        }
    }
    out
}

/// Magic line identifying the normalized text format.
pub const NORMALIZED_MAGIC: &str = "skeltex-normalized v1";

/// Parses the format produced by [`write_normalized`].
pub fn read_normalized(text: &str) -> Result<NormalizedSequence, String> {
    let mut lines = text.lines();
    let magic = lines.next().ok_or("empty file")?;
    if magic.trim() != NORMALIZED_MAGIC {
        return Err(format!("bad magic line {magic:?}"));
    }
    let mut header = |prefix: &str| -> Result<String, String> {
        let line = lines.next().ok_or_else(|| format!("missing {prefix} header"))?;
        line.strip_prefix(prefix)
            .map(|rest| rest.trim().to_string())
            .ok_or_else(|| format!("expected {prefix} header, got {line:?}"))
    };
    let source_id = header("source ")?;
    let frames: usize = header("frames ")?.parse().map_err(|e| format!("bad frame count: {e}"))?;
    let shadow = header("shadow ")? == "1";
    let shadow_frames: usize =
        header("shadow_frames ")?.parse().map_err(|e| format!("bad shadow_frames: {e}"))?;

    let mut read_pose = |what: &str| -> Result<Pose, String> {
        let mut pose = [Vec3::ZERO; JOINT_COUNT];
        for joint in pose.iter_mut() {
            let line = lines.next().ok_or_else(|| format!("truncated {what} pose"))?;
            let mut tok = line.split_whitespace();
            let mut xyz = [0.0f64; 3];
            for slot in xyz.iter_mut() {
                *slot = tok
                    .next()
                    .ok_or_else(|| format!("short joint line {line:?}"))?
                    .parse::<f64>()
                    .map_err(|e| format!("bad coordinate in {line:?}: {e}"))?;
            }
            *joint = Vec3::new(xyz[0], xyz[1], xyz[2]);
        }
        Ok(pose)
    };

    let mut main = Vec::with_capacity(frames);
    let mut auxiliary = Vec::with_capacity(frames);
    for _ in 0..frames {
        main.push(read_pose("main")?);
        auxiliary.push(read_pose("auxiliary")?);
    }
    Ok(NormalizedSequence { source_id, main, auxiliary, shadow, shadow_frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{
        rest_pose, synthesize_sequence, synthesize_two_body, BodyFrame, SynthesisParams,
    };

    fn static_two_body(oscillate_second: bool, ids: (&str, &str)) -> SkeletonSequence {
        let t = 8;
        let mut frames = Vec::new();
        for i in 0..t {
            let pose_a = rest_pose();
            let mut pose_b = rest_pose();
            for joint in &mut pose_b {
                joint.x += 1.0;
            }
            if oscillate_second {
                pose_b[6].y += 0.2 * (i as f64 * 0.9).sin();
            }
            frames.push(vec![
                BodyFrame::new(ids.0, pose_a),
                BodyFrame::new(ids.1, pose_b),
            ]);
        }
        SkeletonSequence { source_id: "pair".into(), frames }
    }

    #[test]
    fn oscillating_body_wins_selection() {
        let seq = static_two_body(true, ("1", "2"));
        let (main, other) = select_main_subject(&seq).unwrap();
        assert_eq!(main.body_id, "2");
        assert_eq!(other.unwrap().body_id, "1");
    }

    #[test]
    fn single_body_selects_that_body() {
        let seq = synthesize_sequence(0, 3, 6, &SynthesisParams::default()).unwrap();
        let (main, other) = select_main_subject(&seq).unwrap();
        assert_eq!(main.body_id, "1");
        assert!(other.is_none());
    }

    #[test]
    fn variance_tie_breaks_on_lower_body_id() {
        // Two bit-identical tracks tie exactly, so the lower id wins.
        let pose = rest_pose();
        let frames = (0..6)
            .map(|_| vec![BodyFrame::new("7", pose), BodyFrame::new("3", pose)])
            .collect();
        let seq = SkeletonSequence { source_id: "tie".into(), frames };
        let (main, _) = select_main_subject(&seq).unwrap();
        assert_eq!(main.body_id, "3");
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let seq = SkeletonSequence { source_id: "none".into(), frames: vec![vec![], vec![]] };
        assert!(matches!(select_main_subject(&seq), Err(PreprocessError::EmptySequence(_))));
    }

    #[test]
    fn canonical_pose_is_a_fixed_point_of_body_coordinates() {
        let mut pose = rest_pose();
        let origin = pose[SPINE_MID];
        for joint in &mut pose {
            *joint = *joint - origin;
        }
        let (out, degenerate) = to_body_coordinates(&pose);
        assert!(!degenerate);
        for (a, b) in out.iter().zip(pose.iter()) {
            assert!((*a - *b).norm() < 1e-9);
        }
    }

    #[test]
    fn translation_is_removed_by_body_coordinates() {
        let pose = rest_pose();
        let mut shifted = pose;
        for joint in &mut shifted {
            *joint = *joint + Vec3::new(-4.0, 2.5, 10.0);
        }
        let (a, _) = to_body_coordinates(&pose);
        let (b, _) = to_body_coordinates(&shifted);
        for (ja, jb) in a.iter().zip(b.iter()) {
            assert!((*ja - *jb).norm() < 1e-9);
        }
    }

    #[test]
    fn rotated_pose_maps_back_to_canonical() {
        let pose = rest_pose();
        let rot = Mat3::from_quaternion(0.9, 0.1, -0.3, 0.25);
        let mut moved = pose;
        for joint in &mut moved {
            *joint = rot.apply(*joint) + Vec3::new(1.0, -2.0, 0.5);
        }
        let (canonical, _) = to_body_coordinates(&pose);
        let (recovered, degenerate) = to_body_coordinates(&moved);
        assert!(!degenerate);
        for (ja, jb) in canonical.iter().zip(recovered.iter()) {
            assert!((*ja - *jb).norm() < 1e-6);
        }
    }

    #[test]
    fn degenerate_spine_falls_back_to_identity_rotation() {
        let mut pose = rest_pose();
        let base = pose[SPINE_BASE];
        for joint in &mut pose {
            *joint = base;
        }
        let (out, degenerate) = to_body_coordinates(&pose);
        assert!(degenerate);
        assert!(out.iter().all(|j| j.is_finite()));
    }

    #[test]
    fn spine_of_length_two_scales_by_half() {
        let mut pose = rest_pose();
        let base = pose[SPINE_BASE];
        for joint in &mut pose {
            *joint = base + (*joint - base) * 8.0; // spine length 0.25 -> 2.0
        }
        let mut frames = vec![pose];
        normalize_spine(&mut frames).unwrap();
        let spine = (frames[0][SPINE_MID] - frames[0][SPINE_BASE]).norm();
        assert!((spine - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_spine_is_unchanged() {
        let mut pose = rest_pose();
        let base = pose[SPINE_BASE];
        for joint in &mut pose {
            *joint = base + (*joint - base) * 4.0; // spine length exactly 1
        }
        let expected = pose;
        let mut frames = vec![pose];
        normalize_spine(&mut frames).unwrap();
        for (a, b) in frames[0].iter().zip(expected.iter()) {
            assert!((*a - *b).norm() < 1e-12);
        }
    }

    #[test]
    fn normalization_preserves_distance_ratios() {
        let seq = synthesize_sequence(4, 11, 4, &SynthesisParams::default()).unwrap();
        let pose = seq.frames[2][0].joints;
        let mut frames = vec![pose];
        normalize_spine(&mut frames).unwrap();
        let before = (pose[3] - pose[19]).norm() / (pose[7] - pose[11]).norm();
        let after = (frames[0][3] - frames[0][19]).norm() / (frames[0][7] - frames[0][11]).norm();
        assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn degenerate_first_frame_without_fallback_errors() {
        let mut pose = rest_pose();
        pose[SPINE_MID] = pose[SPINE_BASE];
        let mut frames = vec![pose];
        assert!(matches!(
            normalize_spine(&mut frames),
            Err(PreprocessError::NoValidSpineScale { frame: 0 })
        ));
    }

    #[test]
    fn degenerate_later_frame_borrows_previous_scale() {
        let good = rest_pose();
        let mut bad = rest_pose();
        bad[SPINE_MID] = bad[SPINE_BASE];
        let mut frames = vec![good, bad];
        normalize_spine(&mut frames).unwrap();
        assert!(frames[1].iter().all(|j| j.is_finite()));
    }

    #[test]
    fn single_body_preprocess_is_a_shadow_sequence() {
        let seq = synthesize_sequence(2, 5, 7, &SynthesisParams::default()).unwrap();
        let norm = preprocess(&seq).unwrap();
        assert!(norm.shadow);
        assert_eq!(norm.shadow_frames, 7);
        assert_eq!(norm.main, norm.auxiliary);
    }

    #[test]
    fn two_body_preprocess_is_not_shadow() {
        let seq = synthesize_two_body(0, 1, 13, 9, &SynthesisParams::default()).unwrap();
        let norm = preprocess(&seq).unwrap();
        assert!(!norm.shadow);
        assert_eq!(norm.shadow_frames, 0);
    }

    #[test]
    fn preprocess_output_has_unit_spines() {
        let seq = synthesize_two_body(3, 2, 21, 11, &SynthesisParams::default()).unwrap();
        let norm = preprocess(&seq).unwrap();
        for t in 0..norm.frame_count() {
            for pose in [&norm.main[t], &norm.auxiliary[t]] {
                let spine = (pose[SPINE_MID] - pose[SPINE_BASE]).norm();
                assert!((spine - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn missing_auxiliary_frames_fall_back_to_shadow() {
        let mut seq = static_two_body(true, ("1", "2"));
        seq.frames[3].retain(|b| b.body_id == "2");
        seq.frames[5].retain(|b| b.body_id == "2");
        // Body "2" oscillates so it is main; body "1" is auxiliary and now
        // missing in two frames.
        let norm = preprocess(&seq).unwrap();
        assert!(!norm.shadow);
        assert_eq!(norm.shadow_frames, 2);
        assert_eq!(norm.main[3], norm.auxiliary[3]);
    }

    #[test]
    fn preprocess_is_stable_under_reapplication() {
        let seq = synthesize_two_body(1, 4, 8, 10, &SynthesisParams::default()).unwrap();
        let first = preprocess(&seq).unwrap();
        let reinterpreted = SkeletonSequence {
            source_id: first.source_id.clone(),
            frames: (0..first.frame_count())
                .map(|t| {
                    vec![
                        BodyFrame::new("1", first.main[t]),
                        BodyFrame::new("2", first.auxiliary[t]),
                    ]
                })
                .collect(),
        };
        let second = preprocess(&reinterpreted).unwrap();
        for t in 0..first.frame_count() {
            for (a, b) in first.main[t].iter().zip(second.main[t].iter()) {
                assert!((*a - *b).norm() < 1e-9);
            }
            for (a, b) in first.auxiliary[t].iter().zip(second.auxiliary[t].iter()) {
                assert!((*a - *b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn normalized_roundtrip_through_text() {
        let seq = synthesize_two_body(0, 5, 3, 6, &SynthesisParams::default()).unwrap();
        let norm = preprocess(&seq).unwrap();
        let text = write_normalized(&norm);
        let back = read_normalized(&text).unwrap();
        assert_eq!(norm, back);
    }
}
