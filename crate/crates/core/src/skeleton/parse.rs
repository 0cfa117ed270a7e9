//! Line-oriented skeleton file parsing and writing.
//!
//! Layout: line 1 holds the frame count; each frame starts with its body
//! count; each body starts with a header line whose first token is the body
//! id, optionally followed by a joint-count line, then one line per joint
//! with at least `x y z`. Extra fields on header or joint lines are ignored,
//! which is enough to read NTU-style capture files; the writer emits the
//! minimal subset (no joint-count line, no extra fields).

use std::fmt::Write as _;
use std::path::Path;

use super::{BodyFrame, SkeletonSequence, JOINT_COUNT};
use crate::math::Vec3;

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: body declares {got} joints, expected {JOINT_COUNT}")]
    BadJointCount { line: usize, got: usize },
    #[error("non-finite coordinate at frame {frame}, body {body}, joint {joint} (line {line})")]
    NonFinite { frame: usize, body: usize, joint: usize, line: usize },
}

struct Lines<'a> {
    lines: Vec<&'a str>,
    next: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { lines: text.lines().collect(), next: 0 }
    }

    /// 1-based number of the line about to be consumed.
    fn line_no(&self) -> usize {
        self.next + 1
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.next).copied()
    }

    fn take(&mut self, what: &str) -> Result<&'a str, ParseError> {
        match self.lines.get(self.next) {
            Some(line) => {
                self.next += 1;
                Ok(line)
            }
            None => Err(ParseError::Malformed {
                line: self.line_no(),
                message: format!("unexpected end of file, expected {what}"),
            }),
        }
    }

    fn take_count(&mut self, what: &str) -> Result<usize, ParseError> {
        let line_no = self.line_no();
        let line = self.take(what)?;
        let mut tokens = line.split_whitespace();
        let tok = tokens.next().ok_or_else(|| ParseError::Malformed {
            line: line_no,
            message: format!("blank line, expected {what}"),
        })?;
        if tokens.next().is_some() {
            return Err(ParseError::Malformed {
                line: line_no,
                message: format!("expected a single integer ({what}), got {line:?}"),
            });
        }
        tok.parse::<usize>().map_err(|_| ParseError::Malformed {
            line: line_no,
            message: format!("expected {what}, got {tok:?}"),
        })
    }
}

fn parse_single_integer(line: &str) -> Option<usize> {
    let mut tokens = line.split_whitespace();
    let first = tokens.next()?;
    if tokens.next().is_some() {
        return None;
    }
    first.parse::<usize>().ok()
}

/// Parses skeleton text. `source_id` names the sequence in artifacts.
pub fn parse_skeleton_reader(text: &str, source_id: &str) -> Result<SkeletonSequence, ParseError> {
    let mut lines = Lines::new(text);
    let frame_count = lines.take_count("frame count")?;
    if frame_count == 0 {
        return Err(ParseError::Malformed {
            line: 1,
            message: "frame count must be at least 1".to_string(),
        });
    }

    let mut frames = Vec::with_capacity(frame_count);
    for frame_idx in 0..frame_count {
        let body_count = lines.take_count("body count")?;
        let mut bodies = Vec::with_capacity(body_count);
        for body_idx in 0..body_count {
            bodies.push(parse_body(&mut lines, frame_idx, body_idx)?);
        }
        frames.push(bodies);
    }

    // Anything left beyond trailing whitespace is a layout error.
    while let Some(rest) = lines.peek() {
        if !rest.trim().is_empty() {
            return Err(ParseError::Malformed {
                line: lines.line_no(),
                message: format!("trailing content after {frame_count} frames"),
            });
        }
        lines.next += 1;
    }

    Ok(SkeletonSequence { source_id: source_id.to_string(), frames })
}

fn parse_body(lines: &mut Lines, frame_idx: usize, body_idx: usize) -> Result<BodyFrame, ParseError> {
    let header_no = lines.line_no();
    let header = lines.take("body header")?;
    let body_id = header
        .split_whitespace()
        .next()
        .ok_or_else(|| ParseError::Malformed {
            line: header_no,
            message: "blank line, expected body header".to_string(),
        })?
        .to_string();

    // NTU-style files put the joint count on its own line; the internal
    // format goes straight to coordinates.
    if let Some(next) = lines.peek() {
        if let Some(count) = parse_single_integer(next) {
            let line = lines.line_no();
            lines.next += 1;
            if count != JOINT_COUNT {
                return Err(ParseError::BadJointCount { line, got: count });
            }
        }
    }

    let mut joints = [Vec3::ZERO; JOINT_COUNT];
    for (joint_idx, joint) in joints.iter_mut().enumerate() {
        let line_no = lines.line_no();
        let line = lines.take("joint coordinates")?;
        let mut tokens = line.split_whitespace();
        let mut coord = [0.0f64; 3];
        for (axis, slot) in coord.iter_mut().enumerate() {
            let tok = tokens.next().ok_or_else(|| ParseError::Malformed {
                line: line_no,
                message: format!(
                    "joint {joint_idx} of body {body_idx} has {axis} coordinate fields, expected at least 3"
                ),
            })?;
            *slot = tok.parse::<f64>().map_err(|_| ParseError::Malformed {
                line: line_no,
                message: format!("cannot parse coordinate {tok:?}"),
            })?;
        }
        *joint = Vec3::new(coord[0], coord[1], coord[2]);
        if !joint.is_finite() {
            return Err(ParseError::NonFinite {
                frame: frame_idx,
                body: body_idx,
                joint: joint_idx,
                line: line_no,
            });
        }
    }
    Ok(BodyFrame { body_id, joints })
}

/// Parses a skeleton file from disk; the file stem becomes the source id.
pub fn parse_skeleton_file(path: impl AsRef<Path>) -> Result<SkeletonSequence, ParseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_skeleton_reader(&text, &source_id)
}

/// Renders a sequence in the internal format. Coordinates are written with
/// the shortest representation that parses back to the identical `f64`, so
/// `parse(write(s)) == s`.
pub fn write_skeleton(seq: &SkeletonSequence) -> Result<String, std::io::Error> {
    let mut out = String::new();
    let _ = writeln!(out, "{}", seq.frame_count());
    for frame in &seq.frames {
        let _ = writeln!(out, "{}", frame.len());
        for body in frame {
            if body.body_id.split_whitespace().count() != 1 {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("body id {:?} is not a single token", body.body_id),
                ));
            }
            let _ = writeln!(out, "{}", body.body_id);
            for joint in &body.joints {
                let _ = writeln!(out, "{} {} {}", joint.x, joint.y, joint.z);
            }
        }
    }
    Ok(out)
}

pub fn write_skeleton_file(seq: &SkeletonSequence, path: impl AsRef<Path>) -> Result<(), std::io::Error> {
    std::fs::write(path, write_skeleton(seq)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_body_text(frames: usize, bodies: usize) -> String {
        let mut text = format!("{frames}\n");
        for _ in 0..frames {
            text.push_str(&format!("{bodies}\n"));
            for b in 0..bodies {
                text.push_str(&format!("{}\n", b + 1));
                for _ in 0..JOINT_COUNT {
                    text.push_str("0 0 0\n");
                }
            }
        }
        text
    }

    #[test]
    fn single_frame_single_body_all_zero() {
        let seq = parse_skeleton_reader(&zero_body_text(1, 1), "fixture").unwrap();
        assert_eq!(seq.frame_count(), 1);
        assert_eq!(seq.frames[0].len(), 1);
        assert!(seq.frames[0][0].joints.iter().all(|j| *j == Vec3::ZERO));
    }

    #[test]
    fn two_frames_two_bodies() {
        let seq = parse_skeleton_reader(&zero_body_text(2, 2), "fixture").unwrap();
        assert_eq!(seq.frame_count(), 2);
        for frame in &seq.frames {
            let ids: Vec<_> = frame.iter().map(|b| b.body_id.as_str()).collect();
            assert_eq!(ids, ["1", "2"]);
        }
    }

    #[test]
    fn ntu_style_extra_fields_and_joint_count_line() {
        let mut text = String::from("1\n1\n");
        text.push_str("72057594037931101 0 1 1 1 1 0 0.1 -0.2 2\n");
        text.push_str("25\n");
        for j in 0..JOINT_COUNT {
            text.push_str(&format!(
                "{} {} {} 100 200 300 400 0.1 0.2 0.3 0.4 2\n",
                j as f64 * 0.1,
                0.5,
                3.0
            ));
        }
        let seq = parse_skeleton_reader(&text, "ntu").unwrap();
        assert_eq!(seq.frames[0][0].body_id, "72057594037931101");
        assert!((seq.frames[0][0].joints[3].x - 0.3).abs() < 1e-15);
    }

    #[test]
    fn wrong_joint_count_is_a_located_error() {
        let text = "1\n1\nbody1\n24\n";
        match parse_skeleton_reader(text, "bad") {
            Err(ParseError::BadJointCount { line: 4, got: 24 }) => {}
            other => panic!("expected BadJointCount, got {other:?}"),
        }
    }

    #[test]
    fn truncated_frame_names_the_line() {
        let mut text = String::from("2\n1\nbody1\n");
        for _ in 0..JOINT_COUNT {
            text.push_str("0 0 0\n");
        }
        // Second frame header missing entirely.
        match parse_skeleton_reader(&text, "bad") {
            Err(ParseError::Malformed { line, .. }) => assert_eq!(line, 29),
            other => panic!("expected Malformed, got {other:?}"),
        }
    }

    #[test]
    fn nan_coordinate_is_a_data_error() {
        let mut text = String::from("1\n1\nbody1\n");
        text.push_str("0 NaN 0\n");
        for _ in 1..JOINT_COUNT {
            text.push_str("0 0 0\n");
        }
        match parse_skeleton_reader(&text, "bad") {
            Err(ParseError::NonFinite { frame: 0, body: 0, joint: 0, line: 4 }) => {}
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn zero_body_frames_are_retained() {
        let text = "2\n0\n0\n";
        let seq = parse_skeleton_reader(text, "empty").unwrap();
        assert_eq!(seq.frame_count(), 2);
        assert_eq!(seq.empty_frames(), vec![0, 1]);
    }

    #[test]
    fn write_then_parse_is_identity() {
        let mut seq = parse_skeleton_reader(&zero_body_text(2, 2), "fixture").unwrap();
        seq.frames[1][0].joints[5] = Vec3::new(0.123456789012345, -2.5e-7, 3.25);
        let text = write_skeleton(&seq).unwrap();
        let back = parse_skeleton_reader(&text, "fixture").unwrap();
        assert_eq!(seq, back);
    }
}
