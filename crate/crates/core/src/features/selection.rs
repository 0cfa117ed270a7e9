//! Joint and line selection strategies.
//!
//! Each strategy turns the configured joint tables into a deterministic,
//! canonically ordered list of feature combinations. Pair enumeration is
//! always "(a, b) with a < b" in (subject, index) order with the main subject
//! first; line lists are sorted the same way before use, so the row order of
//! every feature matrix is reproducible regardless of config file ordering.

use serde::{Deserialize, Serialize};

use super::{Family, JointRef, Line, Subject};
use crate::skeleton::{JOINT_COUNT, KINEMATIC_EDGES};

/// Strategy names used across plans, image labels and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// All within-subject joint pairs of both subjects.
    Js1,
    /// All pairs over a 12-joints-per-subject subset (cross-subject included).
    Js2,
    /// All pairs over an 11-joints-per-subject subset (cross-subject included).
    Js3,
    /// A curated per-subject line table; joint-line rows use every
    /// non-endpoint joint of the same subject.
    Ls1,
    /// Lines over the JS3 joints of one subject; joint-line rows use joints
    /// within two kinematic steps of either endpoint.
    Ls2,
    /// Every combination over all 50 joints.
    Full,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Js1 => "JS1",
            Strategy::Js2 => "JS2",
            Strategy::Js3 => "JS3",
            Strategy::Ls1 => "LS1",
            Strategy::Ls2 => "LS2",
            Strategy::Full => "FULL",
        }
    }

    pub fn is_joint_strategy(self) -> bool {
        matches!(self, Strategy::Js1 | Strategy::Js2 | Strategy::Js3)
    }

    pub fn is_line_strategy(self) -> bool {
        matches!(self, Strategy::Ls1 | Strategy::Ls2)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "JS1" => Ok(Strategy::Js1),
            "JS2" => Ok(Strategy::Js2),
            "JS3" => Ok(Strategy::Js3),
            "LS1" => Ok(Strategy::Ls1),
            "LS2" => Ok(Strategy::Ls2),
            "FULL" => Ok(Strategy::Full),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("{family} cannot be built with strategy {strategy}")]
    IncompatibleStrategy { family: Family, strategy: Strategy },
    #[error("{message}")]
    BadTable { message: String },
}

/// Editable selection tables. Joint indices are 0-based positions in the
/// 25-joint order; the same per-subject table is applied to both subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// JS2 joints per subject; must contain exactly 12 entries.
    pub js2_joints: Vec<usize>,
    /// JS3 joints per subject; must contain exactly 11 entries.
    pub js3_joints: Vec<usize>,
    /// LS1 lines per subject; must contain exactly 39 distinct joint pairs.
    pub ls1_lines: Vec<(usize, usize)>,
    /// Kinematic adjacency used for the LS2 two-step neighborhoods.
    pub adjacency: Vec<(usize, usize)>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            // Spread subset anchored at the middle of the spine (index 1).
            js2_joints: vec![1, 3, 4, 6, 8, 10, 12, 14, 16, 18, 21, 23],
            // Spread subset anchored at the base of the spine (index 0),
            // every entry roughly two kinematic steps from the others.
            js3_joints: vec![0, 3, 5, 7, 9, 11, 13, 15, 17, 19, 20],
            ls1_lines: default_ls1_lines(),
            adjacency: KINEMATIC_EDGES.to_vec(),
        }
    }
}

/// The 24 kinematic segments plus 15 longer torso/limb chords: full limbs,
/// forearm/shin chords, the shoulder and hip lines, the spine chord, the
/// head-to-spine-base axis and the hand-to-hand / foot-to-foot / wrist
/// spans.
fn default_ls1_lines() -> Vec<(usize, usize)> {
    let mut lines: Vec<(usize, usize)> = KINEMATIC_EDGES.to_vec();
    lines.extend_from_slice(&[
        (4, 6),   // left shoulder - left wrist
        (8, 10),  // right shoulder - right wrist
        (12, 14), // left hip - left ankle
        (16, 18), // right hip - right ankle
        (5, 7),   // left elbow - left hand
        (9, 11),  // right elbow - right hand
        (13, 15), // left knee - left foot
        (17, 19), // right knee - right foot
        (4, 8),   // shoulder line
        (12, 16), // hip line
        (0, 3),   // base of spine - head
        (0, 20),  // spine chord
        (7, 11),  // left hand - right hand
        (15, 19), // left foot - right foot
        (6, 10),  // left wrist - right wrist
    ]);
    lines
}

impl SelectionConfig {
    /// Structural validation: indices in range, no duplicate table entries,
    /// no degenerate lines. Count constraints are checked per strategy when
    /// plans are built, so partially filled configs can still be inspected.
    pub fn validate(&self) -> Result<(), PlanError> {
        for (name, list) in [("js2_joints", &self.js2_joints), ("js3_joints", &self.js3_joints)] {
            let mut seen = [false; JOINT_COUNT];
            for &j in list {
                if j >= JOINT_COUNT {
                    return Err(PlanError::BadTable {
                        message: format!("{name}: joint index {j} out of range 0..{JOINT_COUNT}"),
                    });
                }
                if seen[j] {
                    return Err(PlanError::BadTable {
                        message: format!("{name}: duplicate joint index {j}"),
                    });
                }
                seen[j] = true;
            }
        }
        for (name, list) in [("ls1_lines", &self.ls1_lines), ("adjacency", &self.adjacency)] {
            let mut normalized: Vec<(usize, usize)> = Vec::with_capacity(list.len());
            for &(a, b) in list {
                if a >= JOINT_COUNT || b >= JOINT_COUNT {
                    return Err(PlanError::BadTable {
                        message: format!("{name}: joint index out of range in ({a}, {b})"),
                    });
                }
                if a == b {
                    return Err(PlanError::BadTable {
                        message: format!("{name}: degenerate line ({a}, {b})"),
                    });
                }
                let pair = (a.min(b), a.max(b));
                if normalized.contains(&pair) {
                    return Err(PlanError::BadTable {
                        message: format!("{name}: duplicate line ({a}, {b})"),
                    });
                }
                normalized.push(pair);
            }
        }
        Ok(())
    }

    /// Pairwise hop distances over the configured adjacency; unreachable
    /// pairs get `usize::MAX`.
    pub fn graph_distances(&self) -> [[usize; JOINT_COUNT]; JOINT_COUNT] {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); JOINT_COUNT];
        for &(a, b) in &self.adjacency {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut dist = [[usize::MAX; JOINT_COUNT]; JOINT_COUNT];
        for start in 0..JOINT_COUNT {
            dist[start][start] = 0;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &u in &adj[v] {
                    if dist[start][u] == usize::MAX {
                        dist[start][u] = dist[start][v] + 1;
                        queue.push_back(u);
                    }
                }
            }
        }
        dist
    }
}

fn choose2(n: usize) -> usize {
    n * (n.saturating_sub(1)) / 2
}

/// Sorted per-subject joint list for a subset strategy, with the count
/// constraint that pins the published pair dimension.
fn subset_joints(
    strategy: Strategy,
    config: &SelectionConfig,
) -> Result<Vec<usize>, PlanError> {
    let (list, required, expected_pairs) = match strategy {
        Strategy::Js2 => (&config.js2_joints, 12usize, 276usize),
        Strategy::Js3 => (&config.js3_joints, 11usize, 231usize),
        _ => unreachable!("subset_joints only serves JS2/JS3"),
    };
    if list.len() != required {
        let actual_pairs = choose2(2 * list.len());
        return Err(PlanError::BadTable {
            message: format!(
                "{} joint table has {} joints per subject giving C({},2) = {} pairs, \
                 expected {} ({} joints per subject)",
                strategy.name(),
                list.len(),
                2 * list.len(),
                actual_pairs,
                expected_pairs,
                required
            ),
        });
    }
    let mut sorted = list.clone();
    sorted.sort_unstable();
    Ok(sorted)
}

/// Sorted, canonically ordered LS1 line table for one subject.
fn ls1_lines(config: &SelectionConfig, subject: Subject) -> Result<Vec<Line>, PlanError> {
    if config.ls1_lines.len() != 39 {
        return Err(PlanError::BadTable {
            message: format!(
                "LS1 line table has {} lines giving {}x23 = {} joint-line rows, \
                 expected 897 (39 lines)",
                config.ls1_lines.len(),
                config.ls1_lines.len(),
                config.ls1_lines.len() * (JOINT_COUNT - 2)
            ),
        });
    }
    let mut lines: Vec<Line> = config
        .ls1_lines
        .iter()
        .map(|&(a, b)| Line::new(JointRef::new(subject, a), JointRef::new(subject, b)))
        .collect();
    lines.sort();
    Ok(lines)
}

/// LS2 lines: all pairs of the JS3 joints of one subject.
fn ls2_lines(config: &SelectionConfig, subject: Subject) -> Result<Vec<Line>, PlanError> {
    let joints = subset_joints(Strategy::Js3, config)?;
    let refs: Vec<JointRef> = joints.iter().map(|&j| JointRef::new(subject, j)).collect();
    let mut lines = Vec::with_capacity(choose2(refs.len()));
    for i in 0..refs.len() {
        for j in (i + 1)..refs.len() {
            lines.push(Line::new(refs[i], refs[j]));
        }
    }
    Ok(lines)
}

/// All (a, b) pairs with a < b over an already sorted joint list.
fn pairs_over(refs: &[JointRef]) -> Vec<(JointRef, JointRef)> {
    let mut out = Vec::with_capacity(choose2(refs.len()));
    for i in 0..refs.len() {
        for j in (i + 1)..refs.len() {
            out.push((refs[i], refs[j]));
        }
    }
    out
}

fn all_joints(subject: Subject) -> Vec<JointRef> {
    (0..JOINT_COUNT).map(|j| JointRef::new(subject, j)).collect()
}

fn both_subject_joints(per_subject: &[usize]) -> Vec<JointRef> {
    let mut refs: Vec<JointRef> =
        per_subject.iter().map(|&j| JointRef::new(Subject::Main, j)).collect();
    refs.extend(per_subject.iter().map(|&j| JointRef::new(Subject::Auxiliary, j)));
    refs
}

/// Joint pairs for the joint strategies and FULL.
pub(super) fn joint_pairs(
    strategy: Strategy,
    config: &SelectionConfig,
) -> Result<Vec<(JointRef, JointRef)>, PlanError> {
    match strategy {
        Strategy::Js1 => {
            let mut pairs = pairs_over(&all_joints(Subject::Main));
            pairs.extend(pairs_over(&all_joints(Subject::Auxiliary)));
            Ok(pairs)
        }
        Strategy::Js2 | Strategy::Js3 => {
            let joints = subset_joints(strategy, config)?;
            Ok(pairs_over(&both_subject_joints(&joints)))
        }
        Strategy::Full => {
            let mut refs = all_joints(Subject::Main);
            refs.extend(all_joints(Subject::Auxiliary));
            Ok(pairs_over(&refs))
        }
        _ => unreachable!("joint_pairs only serves joint strategies"),
    }
}

/// Line list for the line strategies and FULL, instantiated on one subject
/// (FULL spans both subjects regardless).
pub(super) fn line_list(
    strategy: Strategy,
    subject: Subject,
    config: &SelectionConfig,
) -> Result<Vec<Line>, PlanError> {
    match strategy {
        Strategy::Ls1 => ls1_lines(config, subject),
        Strategy::Ls2 => ls2_lines(config, subject),
        Strategy::Full => {
            let mut refs = all_joints(Subject::Main);
            refs.extend(all_joints(Subject::Auxiliary));
            Ok(pairs_over(&refs).into_iter().map(|(a, b)| Line::new(a, b)).collect())
        }
        _ => unreachable!("line_list only serves line strategies"),
    }
}

/// Joint-line combinations for JLd.
pub(super) fn joint_line_entries(
    strategy: Strategy,
    subject: Subject,
    config: &SelectionConfig,
) -> Result<Vec<(JointRef, Line)>, PlanError> {
    let lines = line_list(strategy, subject, config)?;
    let mut entries = Vec::new();
    match strategy {
        // Every non-endpoint joint of the line's own subject.
        Strategy::Ls1 => {
            for line in lines {
                for j in 0..JOINT_COUNT {
                    let joint = JointRef::new(subject, j);
                    if joint != line.a && joint != line.b {
                        entries.push((joint, line));
                    }
                }
            }
        }
        // Joints within two kinematic steps of either endpoint.
        Strategy::Ls2 => {
            let dist = config.graph_distances();
            for line in lines {
                for j in 0..JOINT_COUNT {
                    let joint = JointRef::new(subject, j);
                    if joint == line.a || joint == line.b {
                        continue;
                    }
                    let da = dist[j][line.a.index];
                    let db = dist[j][line.b.index];
                    if da <= 2 || db <= 2 {
                        entries.push((joint, line));
                    }
                }
            }
        }
        // Every remaining joint of either subject.
        Strategy::Full => {
            let mut refs = all_joints(Subject::Main);
            refs.extend(all_joints(Subject::Auxiliary));
            for line in lines {
                for &joint in &refs {
                    if joint != line.a && joint != line.b {
                        entries.push((joint, line));
                    }
                }
            }
        }
        _ => unreachable!("joint_line_entries only serves line strategies"),
    }
    Ok(entries)
}

/// Line pairs for LLa.
pub(super) fn line_pair_entries(
    strategy: Strategy,
    subject: Subject,
    config: &SelectionConfig,
) -> Result<Vec<(Line, Line)>, PlanError> {
    let lines = line_list(strategy, subject, config)?;
    let mut out = Vec::with_capacity(choose2(lines.len()));
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            out.push((lines[i], lines[j]));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_tables_validate() {
        let config = SelectionConfig::default();
        config.validate().unwrap();
        assert_eq!(config.js2_joints.len(), 12);
        assert_eq!(config.js3_joints.len(), 11);
        assert_eq!(config.ls1_lines.len(), 39);
    }

    #[test]
    fn ls1_lines_are_distinct_after_normalization() {
        let config = SelectionConfig::default();
        let mut normalized: Vec<(usize, usize)> = config
            .ls1_lines
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        normalized.sort_unstable();
        normalized.dedup();
        assert_eq!(normalized.len(), 39);
    }

    #[test]
    fn short_js3_table_reports_both_counts() {
        let config = SelectionConfig { js3_joints: vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 9], ..Default::default() };
        let err = subset_joints(Strategy::Js3, &config).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("expected 231"), "message: {message}");
        assert!(message.contains("190"), "message: {message}");
    }

    #[test]
    fn out_of_range_joint_is_rejected() {
        let config = SelectionConfig { js2_joints: vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 25], ..Default::default() };
        assert!(config.validate().is_err());
    }

    #[test]
    fn graph_distances_match_hand_counts() {
        let config = SelectionConfig::default();
        let dist = config.graph_distances();
        assert_eq!(dist[0][1], 1); // base of spine - middle of spine
        assert_eq!(dist[0][20], 2); // base of spine - shoulder spine
        assert_eq!(dist[3][20], 2); // head - shoulder spine via neck
        assert_eq!(dist[7][4], 3); // left hand - left shoulder
    }
}
