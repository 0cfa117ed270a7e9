//! The five spatial feature families and their extraction.
//!
//! Features are computed per frame between joints of the two normalized
//! subjects: joint-joint distance, vector and orientation, joint-line
//! distance, and line-line angle. A [`SelectionPlan`] fixes which
//! combinations become matrix rows and in which order; [`extract_features`]
//! evaluates the plan over all frames.
//!
//! Degenerate geometry (coincident joints, zero-length lines) is routine
//! because the auxiliary subject may be a shadow copy of the main one, so
//! the kernels absorb those cases instead of erroring: orientations of
//! coincident joints are the zero vector, joint-line distances against a
//! collapsed line are 0, and angles involving a zero orientation are 0.

mod selection;

pub use selection::{PlanError, SelectionConfig, Strategy};

use crate::math::Vec3;
use crate::preprocess::NormalizedSequence;
use crate::skeleton::JOINT_COUNT;
use serde::{Deserialize, Serialize};

/// Norm threshold below which geometry is treated as degenerate.
pub const DEGENERATE_EPS: f64 = 1e-9;

/// The five feature families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    JJd,
    JJv,
    JJo,
    JLd,
    LLa,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::JJd => "JJd",
            Family::JJv => "JJv",
            Family::JJo => "JJo",
            Family::JLd => "JLd",
            Family::LLa => "LLa",
        }
    }

    /// Scalar families produce one value per row and frame; vector families
    /// produce a 3-vector.
    pub fn is_scalar(self) -> bool {
        matches!(self, Family::JJd | Family::JLd | Family::LLa)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "JJD" => Ok(Family::JJd),
            "JJV" => Ok(Family::JJv),
            "JJO" => Ok(Family::JJo),
            "JLD" => Ok(Family::JLd),
            "LLA" => Ok(Family::LLa),
            other => Err(format!("unknown feature family {other:?}")),
        }
    }
}

/// Which of the two normalized subjects a joint belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subject {
    Main,
    Auxiliary,
}

impl Subject {
    pub fn name(self) -> &'static str {
        match self {
            Subject::Main => "main",
            Subject::Auxiliary => "auxiliary",
        }
    }
}

/// A joint of one subject. Ordering is (subject, index) with main first,
/// which defines the canonical enumeration order of all plans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JointRef {
    pub subject: Subject,
    pub index: usize,
}

impl JointRef {
    pub fn new(subject: Subject, index: usize) -> Self {
        debug_assert!(index < JOINT_COUNT);
        Self { subject, index }
    }
}

/// An unordered joint pair treated as an infinite line; stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Line {
    pub a: JointRef,
    pub b: JointRef,
}

impl Line {
    pub fn new(a: JointRef, b: JointRef) -> Self {
        assert!(a != b, "a line needs two distinct joints");
        if a < b {
            Self { a, b }
        } else {
            Self { a: b, b: a }
        }
    }
}

// Feature kernels. These are the per-frame primitives every matrix cell is
// built from.

/// Euclidean distance between two joints.
pub fn jj_distance(p_j: Vec3, p_k: Vec3) -> f64 {
    (p_j - p_k).norm()
}

/// Difference vector between two joints.
pub fn jj_vector(p_j: Vec3, p_k: Vec3) -> Vec3 {
    p_j - p_k
}

/// Unit vector from `p_k` towards `p_j`; the zero vector when the joints
/// coincide (within [`DEGENERATE_EPS`]).
pub fn jj_orientation(p_j: Vec3, p_k: Vec3) -> Vec3 {
    let v = jj_vector(p_j, p_k);
    let d = v.norm();
    if d < DEGENERATE_EPS {
        Vec3::ZERO
    } else {
        v / d
    }
}

/// Perpendicular distance from joint `p_j` to the infinite line through
/// `p_k` and `p_m`; 0 when the line collapses.
pub fn jl_distance(p_j: Vec3, p_k: Vec3, p_m: Vec3) -> f64 {
    let base = jj_distance(p_k, p_m);
    if base < DEGENERATE_EPS {
        return 0.0;
    }
    jj_vector(p_j, p_k).cross(jj_vector(p_j, p_m)).norm() / base
}

/// Angle in [0, pi] between two orientations; 0 when either is the zero
/// vector. Inputs are expected to be unit or zero vectors (the output of
/// [`jj_orientation`]); the dot product is clamped so accumulated rounding
/// can never push `acos` out of domain.
pub fn ll_angle(o1: Vec3, o2: Vec3) -> f64 {
    if o1.norm() < DEGENERATE_EPS || o2.norm() < DEGENERATE_EPS {
        return 0.0;
    }
    o1.dot(o2).clamp(-1.0, 1.0).acos()
}

/// The combinations a plan evaluates; the variant matches the family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanEntries {
    /// For JJd / JJv / JJo.
    Pairs(Vec<(JointRef, JointRef)>),
    /// For JLd: joint and line.
    JointLines(Vec<(JointRef, Line)>),
    /// For LLa: two lines.
    LinePairs(Vec<(Line, Line)>),
}

impl PlanEntries {
    pub fn len(&self) -> usize {
        match self {
            PlanEntries::Pairs(v) => v.len(),
            PlanEntries::JointLines(v) => v.len(),
            PlanEntries::LinePairs(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A deterministic, canonically ordered list of feature combinations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionPlan {
    pub family: Family,
    pub strategy: Strategy,
    pub entries: PlanEntries,
}

impl SelectionPlan {
    /// Number of matrix rows this plan produces.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Scalar dimension: rows for scalar families, 3x rows for vector ones.
    pub fn dimension(&self) -> usize {
        if self.family.is_scalar() {
            self.len()
        } else {
            3 * self.len()
        }
    }
}

/// Builds the plan for a family/strategy pair. Per-subject line strategies
/// are instantiated on the main subject; see
/// [`build_selection_plan_for`] to target the auxiliary subject.
pub fn build_selection_plan(
    family: Family,
    strategy: Strategy,
    config: &SelectionConfig,
) -> Result<SelectionPlan, PlanError> {
    build_selection_plan_for(family, strategy, Subject::Main, config)
}

/// Builds a plan, instantiating per-subject line strategies (LS1/LS2) on
/// the given subject. Joint strategies and FULL span a fixed joint set, so
/// `subject` is ignored for them.
pub fn build_selection_plan_for(
    family: Family,
    strategy: Strategy,
    subject: Subject,
    config: &SelectionConfig,
) -> Result<SelectionPlan, PlanError> {
    config.validate()?;
    let compatible = match family {
        Family::JJd | Family::JJv | Family::JJo => {
            strategy.is_joint_strategy() || strategy == Strategy::Full
        }
        Family::JLd | Family::LLa => strategy.is_line_strategy() || strategy == Strategy::Full,
    };
    if !compatible {
        return Err(PlanError::IncompatibleStrategy { family, strategy });
    }

    let entries = match family {
        Family::JJd | Family::JJv | Family::JJo => {
            PlanEntries::Pairs(selection::joint_pairs(strategy, config)?)
        }
        Family::JLd => {
            PlanEntries::JointLines(selection::joint_line_entries(strategy, subject, config)?)
        }
        Family::LLa => {
            PlanEntries::LinePairs(selection::line_pair_entries(strategy, subject, config)?)
        }
    };
    Ok(SelectionPlan { family, strategy, entries })
}

/// Subject attribution of a matrix row: a row is `Main`/`Auxiliary` when all
/// of its joints belong to that subject, `Cross` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSubject {
    Main,
    Auxiliary,
    Cross,
}

impl RowSubject {
    pub fn name(self) -> &'static str {
        match self {
            RowSubject::Main => "main",
            RowSubject::Auxiliary => "auxiliary",
            RowSubject::Cross => "cross",
        }
    }
}

fn row_subject_of(refs: &[JointRef]) -> RowSubject {
    let first = refs[0].subject;
    if refs.iter().all(|r| r.subject == first) {
        match first {
            Subject::Main => RowSubject::Main,
            Subject::Auxiliary => RowSubject::Auxiliary,
        }
    } else {
        RowSubject::Cross
    }
}

/// Cell storage for a feature matrix; row-major `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Scalar(Vec<f64>),
    Vector(Vec<Vec3>),
}

/// `rows x cols` feature values: one row per plan entry, one column per
/// frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub family: Family,
    pub strategy: Strategy,
    pub rows: usize,
    pub cols: usize,
    pub values: Values,
    pub row_subjects: Vec<RowSubject>,
}

impl FeatureMatrix {
    pub fn is_scalar(&self) -> bool {
        matches!(self.values, Values::Scalar(_))
    }

    pub fn scalar_at(&self, row: usize, col: usize) -> f64 {
        match &self.values {
            Values::Scalar(v) => v[row * self.cols + col],
            Values::Vector(_) => panic!("scalar_at on a vector matrix"),
        }
    }

    pub fn vector_at(&self, row: usize, col: usize) -> Vec3 {
        match &self.values {
            Values::Vector(v) => v[row * self.cols + col],
            Values::Scalar(_) => panic!("vector_at on a scalar matrix"),
        }
    }

    pub fn all_finite(&self) -> bool {
        match &self.values {
            Values::Scalar(v) => v.iter().all(|x| x.is_finite()),
            Values::Vector(v) => v.iter().all(|x| x.is_finite()),
        }
    }

    /// Vertically stacks matrices of the same family, strategy and frame
    /// count (used to combine per-subject plans into one image source).
    pub fn stacked(parts: &[&FeatureMatrix]) -> Option<FeatureMatrix> {
        let first = parts.first()?;
        if parts
            .iter()
            .any(|m| m.family != first.family || m.strategy != first.strategy || m.cols != first.cols)
        {
            return None;
        }
        let mut row_subjects = Vec::new();
        let values = if first.is_scalar() {
            let mut data = Vec::new();
            for m in parts {
                match &m.values {
                    Values::Scalar(v) => data.extend_from_slice(v),
                    Values::Vector(_) => return None,
                }
                row_subjects.extend_from_slice(&m.row_subjects);
            }
            Values::Scalar(data)
        } else {
            let mut data = Vec::new();
            for m in parts {
                match &m.values {
                    Values::Vector(v) => data.extend_from_slice(v),
                    Values::Scalar(_) => return None,
                }
                row_subjects.extend_from_slice(&m.row_subjects);
            }
            Values::Vector(data)
        };
        Some(FeatureMatrix {
            family: first.family,
            strategy: first.strategy,
            rows: row_subjects.len(),
            cols: first.cols,
            values,
            row_subjects,
        })
    }
}

fn joint_at(seq: &NormalizedSequence, joint: JointRef, frame: usize) -> Vec3 {
    seq.subject_poses(joint.subject)[frame][joint.index]
}

/// Evaluates a plan over every frame of a normalized sequence.
pub fn extract_features(seq: &NormalizedSequence, plan: &SelectionPlan) -> FeatureMatrix {
    let cols = seq.frame_count();
    let rows = plan.len();

    let (values, row_subjects) = match &plan.entries {
        PlanEntries::Pairs(pairs) => {
            let row_subjects: Vec<RowSubject> =
                pairs.iter().map(|(a, b)| row_subject_of(&[*a, *b])).collect();
            match plan.family {
                Family::JJd => {
                    let mut data = Vec::with_capacity(rows * cols);
                    for &(a, b) in pairs {
                        for t in 0..cols {
                            data.push(jj_distance(joint_at(seq, a, t), joint_at(seq, b, t)));
                        }
                    }
                    (Values::Scalar(data), row_subjects)
                }
                Family::JJv | Family::JJo => {
                    let kernel = if plan.family == Family::JJv { jj_vector } else { jj_orientation };
                    let mut data = Vec::with_capacity(rows * cols);
                    for &(a, b) in pairs {
                        for t in 0..cols {
                            data.push(kernel(joint_at(seq, a, t), joint_at(seq, b, t)));
                        }
                    }
                    (Values::Vector(data), row_subjects)
                }
                _ => unreachable!("pair entries imply a joint-joint family"),
            }
        }
        PlanEntries::JointLines(entries) => {
            let row_subjects: Vec<RowSubject> = entries
                .iter()
                .map(|(j, line)| row_subject_of(&[*j, line.a, line.b]))
                .collect();
            let mut data = Vec::with_capacity(rows * cols);
            for &(j, line) in entries {
                for t in 0..cols {
                    data.push(jl_distance(
                        joint_at(seq, j, t),
                        joint_at(seq, line.a, t),
                        joint_at(seq, line.b, t),
                    ));
                }
            }
            (Values::Scalar(data), row_subjects)
        }
        PlanEntries::LinePairs(entries) => {
            let row_subjects: Vec<RowSubject> = entries
                .iter()
                .map(|(l1, l2)| row_subject_of(&[l1.a, l1.b, l2.a, l2.b]))
                .collect();
            let mut data = Vec::with_capacity(rows * cols);
            for &(l1, l2) in entries {
                for t in 0..cols {
                    let o1 = jj_orientation(joint_at(seq, l1.a, t), joint_at(seq, l1.b, t));
                    let o2 = jj_orientation(joint_at(seq, l2.a, t), joint_at(seq, l2.b, t));
                    data.push(ll_angle(o1, o2));
                }
            }
            (Values::Scalar(data), row_subjects)
        }
    };

    FeatureMatrix {
        family: plan.family,
        strategy: plan.strategy,
        rows,
        cols,
        values,
        row_subjects,
    }
}

/// Writes a feature matrix as a headered CSV: row id, family, subject tag,
/// then `T` values per row (or `3T` as `x,y,z` triples for vector families).
pub fn write_feature_csv(m: &FeatureMatrix, out: &mut impl std::io::Write) -> std::io::Result<()> {
    write!(out, "row,family,subject")?;
    if m.is_scalar() {
        for t in 0..m.cols {
            write!(out, ",f{t}")?;
        }
    } else {
        for t in 0..m.cols {
            write!(out, ",x{t},y{t},z{t}")?;
        }
    }
    writeln!(out)?;
    for row in 0..m.rows {
        write!(out, "{row},{},{}", m.family, m.row_subjects[row].name())?;
        if m.is_scalar() {
            for t in 0..m.cols {
                write!(out, ",{}", m.scalar_at(row, t))?;
            }
        } else {
            for t in 0..m.cols {
                let v = m.vector_at(row, t);
                write!(out, ",{},{},{}", v.x, v.y, v.z)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}
