//! Multiplicative late fusion of per-model class scores.
//!
//! Each classifier contributes one non-negative score per class; the fused
//! score is the element-wise product across models and the prediction is
//! the argmax. Products are taken in a fixed order (models sorted by label)
//! so the result does not depend on how the caller assembled the list, even
//! though floating-point multiplication is not associative.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

#[derive(Debug, thiserror::Error)]
pub enum FusionError {
    #[error("cannot fuse an empty score list")]
    Empty,
    #[error("score length mismatch: {label_a:?} has {len_a} classes, {label_b:?} has {len_b}")]
    LengthMismatch { label_a: String, len_a: usize, label_b: String, len_b: usize },
    #[error("model {label:?} has a negative or non-finite score {value} for class {class}")]
    BadScore { label: String, class: usize, value: f64 },
    #[error("score csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-class scores emitted by one model for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    /// Image-type label of the model that produced the scores.
    pub model_label: String,
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn new(model_label: impl Into<String>, scores: Vec<f64>) -> Self {
        Self { model_label: model_label.into(), scores }
    }

    pub fn class_count(&self) -> usize {
        self.scores.len()
    }

    fn validate(&self) -> Result<(), FusionError> {
        if self.scores.is_empty() {
            return Err(FusionError::Empty);
        }
        for (class, &value) in self.scores.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(FusionError::BadScore {
                    label: self.model_label.clone(),
                    class,
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Element-wise product of the score vectors. Vectors are multiplied in
/// sorted model-label order, so any permutation of the input list yields
/// bit-identical results.
pub fn multiply_fuse(vectors: &[ScoreVector]) -> Result<Vec<f64>, FusionError> {
    let first = vectors.first().ok_or(FusionError::Empty)?;
    for v in vectors {
        v.validate()?;
        if v.class_count() != first.class_count() {
            return Err(FusionError::LengthMismatch {
                label_a: first.model_label.clone(),
                len_a: first.class_count(),
                label_b: v.model_label.clone(),
                len_b: v.class_count(),
            });
        }
    }
    let mut ordered: Vec<&ScoreVector> = vectors.iter().collect();
    ordered.sort_by(|a, b| a.model_label.cmp(&b.model_label));

    let mut fused = vec![1.0f64; first.class_count()];
    for v in ordered {
        for (acc, &s) in fused.iter_mut().zip(&v.scores) {
            *acc *= s;
        }
    }
    Ok(fused)
}

/// Index of the maximum score; ties go to the smallest index.
pub fn predict(fused: &[f64]) -> Result<usize, FusionError> {
    if fused.is_empty() {
        return Err(FusionError::Empty);
    }
    let mut best = 0usize;
    for (i, &v) in fused.iter().enumerate().skip(1) {
        if v > fused[best] {
            best = i;
        }
    }
    Ok(best)
}

/// One row of a score file: a model's scores for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub model_label: String,
    pub sample_id: String,
    pub scores: Vec<f64>,
}

/// Reads a score CSV with header `model_label,sample_id,score_0..score_{C-1}`.
pub fn read_score_csv(reader: impl BufRead) -> Result<Vec<ScoreRecord>, FusionError> {
    let mut records = Vec::new();
    let mut class_count: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if idx == 0 {
            if !line.starts_with("model_label,sample_id,score_0") {
                return Err(FusionError::Csv {
                    line: 1,
                    message: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(FusionError::Csv {
                line: line_no,
                message: format!("expected at least 3 fields, got {}", fields.len()),
            });
        }
        let scores: Vec<f64> = fields[2..]
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.trim().parse::<f64>().map_err(|e| FusionError::Csv {
                    line: line_no,
                    message: format!("bad score_{i} {f:?}: {e}"),
                })
            })
            .collect::<Result<_, _>>()?;
        match class_count {
            None => class_count = Some(scores.len()),
            Some(c) if c != scores.len() => {
                return Err(FusionError::Csv {
                    line: line_no,
                    message: format!("row has {} scores, earlier rows had {c}", scores.len()),
                });
            }
            _ => {}
        }
        records.push(ScoreRecord {
            model_label: fields[0].trim().to_string(),
            sample_id: fields[1].trim().to_string(),
            scores,
        });
    }
    Ok(records)
}

/// Writes score records in the format [`read_score_csv`] accepts.
pub fn write_score_csv(records: &[ScoreRecord], out: &mut impl Write) -> Result<(), FusionError> {
    let class_count = records.first().map_or(0, |r| r.scores.len());
    write!(out, "model_label,sample_id")?;
    for c in 0..class_count {
        write!(out, ",score_{c}")?;
    }
    writeln!(out)?;
    for r in records {
        write!(out, "{},{}", r.model_label, r.sample_id)?;
        for s in &r.scores {
            write!(out, ",{s}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Per-sample fusion over a set of score records. Only models in
/// `fusion_set` participate; every listed model must have scored every
/// sample. Returns `(sample_id, fused scores)` sorted by sample id.
pub fn fuse_records(
    records: &[ScoreRecord],
    fusion_set: &[String],
) -> Result<Vec<(String, Vec<f64>)>, FusionError> {
    let mut by_sample: BTreeMap<&str, Vec<ScoreVector>> = BTreeMap::new();
    for r in records {
        if !fusion_set.iter().any(|l| l == &r.model_label) {
            continue;
        }
        by_sample
            .entry(r.sample_id.as_str())
            .or_default()
            .push(ScoreVector::new(r.model_label.clone(), r.scores.clone()));
    }
    let mut out = Vec::with_capacity(by_sample.len());
    for (sample, vectors) in by_sample {
        for label in fusion_set {
            if !vectors.iter().any(|v| &v.model_label == label) {
                return Err(FusionError::Csv {
                    line: 0,
                    message: format!("sample {sample:?} has no scores from model {label:?}"),
                });
            }
        }
        out.push((sample.to_string(), multiply_fuse(&vectors)?));
    }
    Ok(out)
}
