//! Nearest-centroid classifier over downsampled texture images.
//!
//! This is the desk-scale stand-in for a trained CNN: images are bilinearly
//! downsampled to 32x32, flattened to a 3072-dimensional vector, and scored
//! against per-class mean vectors with a Gaussian similarity
//! `exp(-d^2 / tau)`. The Gaussian keeps every score strictly positive, so
//! multiplicative fusion can never annihilate a class outright, and the
//! prediction is invariant to the choice of `tau`.

use std::io::{BufRead, Write};

use crate::encode::{bilinear_resize, Grid, TextureImage};

/// Downsampled image side length.
pub const FEATURE_SIDE: usize = 32;

/// Flattened feature dimension (RGB interleaved).
pub const FEATURE_DIM: usize = FEATURE_SIDE * FEATURE_SIDE * 3;

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("class {0} has no training samples")]
    EmptyClass(usize),
    #[error("no training samples at all")]
    NoSamples,
    #[error("vector has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-class mean vectors plus the image label the model was trained for.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidModel {
    pub image_label: String,
    pub centroids: Vec<Vec<f64>>,
    /// Squared-distance scale for the Gaussian similarity: the mean squared
    /// pairwise centroid distance.
    pub tau: f64,
}

impl CentroidModel {
    pub fn class_count(&self) -> usize {
        self.centroids.len()
    }

    pub fn dimension(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }
}

/// Downsamples to 32x32 and flattens the RGB channels into a unit-interval
/// vector, channel-interleaved in row-major pixel order.
pub fn featurize(img: &TextureImage) -> Vec<f64> {
    let mut channels = Vec::with_capacity(3);
    for channel in 0..3 {
        let grid = Grid {
            rows: img.height(),
            cols: img.width(),
            data: (0..img.height() * img.width())
                .map(|i| img.channel_value(i / img.width(), i % img.width(), channel))
                .collect(),
        };
        channels.push(bilinear_resize(&grid, FEATURE_SIDE, FEATURE_SIDE));
    }
    let mut out = Vec::with_capacity(FEATURE_DIM);
    for i in 0..FEATURE_SIDE * FEATURE_SIDE {
        for grid in &channels {
            out.push(grid.data[i]);
        }
    }
    out
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Trains per-class mean vectors. `samples` holds (vector, class) pairs;
/// classes are 0-based and every class in `0..=max` must appear.
pub fn train(samples: &[(Vec<f64>, usize)], image_label: &str) -> Result<CentroidModel, BaselineError> {
    let class_count = samples
        .iter()
        .map(|(_, c)| c + 1)
        .max()
        .ok_or(BaselineError::NoSamples)?;
    let dim = samples[0].0.len();
    for (v, _) in samples {
        if v.len() != dim {
            return Err(BaselineError::DimensionMismatch { expected: dim, got: v.len() });
        }
    }

    let mut sums = vec![vec![0.0f64; dim]; class_count];
    let mut counts = vec![0usize; class_count];
    for (v, class) in samples {
        counts[*class] += 1;
        for (acc, x) in sums[*class].iter_mut().zip(v) {
            *acc += x;
        }
    }
    for (class, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(BaselineError::EmptyClass(class));
        }
        for acc in sums[class].iter_mut() {
            *acc /= count as f64;
        }
    }

    let tau = mean_pairwise_squared_distance(&sums).max(1e-12);
    Ok(CentroidModel { image_label: image_label.to_string(), centroids: sums, tau })
}

fn mean_pairwise_squared_distance(centroids: &[Vec<f64>]) -> f64 {
    let n = centroids.len();
    if n < 2 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            total += squared_distance(&centroids[i], &centroids[j]);
            pairs += 1;
        }
    }
    total / pairs as f64
}

/// Gaussian similarity scores against every centroid. Exponents are floored
/// so scores stay strictly positive even for far-away inputs.
pub fn score(
    model: &CentroidModel,
    v: &[f64],
) -> Result<crate::fusion::ScoreVector, BaselineError> {
    if v.len() != model.dimension() {
        return Err(BaselineError::DimensionMismatch { expected: model.dimension(), got: v.len() });
    }
    let scores = model
        .centroids
        .iter()
        .map(|c| (-squared_distance(v, c) / model.tau).max(-700.0).exp())
        .collect();
    Ok(crate::fusion::ScoreVector::new(model.image_label.clone(), scores))
}

/// Writes the model as a small self-describing text file: a magic line,
/// label / classes / dim headers, then one whitespace-separated centroid
/// per line prefixed by its class index.
pub fn write_model(model: &CentroidModel, out: &mut impl Write) -> Result<(), BaselineError> {
    writeln!(out, "skeltex-centroid v1")?;
    writeln!(out, "label {}", model.image_label)?;
    writeln!(out, "classes {}", model.class_count())?;
    writeln!(out, "dim {}", model.dimension())?;
    writeln!(out, "tau {}", model.tau)?;
    for (class, centroid) in model.centroids.iter().enumerate() {
        write!(out, "{class}")?;
        for x in centroid {
            write!(out, " {x}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_model(reader: impl BufRead) -> Result<CentroidModel, BaselineError> {
    let mut lines = reader.lines().enumerate();
    let mut next_line = |what: &str| -> Result<(usize, String), BaselineError> {
        match lines.next() {
            Some((idx, Ok(line))) => Ok((idx + 1, line)),
            Some((idx, Err(e))) => Err(BaselineError::ModelFormat {
                line: idx + 1,
                message: format!("read error: {e}"),
            }),
            None => Err(BaselineError::ModelFormat {
                line: 0,
                message: format!("unexpected end of file, expected {what}"),
            }),
        }
    };

    let (line, magic) = next_line("magic")?;
    if magic.trim() != "skeltex-centroid v1" {
        return Err(BaselineError::ModelFormat { line, message: format!("bad magic {magic:?}") });
    }
    let mut header = |prefix: &str| -> Result<String, BaselineError> {
        let (line, text) = next_line(prefix)?;
        text.strip_prefix(prefix)
            .map(|rest| rest.trim().to_string())
            .ok_or_else(|| BaselineError::ModelFormat {
                line,
                message: format!("expected {prefix:?} header, got {text:?}"),
            })
    };
    let image_label = header("label ")?;
    let classes: usize = header("classes ")?
        .parse()
        .map_err(|e| BaselineError::ModelFormat { line: 3, message: format!("bad classes: {e}") })?;
    let dim: usize = header("dim ")?
        .parse()
        .map_err(|e| BaselineError::ModelFormat { line: 4, message: format!("bad dim: {e}") })?;
    let tau: f64 = header("tau ")?
        .parse()
        .map_err(|e| BaselineError::ModelFormat { line: 5, message: format!("bad tau: {e}") })?;

    let mut centroids = vec![Vec::new(); classes];
    for expected_class in 0..classes {
        let (line, text) = next_line("centroid row")?;
        let mut tokens = text.split_whitespace();
        let class: usize = tokens
            .next()
            .ok_or_else(|| BaselineError::ModelFormat { line, message: "blank row".into() })?
            .parse()
            .map_err(|e| BaselineError::ModelFormat { line, message: format!("bad class: {e}") })?;
        if class != expected_class {
            return Err(BaselineError::ModelFormat {
                line,
                message: format!("expected class {expected_class}, got {class}"),
            });
        }
        let values: Vec<f64> = tokens
            .map(|t| {
                t.parse::<f64>().map_err(|e| BaselineError::ModelFormat {
                    line,
                    message: format!("bad value {t:?}: {e}"),
                })
            })
            .collect::<Result<_, _>>()?;
        if values.len() != dim {
            return Err(BaselineError::ModelFormat {
                line,
                message: format!("centroid has {} values, expected {dim}", values.len()),
            });
        }
        centroids[class] = values;
    }
    Ok(CentroidModel { image_label, centroids, tau })
}
