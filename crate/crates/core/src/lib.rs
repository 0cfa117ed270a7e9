//! Deterministic pipeline turning 3D skeleton action sequences into texture
//! color images, plus multiplicative score fusion and a small
//! nearest-centroid classifier for end-to-end validation.
//!
//! Stages, in pipeline order:
//!
//! 1. [`skeleton`] — sequence model, file parsing/writing, synthetic data.
//! 2. [`preprocess`] — main-subject selection, shadow subjects, spine
//!    normalization.
//! 3. [`features`] — the five spatial feature families over configurable
//!    joint/line selections.
//! 4. [`encode`] — feature matrices to 256x256 RGB texture images.
//! 5. [`baseline`] — nearest-centroid scoring over downsampled images.
//! 6. [`fusion`] — element-wise multiplicative score fusion.
//!
//! [`config`] holds the single pipeline configuration, [`pipeline`] the
//! batch runner with its manifest, and [`selftest`] the built-in check
//! suite.

pub mod baseline;
pub mod config;
pub mod encode;
pub mod features;
pub mod fixtures;
pub mod fusion;
pub mod math;
pub mod pipeline;
pub mod preprocess;
pub mod selftest;
pub mod skeleton;
