//! Batch pipeline: inputs to texture images plus a run manifest.
//!
//! Each input sequence is parsed (or synthesized), normalized and expanded
//! into the configured image set; files are written atomically and the
//! manifest records the config hash and a SHA-256 per artifact. Sequences
//! are independent, so they run in parallel up to the requested job count;
//! outputs are sorted before the manifest is written, which keeps reruns
//! byte-identical.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::Digest;

use crate::config::PipelineConfig;
use crate::encode::{generate_image_set, write_bytes_atomic, EncodeError};
use crate::preprocess::{preprocess, PreprocessError};
use crate::skeleton::{
    parse_skeleton_file, synthesize_sequence, ParseError, SkeletonSequence, SynthesisError,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

/// One pipeline input: a skeleton file on disk or a synthetic sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSpec {
    File(PathBuf),
    Synthetic { class: u32, frames: usize, seed: u64 },
}

impl InputSpec {
    /// Parses a CLI input argument. `synth:<class>:<frames>` generates a
    /// sequence with the given base seed; anything else is a file path.
    pub fn parse(arg: &str, seed: u64) -> Result<InputSpec, String> {
        match arg.strip_prefix("synth:") {
            None => Ok(InputSpec::File(PathBuf::from(arg))),
            Some(rest) => {
                let mut parts = rest.split(':');
                let class = parts
                    .next()
                    .ok_or("synth spec needs a class id")?
                    .parse::<u32>()
                    .map_err(|e| format!("bad class id: {e}"))?;
                let frames = parts
                    .next()
                    .ok_or("synth spec needs a frame count, e.g. synth:0:40")?
                    .parse::<usize>()
                    .map_err(|e| format!("bad frame count: {e}"))?;
                if let Some(extra) = parts.next() {
                    return Err(format!("unexpected trailing synth field {extra:?}"));
                }
                Ok(InputSpec::Synthetic { class, frames, seed })
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            InputSpec::File(path) => path.display().to_string(),
            InputSpec::Synthetic { class, frames, seed } => {
                format!("synth:{class}:{frames} (seed {seed})")
            }
        }
    }

    fn load(&self, config: &PipelineConfig) -> Result<SkeletonSequence, PipelineError> {
        match self {
            InputSpec::File(path) => Ok(parse_skeleton_file(path)?),
            InputSpec::Synthetic { class, frames, seed } => {
                Ok(synthesize_sequence(*class, *seed, *frames, &config.synthesis)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub input: String,
    pub error: String,
}

/// Machine-readable record of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<OutputRecord>,
    pub failures: Vec<FailureRecord>,
}

impl RunManifest {
    pub fn checksum_of(&self, path: &str) -> Option<&str> {
        self.outputs.iter().find(|o| o.path == path).map(|o| o.sha256.as_str())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", sha2::Sha256::digest(bytes))
}

fn process_one(
    input: &InputSpec,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<Vec<OutputRecord>, PipelineError> {
    let seq = input.load(config)?;
    let normalized = preprocess(&seq)?;
    let images = generate_image_set(
        &normalized,
        &config.selection,
        config.image.height,
        config.image.width,
        &config.labels,
    )?;
    let mut records = Vec::with_capacity(images.len());
    for (spec, image) in images {
        let filename = spec.filename(&normalized.source_id);
        let bytes = image.to_png_bytes()?;
        write_bytes_atomic(&out_dir.join(&filename), &bytes)?;
        records.push(OutputRecord { path: filename, sha256: sha256_hex(&bytes) });
    }
    Ok(records)
}

/// Runs the pipeline over all inputs with up to `jobs` sequences in flight,
/// writes `manifest.json` into `out_dir`, and returns the manifest. Failed
/// sequences are recorded and do not abort the rest of the batch.
pub fn run_pipeline(
    config: &PipelineConfig,
    inputs: &[InputSpec],
    out_dir: &Path,
    jobs: usize,
) -> Result<RunManifest, PipelineError> {
    std::fs::create_dir_all(out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool construction");
    let results: Vec<(String, Result<Vec<OutputRecord>, PipelineError>)> = pool.install(|| {
        inputs
            .par_iter()
            .map(|input| (input.describe(), process_one(input, config, out_dir)))
            .collect()
    });

    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    for (input, result) in results {
        match result {
            Ok(records) => outputs.extend(records),
            Err(error) => failures.push(FailureRecord { input, error: error.to_string() }),
        }
    }
    outputs.sort_by(|a, b| a.path.cmp(&b.path));
    failures.sort_by(|a, b| a.input.cmp(&b.input));

    let manifest = RunManifest {
        config_hash: config.config_hash(),
        inputs: inputs.iter().map(InputSpec::describe).collect(),
        outputs,
        failures,
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    write_bytes_atomic(&out_dir.join("manifest.json"), &json)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_input_spec_parses() {
        assert_eq!(
            InputSpec::parse("synth:2:30", 9).unwrap(),
            InputSpec::Synthetic { class: 2, frames: 30, seed: 9 }
        );
        assert_eq!(
            InputSpec::parse("data/a.skeleton", 9).unwrap(),
            InputSpec::File(PathBuf::from("data/a.skeleton"))
        );
        assert!(InputSpec::parse("synth:x:30", 0).is_err());
        assert!(InputSpec::parse("synth:1", 0).is_err());
        assert!(InputSpec::parse("synth:1:2:3", 0).is_err());
    }

    #[test]
    fn empty_input_list_yields_an_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let config = PipelineConfig::default();
        let manifest = run_pipeline(&config, &[], dir.path(), 2).unwrap();
        assert!(manifest.outputs.is_empty());
        assert!(manifest.failures.is_empty());
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn one_synthetic_input_emits_the_enabled_labels_plus_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = PipelineConfig::default();
        config.image = crate::config::ImageSize { height: 32, width: 32 };
        let inputs = [InputSpec::Synthetic { class: 0, frames: 8, seed: 5 }];
        let manifest = run_pipeline(&config, &inputs, dir.path(), 2).unwrap();
        assert_eq!(manifest.outputs.len(), 13);
        assert!(manifest.failures.is_empty());
        for record in &manifest.outputs {
            let path = dir.path().join(&record.path);
            let bytes = std::fs::read(&path).unwrap();
            assert_eq!(sha256_hex(&bytes), record.sha256);
        }
    }

    #[test]
    fn reruns_have_identical_checksums() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut config = PipelineConfig::default();
        config.image = crate::config::ImageSize { height: 24, width: 24 };
        let inputs = [
            InputSpec::Synthetic { class: 1, frames: 6, seed: 1 },
            InputSpec::Synthetic { class: 4, frames: 7, seed: 2 },
        ];
        let a = run_pipeline(&config, &inputs, dir_a.path(), 4).unwrap();
        let b = run_pipeline(&config, &inputs, dir_b.path(), 1).unwrap();
        assert_eq!(a.outputs, b.outputs);
        assert_eq!(a.config_hash, b.config_hash);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let config = PipelineConfig::default();
        let inputs = [
            InputSpec::File(PathBuf::from("/nonexistent/file.skeleton")),
            InputSpec::Synthetic { class: 99, frames: 8, seed: 0 },
        ];
        let manifest = run_pipeline(&config, &inputs, dir.path(), 2).unwrap();
        assert!(manifest.outputs.is_empty());
        assert_eq!(manifest.failures.len(), 2);
    }
}
