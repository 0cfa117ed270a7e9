//! Golden-file regression for the texture images of the built-in fixtures.
//!
//! Each fixture expands into all thirteen image types at the default
//! configuration; the PNGs under `golden/` are the committed reference.
//! Set `GOLDEN_UPDATE=1` to rewrite them after an intentional encoding
//! change.

use std::path::PathBuf;

use skeltex_core::config::PipelineConfig;
use skeltex_core::encode::{generate_image_set, ImageSpec};
use skeltex_core::fixtures::FIXTURES;
use skeltex_core::preprocess::preprocess;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("golden")
}

#[test]
fn fixture_images_match_committed_goldens() {
    let update = std::env::var("GOLDEN_UPDATE").is_ok();
    let config = PipelineConfig::default();
    let dir = golden_dir();
    if update {
        std::fs::create_dir_all(&dir).unwrap();
    }

    let mut mismatches = Vec::new();
    for fixture in &FIXTURES {
        let normalized = preprocess(&fixture.sequence()).unwrap();
        let images = generate_image_set(
            &normalized,
            &config.selection,
            config.image.height,
            config.image.width,
            &ImageSpec::ALL,
        )
        .unwrap();
        assert_eq!(images.len(), 13);
        for (spec, image) in images {
            let path = dir.join(spec.filename(fixture.name));
            let bytes = image.to_png_bytes().unwrap();
            if update {
                std::fs::write(&path, &bytes).unwrap();
                continue;
            }
            match std::fs::read(&path) {
                Ok(expected) if expected == bytes => {}
                Ok(_) => mismatches.push(format!("{} differs", path.display())),
                Err(e) => mismatches.push(format!("{}: {e}", path.display())),
            }
        }
    }
    assert!(
        mismatches.is_empty(),
        "golden mismatches (rerun with GOLDEN_UPDATE=1 after intentional changes):\n{}",
        mismatches.join("\n")
    );
}

#[test]
fn golden_images_are_byte_stable_across_repeated_encoding() {
    let config = PipelineConfig::default();
    let fixture = &FIXTURES[0];
    let normalized = preprocess(&fixture.sequence()).unwrap();
    let once = generate_image_set(&normalized, &config.selection, 256, 256, &ImageSpec::ALL).unwrap();
    let twice = generate_image_set(&normalized, &config.selection, 256, 256, &ImageSpec::ALL).unwrap();
    for ((spec, a), (_, b)) in once.iter().zip(&twice) {
        assert_eq!(
            a.to_png_bytes().unwrap(),
            b.to_png_bytes().unwrap(),
            "unstable bytes for {spec}"
        );
    }
}
