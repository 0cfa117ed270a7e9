//! Built-in verification suite.
//!
//! Runs the dimension-count checks, geometry oracles, invariance suites and
//! golden-image comparisons on synthetic data and reports one pass/fail
//! line per property. The geometry and fusion oracles are deliberately
//! written as independent formulas (projection distance, atan2 angles,
//! per-class folds) rather than calls back into the implementation they
//! check.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::PipelineConfig;
use crate::encode::{generate_image_set, jet_colorbar, ImageSpec};
use crate::features::{
    build_selection_plan, extract_features, jj_distance, jj_orientation, jj_vector, jl_distance,
    ll_angle, Family, Strategy, Values,
};
use crate::fixtures::FIXTURES;
use crate::fusion::{multiply_fuse, predict, ScoreVector};
use crate::math::{Mat3, Vec3};
use crate::preprocess::preprocess;
use crate::skeleton::{synthesize_sequence, SynthesisParams};

/// Outcome of one self-test property.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn pass(name: &'static str, detail: impl Into<String>) -> Self {
        Self { name, passed: true, detail: detail.into() }
    }

    fn fail(name: &'static str, detail: impl Into<String>) -> Self {
        Self { name, passed: false, detail: detail.into() }
    }
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Default golden directory: `$SKELTEX_GOLDEN_DIR` if set, otherwise
/// `crates/core/golden` relative to the working directory (the repository
/// layout).
pub fn default_golden_dir() -> Option<PathBuf> {
    if let Ok(dir) = std::env::var("SKELTEX_GOLDEN_DIR") {
        return Some(PathBuf::from(dir));
    }
    let repo_default = PathBuf::from("crates/core/golden");
    repo_default.is_dir().then_some(repo_default)
}

/// Runs every check. `seed` feeds the randomized oracles; the golden and
/// invariance checks use pinned seeds so their byte-exact expectations hold
/// for any caller.
pub fn run_selftest(config: &PipelineConfig, golden_dir: Option<&Path>, seed: u64) -> SelftestReport {
    let checks = vec![
        check_dimension_counts(config),
        check_ls2_dimension(config),
        check_geometry_oracles(seed),
        check_encoder_primitives(),
        check_rigid_invariance(),
        check_jjo_equivariance(),
        check_scale_covariance(seed),
        check_degenerate_robustness(config),
        check_fusion_product(seed),
        check_fusion_rescaling(seed),
        check_golden_images(golden_dir),
    ];
    SelftestReport { checks }
}

fn check_dimension_counts(config: &PipelineConfig) -> CheckResult {
    const NAME: &str = "dimension-counts";
    let expectations: [(Family, Strategy, usize); 10] = [
        (Family::JJd, Strategy::Js1, 600),
        (Family::JJd, Strategy::Js2, 276),
        (Family::JJd, Strategy::Js3, 231),
        (Family::JJd, Strategy::Full, 1225),
        (Family::JJv, Strategy::Full, 3675),
        (Family::JJo, Strategy::Full, 3675),
        (Family::JLd, Strategy::Full, 58800),
        (Family::LLa, Strategy::Full, 749700),
        (Family::JLd, Strategy::Ls1, 897),
        (Family::LLa, Strategy::Ls1, 741),
    ];
    for (family, strategy, expected) in expectations {
        match build_selection_plan(family, strategy, &config.selection) {
            Ok(plan) => {
                let got = plan.dimension();
                if got != expected {
                    return CheckResult::fail(
                        NAME,
                        format!("{family}-{strategy}: got {got}, expected {expected}"),
                    );
                }
            }
            Err(e) => {
                return CheckResult::fail(
                    NAME,
                    format!("{family}-{strategy}: expected {expected}, but {e}"),
                );
            }
        }
    }
    CheckResult::pass(NAME, "all published plan dimensions reproduced")
}

fn check_ls2_dimension(config: &PipelineConfig) -> CheckResult {
    const NAME: &str = "ls2-dimension";
    let first = build_selection_plan(Family::JLd, Strategy::Ls2, &config.selection);
    let second = build_selection_plan(Family::JLd, Strategy::Ls2, &config.selection);
    match (first, second) {
        (Ok(a), Ok(b)) => {
            if a.entries == b.entries {
                CheckResult::pass(
                    NAME,
                    format!(
                        "stable at {} rows per subject ({} stacked over both subjects)",
                        a.len(),
                        2 * a.len()
                    ),
                )
            } else {
                CheckResult::fail(NAME, "plan construction is not deterministic")
            }
        }
        (Err(e), _) | (_, Err(e)) => CheckResult::fail(NAME, e.to_string()),
    }
}

fn random_point(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
}

fn check_geometry_oracles(seed: u64) -> CheckResult {
    const NAME: &str = "geometry-oracles";
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6765_6f6d);
    for trial in 0..1000 {
        let (a, b) = (random_point(&mut rng), random_point(&mut rng));
        // Component-wise distance and vector oracles.
        let d_oracle =
            ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt();
        if (jj_distance(a, b) - d_oracle).abs() > 1e-12 {
            return CheckResult::fail(NAME, format!("distance mismatch on trial {trial}"));
        }
        let v = jj_vector(a, b);
        if (v.x - (a.x - b.x)).abs() > 1e-12
            || (v.y - (a.y - b.y)).abs() > 1e-12
            || (v.z - (a.z - b.z)).abs() > 1e-12
        {
            return CheckResult::fail(NAME, format!("vector mismatch on trial {trial}"));
        }
        if d_oracle > 1e-6 {
            let o = jj_orientation(a, b);
            if (o.norm() - 1.0).abs() > 1e-9 {
                return CheckResult::fail(NAME, format!("orientation norm off on trial {trial}"));
            }
        }

        // Projection oracle for the joint-line distance.
        let (j, k, m) = (random_point(&mut rng), random_point(&mut rng), random_point(&mut rng));
        if (k - m).norm() > 1e-6 {
            let u = (m - k) / (m - k).norm();
            let w = j - k;
            let perp = w - u * w.dot(u);
            if (jl_distance(j, k, m) - perp.norm()).abs() > 1e-9 {
                return CheckResult::fail(NAME, format!("joint-line mismatch on trial {trial}"));
            }
        }

        // atan2 oracle for the angle.
        let o1 = jj_orientation(random_point(&mut rng), random_point(&mut rng));
        let o2 = jj_orientation(random_point(&mut rng), random_point(&mut rng));
        if o1.norm() > 0.5 && o2.norm() > 0.5 {
            let oracle = o1.cross(o2).norm().atan2(o1.dot(o2));
            if (ll_angle(o1, o2) - oracle).abs() > 1e-9 {
                return CheckResult::fail(NAME, format!("angle mismatch on trial {trial}"));
            }
        }
    }
    CheckResult::pass(NAME, "1000 random trials within tolerance")
}

fn check_encoder_primitives() -> CheckResult {
    const NAME: &str = "encoder-primitives";
    let cases = [
        (0.0, [0.0, 0.0, 0.5]),
        (0.5, [0.5, 1.0, 0.5]),
        (1.0, [0.5, 0.0, 0.0]),
    ];
    for (u, expected) in cases {
        if jet_colorbar(u) != expected {
            return CheckResult::fail(NAME, format!("jet({u}) != {expected:?}"));
        }
    }
    let grid = crate::encode::Grid { rows: 2, cols: 2, data: vec![0.0, 1.0, 1.0, 0.0] };
    let out = crate::encode::bilinear_resize(&grid, 3, 3);
    if (out.get(1, 1) - 0.5).abs() > 1e-12 {
        return CheckResult::fail(NAME, "bilinear center of a 2x2 checkerboard is not 0.5");
    }
    CheckResult::pass(NAME, "jet endpoints and bilinear midpoint verified")
}

/// Scalar-encoded labels used for the byte-identity invariance checks.
const SCALAR_LABELS: [ImageSpec; 3] = [ImageSpec::JjdJs1, ImageSpec::JldLs1, ImageSpec::Com];

fn check_rigid_invariance() -> CheckResult {
    const NAME: &str = "rigid-invariance";
    let config = PipelineConfig::default();
    // Pinned seeds: this check asserts byte identity after quantization.
    let mut rng = ChaCha8Rng::seed_from_u64(0x7269_6769);
    for class in [0u32, 3] {
        let seq = match synthesize_sequence(class, 100 + u64::from(class), 16, &config.synthesis) {
            Ok(seq) => seq,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let base = match preprocess(&seq) {
            Ok(n) => n,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let base_images =
            match generate_image_set(&base, &config.selection, 64, 64, &SCALAR_LABELS) {
                Ok(images) => images,
                Err(e) => return CheckResult::fail(NAME, e.to_string()),
            };
        for _ in 0..2 {
            let rot = Mat3::random_rotation(&mut rng);
            let shift = random_point(&mut rng);
            let moved = seq.transformed(&rot, shift);
            let normalized = match preprocess(&moved) {
                Ok(n) => n,
                Err(e) => return CheckResult::fail(NAME, e.to_string()),
            };
            let images =
                match generate_image_set(&normalized, &config.selection, 64, 64, &SCALAR_LABELS) {
                    Ok(images) => images,
                    Err(e) => return CheckResult::fail(NAME, e.to_string()),
                };
            for ((spec, a), (_, b)) in base_images.iter().zip(&images) {
                if a != b {
                    return CheckResult::fail(
                        NAME,
                        format!("{spec} changed under a rigid motion (class {class})"),
                    );
                }
            }
        }
    }
    CheckResult::pass(NAME, "scalar encodings byte-identical under rigid motions")
}

fn check_jjo_equivariance() -> CheckResult {
    const NAME: &str = "jjo-equivariance";
    let config = PipelineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a6a_6f65);
    let seq = match synthesize_sequence(2, 55, 10, &config.synthesis) {
        Ok(seq) => seq,
        Err(e) => return CheckResult::fail(NAME, e.to_string()),
    };
    let plan = match build_selection_plan(Family::JJo, Strategy::Js3, &config.selection) {
        Ok(plan) => plan,
        Err(e) => return CheckResult::fail(NAME, e.to_string()),
    };
    let base = match preprocess(&seq) {
        Ok(n) => extract_features(&n, &plan),
        Err(e) => return CheckResult::fail(NAME, e.to_string()),
    };
    for _ in 0..3 {
        let rot = Mat3::random_rotation(&mut rng);
        let moved = seq.transformed(&rot, random_point(&mut rng));
        let rotated = match preprocess(&moved) {
            Ok(n) => extract_features(&n, &plan),
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        for row in 0..base.rows {
            for t in 0..base.cols {
                let expected = rot.apply(base.vector_at(row, t));
                let got = rotated.vector_at(row, t);
                if (expected - got).norm() > 1e-6 {
                    return CheckResult::fail(
                        NAME,
                        format!("row {row} frame {t} off by {}", (expected - got).norm()),
                    );
                }
            }
        }
    }
    CheckResult::pass(NAME, "orientation features rotate with the input (1e-6)")
}

fn check_scale_covariance(seed: u64) -> CheckResult {
    const NAME: &str = "scale-covariance";
    let config = PipelineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7363_616c);
    let seq = match synthesize_sequence(1, 77, 8, &config.synthesis) {
        Ok(seq) => seq,
        Err(e) => return CheckResult::fail(NAME, e.to_string()),
    };
    let base = match preprocess(&seq) {
        Ok(n) => n,
        Err(e) => return CheckResult::fail(NAME, e.to_string()),
    };
    let s: f64 = rng.gen_range(0.3..3.0);
    // Scale the extraction input directly; spine normalization would
    // otherwise cancel the scale before features see it.
    let mut scaled = base.clone();
    for grid in [&mut scaled.main, &mut scaled.auxiliary] {
        for pose in grid.iter_mut() {
            for joint in pose.iter_mut() {
                *joint = *joint * s;
            }
        }
    }
    for (family, strategy, factor) in [
        (Family::JJd, Strategy::Js3, s),
        (Family::JLd, Strategy::Ls1, s),
        (Family::LLa, Strategy::Ls1, 1.0),
    ] {
        let plan = match build_selection_plan(family, strategy, &config.selection) {
            Ok(plan) => plan,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let a = extract_features(&base, &plan);
        let b = extract_features(&scaled, &plan);
        let (Values::Scalar(va), Values::Scalar(vb)) = (&a.values, &b.values) else {
            return CheckResult::fail(NAME, "expected scalar families");
        };
        for (x, y) in va.iter().zip(vb) {
            if (x * factor - y).abs() > 1e-9 * factor.max(1.0) {
                return CheckResult::fail(NAME, format!("{family} not covariant: {x} vs {y}"));
            }
        }
    }
    // Orientations are scale-free.
    let plan = match build_selection_plan(Family::JJo, Strategy::Js3, &config.selection) {
        Ok(plan) => plan,
        Err(e) => return CheckResult::fail(NAME, e.to_string()),
    };
    let a = extract_features(&base, &plan);
    let b = extract_features(&scaled, &plan);
    for row in 0..a.rows {
        for t in 0..a.cols {
            if (a.vector_at(row, t) - b.vector_at(row, t)).norm() > 1e-9 {
                return CheckResult::fail(NAME, "JJo changed under uniform scaling");
            }
        }
    }
    CheckResult::pass(NAME, format!("scaling by {s:.3} behaves as expected"))
}

fn check_degenerate_robustness(config: &PipelineConfig) -> CheckResult {
    const NAME: &str = "degenerate-robustness";
    // Shadow subject, single frame, and zero-amplitude constant pose.
    let cases: [(&str, SynthesisParams, usize); 2] = [
        ("constant pose", SynthesisParams { amplitude: 0.0, ..config.synthesis }, 5),
        ("moving pose", config.synthesis, 4),
    ];
    for (what, params, frames) in cases {
        let seq = match synthesize_sequence(0, 13, frames, &params) {
            Ok(s) => s,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let mut normalized = match preprocess(&seq) {
            Ok(n) => n,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        if frames == 4 {
            // Cut down to one frame to exercise T = 1.
            normalized.main.truncate(1);
            normalized.auxiliary.truncate(1);
        }
        match generate_image_set(&normalized, &config.selection, 32, 32, &ImageSpec::ALL) {
            Ok(images) => {
                if images.len() != 13 {
                    return CheckResult::fail(NAME, format!("{what}: {} images", images.len()));
                }
            }
            Err(e) => return CheckResult::fail(NAME, format!("{what}: {e}")),
        }
    }
    CheckResult::pass(NAME, "shadow, T=1 and constant poses encode to 13 valid images")
}

fn check_fusion_product(seed: u64) -> CheckResult {
    const NAME: &str = "fusion-product-oracle";
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6675_7365);
    for trial in 0..100 {
        let classes = rng.gen_range(2..10);
        let vectors: Vec<ScoreVector> = (0..rng.gen_range(1..8))
            .map(|i| {
                ScoreVector::new(
                    format!("model-{i}"),
                    (0..classes).map(|_| rng.gen_range(0.05..2.0)).collect(),
                )
            })
            .collect();
        let fused = match multiply_fuse(&vectors) {
            Ok(f) => f,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        for c in 0..classes {
            let oracle: f64 = vectors.iter().map(|v| v.scores[c]).product();
            if (fused[c] - oracle).abs() > 1e-12 {
                return CheckResult::fail(NAME, format!("trial {trial} class {c} mismatch"));
            }
        }
    }
    CheckResult::pass(NAME, "100 random cases match the per-class fold")
}

fn check_fusion_rescaling(seed: u64) -> CheckResult {
    const NAME: &str = "fusion-rescale-invariance";
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7265_7363);
    for trial in 0..1000 {
        let classes = 6;
        let vectors: Vec<ScoreVector> = (0..5)
            .map(|i| {
                ScoreVector::new(
                    format!("model-{i}"),
                    (0..classes).map(|_| rng.gen_range(0.01..1.0)).collect(),
                )
            })
            .collect();
        let base = multiply_fuse(&vectors).and_then(|f| predict(&f));
        let mut scaled = vectors.clone();
        let which = rng.gen_range(0..scaled.len());
        let factor = rng.gen_range(1e-3..1e3);
        for s in &mut scaled[which].scores {
            *s *= factor;
        }
        let after = multiply_fuse(&scaled).and_then(|f| predict(&f));
        match (base, after) {
            (Ok(a), Ok(b)) if a == b => {}
            other => return CheckResult::fail(NAME, format!("trial {trial}: {other:?}")),
        }
    }
    CheckResult::pass(NAME, "1000 rescaling trials keep the argmax")
}

fn check_golden_images(golden_dir: Option<&Path>) -> CheckResult {
    const NAME: &str = "golden-images";
    let Some(dir) = golden_dir.map(Path::to_path_buf).or_else(default_golden_dir) else {
        return CheckResult::fail(
            NAME,
            "golden directory not found; pass --golden-dir or set SKELTEX_GOLDEN_DIR",
        );
    };
    // Goldens are pinned to the default configuration.
    let config = PipelineConfig::default();
    for fixture in &FIXTURES {
        let normalized = match preprocess(&fixture.sequence()) {
            Ok(n) => n,
            Err(e) => return CheckResult::fail(NAME, format!("{}: {e}", fixture.name)),
        };
        let images = match generate_image_set(
            &normalized,
            &config.selection,
            config.image.height,
            config.image.width,
            &ImageSpec::ALL,
        ) {
            Ok(images) => images,
            Err(e) => return CheckResult::fail(NAME, format!("{}: {e}", fixture.name)),
        };
        for (spec, image) in images {
            let path = dir.join(spec.filename(fixture.name));
            let expected = match std::fs::read(&path) {
                Ok(bytes) => bytes,
                Err(e) => {
                    return CheckResult::fail(
                        NAME,
                        format!("{} {}: cannot read golden file: {e}", fixture.name, spec),
                    );
                }
            };
            let actual = match image.to_png_bytes() {
                Ok(bytes) => bytes,
                Err(e) => return CheckResult::fail(NAME, e.to_string()),
            };
            if expected != actual {
                return CheckResult::fail(
                    NAME,
                    format!("{} {} differs from the golden file", fixture.name, spec),
                );
            }
        }
    }
    CheckResult::pass(NAME, format!("39 golden images match under {}", dir.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_oracles_pass_for_many_seeds() {
        for seed in 0..5 {
            let result = check_geometry_oracles(seed);
            assert!(result.passed, "{}", result.detail);
        }
    }

    #[test]
    fn dimension_check_names_the_expected_count_on_bad_config() {
        let mut config = PipelineConfig::default();
        config.selection.js3_joints = vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 9];
        let result = check_dimension_counts(&config);
        assert!(!result.passed);
        assert!(result.detail.contains("expected 231"), "detail: {}", result.detail);
    }

    #[test]
    fn fusion_checks_pass() {
        assert!(check_fusion_product(1).passed);
        assert!(check_fusion_rescaling(1).passed);
    }

    #[test]
    fn degenerate_robustness_passes_on_defaults() {
        let result = check_degenerate_robustness(&PipelineConfig::default());
        assert!(result.passed, "{}", result.detail);
    }

    #[test]
    fn missing_golden_dir_is_a_failure_with_hint() {
        let result = check_golden_images(Some(Path::new("/definitely/not/here")));
        assert!(!result.passed);
        assert!(result.detail.contains("cannot read golden file"));
    }
}
