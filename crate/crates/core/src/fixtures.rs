//! Built-in fixture sequences for golden-image checks.
//!
//! Three fixed synthetic sequences cover the interesting shapes: a
//! single-body sequence (shadow subject), a two-body sequence, and a
//! single-frame static sequence. Their thirteen texture images are frozen
//! as golden PNGs under `golden/` in this crate.

use crate::skeleton::{synthesize_sequence, synthesize_two_body, SkeletonSequence, SynthesisParams};

#[derive(Debug, Clone, Copy)]
pub enum FixtureKind {
    /// One body performing `class`.
    Single { class: u32, seed: u64, frames: usize },
    /// Two bodies performing `class_a` and `class_b`.
    Pair { class_a: u32, class_b: u32, seed: u64, frames: usize },
    /// A single frame cut from a `class` sequence (degenerate T = 1).
    SingleFrame { class: u32, seed: u64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub name: &'static str,
    pub kind: FixtureKind,
}

pub const FIXTURES: [Fixture; 3] = [
    Fixture { name: "fixture-solo", kind: FixtureKind::Single { class: 0, seed: 7, frames: 40 } },
    Fixture {
        name: "fixture-pair",
        kind: FixtureKind::Pair { class_a: 3, class_b: 1, seed: 11, frames: 25 },
    },
    Fixture { name: "fixture-still", kind: FixtureKind::SingleFrame { class: 2, seed: 3 } },
];

impl Fixture {
    /// Materializes the fixture; the fixture name becomes the source id so
    /// artifact filenames are stable.
    pub fn sequence(&self) -> SkeletonSequence {
        let params = SynthesisParams::default();
        let mut seq = match self.kind {
            FixtureKind::Single { class, seed, frames } => {
                synthesize_sequence(class, seed, frames, &params).expect("fixture parameters are valid")
            }
            FixtureKind::Pair { class_a, class_b, seed, frames } => {
                synthesize_two_body(class_a, class_b, seed, frames, &params)
                    .expect("fixture parameters are valid")
            }
            FixtureKind::SingleFrame { class, seed } => {
                let mut full = synthesize_sequence(class, seed, 2, &params)
                    .expect("fixture parameters are valid");
                full.frames.truncate(1);
                full
            }
        };
        seq.source_id = self.name.to_string();
        seq
    }
}

pub fn fixture_by_name(name: &str) -> Option<&'static Fixture> {
    FIXTURES.iter().find(|f| f.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_materialize_with_their_names() {
        for fixture in &FIXTURES {
            let seq = fixture.sequence();
            assert_eq!(seq.source_id, fixture.name);
            assert!(seq.frame_count() >= 1);
        }
        assert_eq!(FIXTURES[2].sequence().frame_count(), 1);
    }

    #[test]
    fn fixtures_are_deterministic() {
        for fixture in &FIXTURES {
            assert_eq!(fixture.sequence(), fixture.sequence());
        }
    }
}
