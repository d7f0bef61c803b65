//! Shared fixtures for the criterion benches: a large seeded match and a
//! noisy variant, big enough that matching cost dominates setup.

use spoteval::synthgen::{self, MatchModel, NoiseModel};
use spoteval::taxonomy::Taxonomy;
use spoteval::AnnotationDoc;

pub fn taxonomy() -> Taxonomy {
    Taxonomy::builtin("soccer").expect("bundled config")
}

/// Roughly an hour of play: a few thousand events.
pub fn large_pair() -> (AnnotationDoc, AnnotationDoc, Taxonomy) {
    let tax = taxonomy();
    let model = MatchModel {
        duration: 3600.0,
        sequences: (40, 40),
        event_rate_hz: 1.0,
        ..MatchModel::with_seed(99)
    };
    let base = synthgen::generate_match(&model, &tax).expect("feasible model");
    let noisy = synthgen::perturb(&base, &NoiseModel::with_seed(7), &tax);
    (noisy, base, tax)
}
