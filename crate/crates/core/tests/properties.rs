//! Property tests over random seeds and inputs.

use proptest::prelude::*;

use spoteval::annotation::{AnnotationDoc, Interval};
use spoteval::metrics::{self, HalfWidthMode, ToleranceSpec};
use spoteval::spotting::{self, ScoreStream};
use spoteval::synthgen::{self, MatchModel, NoiseModel};
use spoteval::taxonomy::{PathGroup, Taxonomy};

fn soccer() -> Taxonomy {
    Taxonomy::builtin("soccer").unwrap()
}

fn model(seed: u64) -> MatchModel {
    MatchModel {
        duration: 90.0,
        sequences: (2, 4),
        event_rate_hz: 0.5,
        ..MatchModel::with_seed(seed)
    }
}

/// Sorted, pairwise-disjoint interval list from gap/length pairs.
fn intervals(parts: Vec<(f64, f64)>) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut cursor = 0.0;
    for (gap, len) in parts {
        cursor += gap;
        out.push(Interval {
            start: cursor,
            end: cursor + len,
            state: "active".into(),
        });
        cursor += len;
    }
    out
}

fn interval_strategy() -> impl Strategy<Value = Vec<Interval>> {
    prop::collection::vec((0.01f64..5.0, 0.01f64..5.0), 0..8).prop_map(intervals)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tiou_is_symmetric_and_bounded(a in interval_strategy(), b in interval_strategy()) {
        let ab = metrics::temporal_iou(&a, &b).unwrap();
        let ba = metrics::temporal_iou(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        if let Some(v) = ab {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn tiou_identity_iff_equal_union(a in interval_strategy()) {
        prop_assume!(!a.is_empty());
        let same = metrics::temporal_iou(&a, &a).unwrap().unwrap();
        prop_assert!((same - 1.0).abs() < 1e-12);

        // shifting any interval strictly reduces the ratio
        let mut shifted = a.clone();
        let last = shifted.last_mut().unwrap();
        last.start += 1e6;
        last.end += 1e6;
        let moved = metrics::temporal_iou(&a, &shifted).unwrap().unwrap();
        prop_assert!(moved < 1.0);
    }

    #[test]
    fn generated_docs_always_validate(seed in any::<u64>()) {
        let tax = soccer();
        let doc = synthgen::generate_match(&model(seed), &tax).unwrap();
        prop_assert!(doc.validate(&tax).is_empty());
    }

    #[test]
    fn interval_tiling_partitions_the_segment(seed in any::<u64>()) {
        let tax = soccer();
        let doc = synthgen::generate_match(&model(seed), &tax).unwrap();
        let ivs = doc.derive_intervals(&tax, PathGroup::GameStatus).unwrap();
        prop_assert_eq!(ivs.first().unwrap().start, doc.segment.0);
        prop_assert_eq!(ivs.last().unwrap().end, doc.segment.1);
        for w in ivs.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
            prop_assert!(w[0].duration() > 0.0);
            prop_assert_ne!(&w[0].state, &w[1].state);
        }
    }

    #[test]
    fn every_event_lands_in_one_sequence_or_an_inactive_gap(seed in any::<u64>()) {
        let tax = soccer();
        let doc = synthgen::generate_match(&model(seed), &tax).unwrap();
        let seqs = doc.segment_sequences(&tax).unwrap();
        for e in &doc.events {
            let holders = seqs
                .iter()
                .filter(|s| s.events.iter().any(|se| se == e))
                .count();
            prop_assert!(holders <= 1, "event at {} in {} sequences", e.t, holders);
        }
        let assigned: usize = seqs.iter().map(|s| s.events.len()).sum();
        prop_assert!(assigned <= doc.events.len());
    }

    #[test]
    fn canonical_round_trip_is_identity(seed in any::<u64>(), noisy in any::<bool>()) {
        let tax = soccer();
        let mut doc = synthgen::generate_match(&model(seed), &tax).unwrap();
        if noisy {
            doc = synthgen::perturb(&doc, &NoiseModel::with_seed(seed ^ 0xabcd), &tax);
        }
        let text = doc.to_canonical_string();
        let reparsed = AnnotationDoc::parse(&text).unwrap();
        prop_assert_eq!(&doc, &reparsed);
        prop_assert_eq!(text, reparsed.to_canonical_string());
    }

    #[test]
    fn rollup_is_idempotent_and_size_preserving(seed in any::<u64>(), depth in 0usize..5) {
        let tax = soccer();
        let doc = synthgen::generate_match(&model(seed), &tax).unwrap();
        let once = tax.rollup(&doc, depth).unwrap();
        let twice = tax.rollup(&once, depth).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once.events.len(), doc.events.len());
        let mut t1: Vec<f64> = doc.events.iter().map(|e| e.t).collect();
        let mut t2: Vec<f64> = once.events.iter().map(|e| e.t).collect();
        t1.sort_by(f64::total_cmp);
        t2.sort_by(f64::total_cmp);
        prop_assert_eq!(t1, t2);
    }

    #[test]
    fn scm_pairs_are_a_bijection_on_consistent_partitions(seed in any::<u64>()) {
        let tax = soccer();
        let tol = ToleranceSpec::from_taxonomy(&tax);
        let a = synthgen::generate_match(&model(seed), &tax).unwrap();
        let b = synthgen::perturb(&a, &NoiseModel::with_seed(seed ^ 0x5555), &tax);
        let m = metrics::scm_match(&b, &a, &tax, "ball_release", &tol).unwrap();

        // no event appears in two pairs, and both sides pair completely
        let mut pred_keys: Vec<(u64, String)> = m
            .pairs
            .iter()
            .map(|p| (p.pred.t.to_bits(), p.pred.category.clone()))
            .collect();
        let before = pred_keys.len();
        pred_keys.sort();
        pred_keys.dedup();
        prop_assert_eq!(before, pred_keys.len());

        let stats = m.scm.as_ref().unwrap();
        prop_assert_eq!(
            m.pairs.len() + m.excluded_ref.len(),
            stats.total_ref_events
        );
        prop_assert_eq!(m.pairs.len(), stats.consistent_ref_events);
    }

    #[test]
    fn nms_respects_suppression_radius(seed in any::<u64>(), w10 in 1u32..40) {
        let w = w10 as f64 / 10.0;
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut stream = ScoreStream::new(25.0, 0.0, vec!["ball_reception".into()]);
        stream.scores = (0..300).map(|_| vec![rng.gen::<f64>()]).collect();
        let peaks = spotting::nms_peaks(&stream, "ball_reception", w).unwrap();
        for pair in peaks.windows(2) {
            prop_assert!(pair[1].0 - pair[0].0 > w / 2.0);
        }
    }

    #[test]
    fn enlarging_the_window_never_loses_nnm_matches(seed in any::<u64>()) {
        let tax = soccer();
        let a = synthgen::generate_match(&model(seed), &tax).unwrap();
        let b = synthgen::perturb(&a, &NoiseModel::with_seed(seed ^ 0x77), &tax);
        let mut last = 0usize;
        for w in [0.1, 0.44, 1.0, 2.0, 6.04] {
            let tol = ToleranceSpec::uniform(w, HalfWidthMode::Half);
            let tp = metrics::nnm_match(&b, &a, "ball_release", &tol).unwrap().tp();
            prop_assert!(tp >= last);
            last = tp;
        }
    }
}
