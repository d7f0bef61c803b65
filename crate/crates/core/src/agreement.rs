//! Human-performance protocol: every annotator as predictor against every
//! other as reference, averaged into per-annotator and mean figures, plus
//! the asymmetric one-vs-many comparison.

use rayon::prelude::*;
use serde::Serialize;

use crate::annotation::AnnotationDoc;
use crate::error::{Error, Result};
use crate::metrics::{self, MatchMode, MatchResult, ToleranceSpec};
use crate::taxonomy::Taxonomy;

/// Scores of one directed comparison for one category.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct PairScores {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    /// SCM only: fraction of reference events in consistent sequences.
    pub consistency: Option<f64>,
}

impl PairScores {
    fn from_result(m: &MatchResult) -> Self {
        PairScores {
            precision: m.precision(),
            recall: m.recall(),
            f1: m.f1(),
            consistency: m.consistent_event_fraction(),
        }
    }
}

/// One predictor-vs-reference evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct DirectedComparison {
    pub pred: String,
    pub reference: String,
    pub category: String,
    pub mode: MatchMode,
    pub scores: PairScores,
}

/// Mean over the comparisons of one annotator as predictor.
#[derive(Debug, Clone, Serialize)]
pub struct IndividualPerformance {
    pub annotator: String,
    pub category: String,
    pub mode: MatchMode,
    pub scores: PairScores,
}

/// Mean over all individual performances.
#[derive(Debug, Clone, Serialize)]
pub struct MeanPerformance {
    pub category: String,
    pub mode: MatchMode,
    pub scores: PairScores,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementReport {
    pub annotators: Vec<String>,
    pub categories: Vec<String>,
    /// All directed pairs (the full n(n-1) matrix for the pairwise protocol).
    pub comparisons: Vec<DirectedComparison>,
    pub individual: Vec<IndividualPerformance>,
    pub mean_human: Vec<MeanPerformance>,
}

impl AgreementReport {
    pub fn comparison(
        &self,
        pred: &str,
        reference: &str,
        category: &str,
        mode: MatchMode,
    ) -> Option<&PairScores> {
        self.comparisons
            .iter()
            .find(|c| {
                c.pred == pred
                    && c.reference == reference
                    && c.category == category
                    && c.mode == mode
            })
            .map(|c| &c.scores)
    }

    pub fn mean(&self, category: &str, mode: MatchMode) -> Option<&PairScores> {
        self.mean_human
            .iter()
            .find(|m| m.category == category && m.mode == mode)
            .map(|m| &m.scores)
    }
}

/// Mean over the defined values only; `None` when nothing is defined.
fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

fn mean_scores<'a>(scores: impl Iterator<Item = &'a PairScores> + Clone) -> PairScores {
    PairScores {
        precision: mean_of(scores.clone().map(|s| s.precision)),
        recall: mean_of(scores.clone().map(|s| s.recall)),
        f1: mean_of(scores.clone().map(|s| s.f1)),
        consistency: mean_of(scores.map(|s| s.consistency)),
    }
}

fn annotator_labels(docs: &[AnnotationDoc]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::with_capacity(docs.len());
    for (i, d) in docs.iter().enumerate() {
        let base = if d.annotator.is_empty() {
            format!("doc{i}")
        } else {
            d.annotator.clone()
        };
        let label = if labels.contains(&base) {
            format!("{base}#{i}")
        } else {
            base
        };
        labels.push(label);
    }
    labels
}

fn check_segments(docs: &[AnnotationDoc]) -> Result<()> {
    for d in &docs[1..] {
        if d.segment != docs[0].segment {
            return Err(Error::SegmentMismatch(
                docs[0].segment.0,
                docs[0].segment.1,
                d.segment.0,
                d.segment.1,
            ));
        }
    }
    Ok(())
}

fn evaluate_directed(
    pred: &AnnotationDoc,
    reference: &AnnotationDoc,
    taxonomy: &Taxonomy,
    categories: &[String],
    tol: &ToleranceSpec,
    attribute_keys: &[String],
) -> Result<Vec<(String, MatchMode, PairScores)>> {
    let alignment = metrics::scm_align_boundaries(pred, reference, taxonomy, tol)?;
    let mut out = Vec::with_capacity(categories.len() * 2);
    for category in categories {
        let nn = metrics::nnm_match(pred, reference, category, tol)?;
        out.push((
            category.clone(),
            MatchMode::Nnm,
            PairScores::from_result(&nn),
        ));
        let sc = metrics::scm_match_aligned(&alignment, category, tol, attribute_keys)?;
        out.push((
            category.clone(),
            MatchMode::Scm,
            PairScores::from_result(&sc),
        ));
    }
    Ok(out)
}

/// Every annotator as predictor against every other annotator as reference:
/// NN and SC metrics for every directed pair and category, averaged per
/// annotator (individual performance) and over annotators (mean human
/// performance). Docs are rolled up to `rollup_depth` first when given.
pub fn pairwise_agreement(
    docs: &[AnnotationDoc],
    taxonomy: &Taxonomy,
    categories: &[String],
    tol: &ToleranceSpec,
    rollup_depth: Option<usize>,
    attribute_keys: &[String],
) -> Result<AgreementReport> {
    if docs.len() < 2 {
        return Err(Error::TooFewDocs(docs.len()));
    }
    check_segments(docs)?;

    let rolled: Vec<AnnotationDoc> = match rollup_depth {
        Some(depth) => docs
            .iter()
            .map(|d| taxonomy.rollup(d, depth))
            .collect::<Result<_>>()?,
        None => docs.to_vec(),
    };
    let labels = annotator_labels(docs);

    let directed: Vec<(usize, usize)> = (0..docs.len())
        .flat_map(|i| {
            (0..docs.len())
                .filter(move |j| *j != i)
                .map(move |j| (i, j))
        })
        .collect();

    let evaluated: Vec<Vec<DirectedComparison>> = directed
        .par_iter()
        .map(|(i, j)| {
            evaluate_directed(
                &rolled[*i],
                &rolled[*j],
                taxonomy,
                categories,
                tol,
                attribute_keys,
            )
            .map(|rows| {
                rows.into_iter()
                    .map(|(category, mode, scores)| DirectedComparison {
                        pred: labels[*i].clone(),
                        reference: labels[*j].clone(),
                        category,
                        mode,
                        scores,
                    })
                    .collect()
            })
        })
        .collect::<Result<_>>()?;
    let comparisons: Vec<DirectedComparison> = evaluated.into_iter().flatten().collect();

    let mut individual = Vec::new();
    let mut mean_human = Vec::new();
    for category in categories {
        for mode in [MatchMode::Nnm, MatchMode::Scm] {
            let mut per_annotator = Vec::new();
            for label in &labels {
                let scores = mean_scores(
                    comparisons
                        .iter()
                        .filter(|c| c.pred == *label && c.category == *category && c.mode == mode)
                        .map(|c| &c.scores),
                );
                per_annotator.push(scores);
                individual.push(IndividualPerformance {
                    annotator: label.clone(),
                    category: category.clone(),
                    mode,
                    scores,
                });
            }
            mean_human.push(MeanPerformance {
                category: category.clone(),
                mode,
                scores: mean_scores(per_annotator.iter()),
            });
        }
    }

    Ok(AgreementReport {
        annotators: labels,
        categories: categories.to_vec(),
        comparisons,
        individual,
        mean_human,
    })
}

/// One annotation as prediction against several references (for example one
/// inexperienced annotator vs the experienced ones). Precision and recall
/// are reported separately; with asymmetric inputs they differ.
pub fn one_vs_many(
    pred: &AnnotationDoc,
    refs: &[AnnotationDoc],
    taxonomy: &Taxonomy,
    categories: &[String],
    tol: &ToleranceSpec,
    rollup_depth: Option<usize>,
    attribute_keys: &[String],
) -> Result<AgreementReport> {
    if refs.is_empty() {
        return Err(Error::TooFewDocs(1));
    }
    let mut all = Vec::with_capacity(refs.len() + 1);
    all.push(pred.clone());
    all.extend(refs.iter().cloned());
    check_segments(&all)?;

    let rolled: Vec<AnnotationDoc> = match rollup_depth {
        Some(depth) => all
            .iter()
            .map(|d| taxonomy.rollup(d, depth))
            .collect::<Result<_>>()?,
        None => all.clone(),
    };
    let labels = annotator_labels(&all);

    let evaluated: Vec<Vec<DirectedComparison>> = (1..rolled.len())
        .into_par_iter()
        .map(|j| {
            evaluate_directed(
                &rolled[0],
                &rolled[j],
                taxonomy,
                categories,
                tol,
                attribute_keys,
            )
            .map(|rows| {
                rows.into_iter()
                    .map(|(category, mode, scores)| DirectedComparison {
                        pred: labels[0].clone(),
                        reference: labels[j].clone(),
                        category,
                        mode,
                        scores,
                    })
                    .collect()
            })
        })
        .collect::<Result<_>>()?;
    let comparisons: Vec<DirectedComparison> = evaluated.into_iter().flatten().collect();

    let mut individual = Vec::new();
    let mut mean_human = Vec::new();
    for category in categories {
        for mode in [MatchMode::Nnm, MatchMode::Scm] {
            let scores = mean_scores(
                comparisons
                    .iter()
                    .filter(|c| c.category == *category && c.mode == mode)
                    .map(|c| &c.scores),
            );
            individual.push(IndividualPerformance {
                annotator: labels[0].clone(),
                category: category.clone(),
                mode,
                scores,
            });
            mean_human.push(MeanPerformance {
                category: category.clone(),
                mode,
                scores,
            });
        }
    }

    Ok(AgreementReport {
        annotators: labels,
        categories: categories.to_vec(),
        comparisons,
        individual,
        mean_human,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::EventRecord;
    use crate::metrics::HalfWidthMode;
    use approx::assert_relative_eq;

    const PASS: &str = "ball_release/intentional/pass/successful_untouched";
    const KICK_OFF: &str = "static_ball_action/kick-off";
    const BALL_OUT: &str = "referee_decision/ball_out_of_field";

    fn soccer() -> Taxonomy {
        Taxonomy::builtin("soccer").unwrap()
    }

    fn tol(w: f64) -> ToleranceSpec {
        ToleranceSpec::uniform(w, HalfWidthMode::Half)
    }

    fn doc_with_passes(annotator: &str, ts: &[f64]) -> AnnotationDoc {
        let mut doc = AnnotationDoc::new("m", annotator, 0.0, 100.0);
        doc.push_event(EventRecord::new(5.0, KICK_OFF));
        doc.push_event(EventRecord::new(60.0, BALL_OUT));
        for t in ts {
            doc.push_event(EventRecord::new(*t, PASS));
        }
        doc.sort_events();
        doc
    }

    fn cats(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_docs_agree_perfectly() {
        let docs = vec![
            doc_with_passes("a", &[10.0, 20.0]),
            doc_with_passes("b", &[10.0, 20.0]),
            doc_with_passes("c", &[10.0, 20.0]),
        ];
        let rep =
            pairwise_agreement(&docs, &soccer(), &cats(&[PASS]), &tol(0.44), None, &[]).unwrap();
        assert_eq!(rep.comparisons.len(), 3 * 2 * 2); // directed pairs x modes
        for c in &rep.comparisons {
            assert_eq!(c.scores.precision, Some(1.0));
            assert_eq!(c.scores.recall, Some(1.0));
        }
        for m in &rep.mean_human {
            assert_eq!(m.scores.precision, Some(1.0));
        }
    }

    #[test]
    fn report_matches_per_pair_recomputation() {
        let docs = vec![
            doc_with_passes("a", &[10.0, 20.0, 30.0]),
            doc_with_passes("b", &[10.1, 20.2, 31.0]),
            doc_with_passes("c", &[10.0, 25.0]),
        ];
        let t = tol(0.44);
        let rep = pairwise_agreement(&docs, &soccer(), &cats(&[PASS]), &t, None, &[]).unwrap();

        // independent re-evaluation of each directed pair
        for (i, pred) in docs.iter().enumerate() {
            for (j, reference) in docs.iter().enumerate() {
                if i == j {
                    continue;
                }
                let expect_nn = metrics::nnm_match(pred, reference, PASS, &t).unwrap();
                let got = rep
                    .comparison(&docs[i].annotator, &docs[j].annotator, PASS, MatchMode::Nnm)
                    .unwrap();
                assert_eq!(got.precision, expect_nn.precision());
                assert_eq!(got.recall, expect_nn.recall());

                let expect_sc = metrics::scm_match(pred, reference, &soccer(), PASS, &t).unwrap();
                let got = rep
                    .comparison(&docs[i].annotator, &docs[j].annotator, PASS, MatchMode::Scm)
                    .unwrap();
                assert_eq!(got.precision, expect_sc.precision());
                assert_eq!(got.consistency, expect_sc.consistent_event_fraction());
            }
        }

        // mean human = mean over annotators of the mean over references
        let nn_mean = rep.mean(PASS, MatchMode::Nnm).unwrap();
        let mut individual_means = Vec::new();
        for i in 0..docs.len() {
            let mut vals = Vec::new();
            for j in 0..docs.len() {
                if i == j {
                    continue;
                }
                let m = metrics::nnm_match(&docs[i], &docs[j], PASS, &t).unwrap();
                vals.push(m.precision().unwrap());
            }
            individual_means.push(vals.iter().sum::<f64>() / vals.len() as f64);
        }
        let expect = individual_means.iter().sum::<f64>() / individual_means.len() as f64;
        assert_relative_eq!(nn_mean.precision.unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn seeded_synthetic_trio_matches_brute_force_recomputation() {
        use crate::synthgen::{self, MatchModel, NoiseModel};
        let tax = soccer();
        let model = MatchModel {
            duration: 120.0,
            sequences: (3, 4),
            event_rate_hz: 0.4,
            ..MatchModel::with_seed(21)
        };
        let base = synthgen::generate_match(&model, &tax).unwrap();
        let docs = vec![
            base.clone(),
            synthgen::perturb(&base, &NoiseModel::with_seed(101), &tax),
            synthgen::perturb(&base, &NoiseModel::with_seed(102), &tax),
        ];
        let t = ToleranceSpec::from_taxonomy(&tax);
        let categories = cats(&["ball_release", "ball_reception"]);
        let rep = pairwise_agreement(&docs, &tax, &categories, &t, None, &[]).unwrap();

        let labels = annotator_labels(&docs);
        for category in &categories {
            for (i, pred) in docs.iter().enumerate() {
                for (j, reference) in docs.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let nn = metrics::nnm_match(pred, reference, category, &t).unwrap();
                    let got = rep
                        .comparison(&labels[i], &labels[j], category, MatchMode::Nnm)
                        .unwrap();
                    assert_eq!(got.precision, nn.precision());
                    assert_eq!(got.recall, nn.recall());

                    let sc = metrics::scm_match(pred, reference, &tax, category, &t).unwrap();
                    let got = rep
                        .comparison(&labels[i], &labels[j], category, MatchMode::Scm)
                        .unwrap();
                    assert_eq!(got.precision, sc.precision());
                    assert_eq!(got.recall, sc.recall());
                    assert_eq!(got.consistency, sc.consistent_event_fraction());
                }
            }
        }
    }

    #[test]
    fn nn_precision_recall_symmetry() {
        let docs = vec![
            doc_with_passes("a", &[10.0, 20.0, 30.0, 40.0]),
            doc_with_passes("b", &[10.1, 24.0, 30.2]),
        ];
        let rep =
            pairwise_agreement(&docs, &soccer(), &cats(&[PASS]), &tol(0.44), None, &[]).unwrap();
        let ab = rep.comparison("a", "b", PASS, MatchMode::Nnm).unwrap();
        let ba = rep.comparison("b", "a", PASS, MatchMode::Nnm).unwrap();
        assert_eq!(ab.precision, ba.recall);
        assert_eq!(ab.recall, ba.precision);
    }

    #[test]
    fn mean_human_invariant_under_doc_order() {
        let a = doc_with_passes("a", &[10.0, 20.0, 30.0]);
        let b = doc_with_passes("b", &[10.1, 20.2]);
        let c = doc_with_passes("c", &[10.0, 21.0, 29.8]);
        let t = tol(0.44);
        let rep1 = pairwise_agreement(
            &[a.clone(), b.clone(), c.clone()],
            &soccer(),
            &cats(&[PASS]),
            &t,
            None,
            &[],
        )
        .unwrap();
        let rep2 =
            pairwise_agreement(&[c, a, b], &soccer(), &cats(&[PASS]), &t, None, &[]).unwrap();
        let m1 = rep1.mean(PASS, MatchMode::Nnm).unwrap();
        let m2 = rep2.mean(PASS, MatchMode::Nnm).unwrap();
        assert_relative_eq!(
            m1.precision.unwrap(),
            m2.precision.unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(m1.recall.unwrap(), m2.recall.unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn rollup_depth_is_applied_before_matching() {
        // same release annotated as different leaves: disagreement at leaf
        // level, agreement after roll-up to the tree root
        let mut a = doc_with_passes("a", &[]);
        a.push_event(EventRecord::new(
            10.0,
            "ball_release/intentional/pass/intercepted",
        ));
        a.sort_events();
        let mut b = doc_with_passes("b", &[]);
        b.push_event(EventRecord::new(
            10.1,
            "ball_release/intentional/shot/blocked",
        ));
        b.sort_events();
        let docs = vec![a, b];

        let leaf_rep = pairwise_agreement(
            &docs,
            &soccer(),
            &cats(&["ball_release/intentional/pass/intercepted"]),
            &tol(0.44),
            None,
            &[],
        )
        .unwrap();
        assert_eq!(
            leaf_rep
                .mean("ball_release/intentional/pass/intercepted", MatchMode::Nnm)
                .unwrap()
                .precision,
            Some(0.0)
        );

        let root_rep = pairwise_agreement(
            &docs,
            &soccer(),
            &cats(&["ball_release"]),
            &tol(0.44),
            Some(0),
            &[],
        )
        .unwrap();
        assert_eq!(
            root_rep
                .mean("ball_release", MatchMode::Nnm)
                .unwrap()
                .precision,
            Some(1.0)
        );
    }

    #[test]
    fn too_few_docs_is_an_error() {
        let docs = vec![doc_with_passes("a", &[10.0])];
        assert!(matches!(
            pairwise_agreement(&docs, &soccer(), &cats(&[PASS]), &tol(0.44), None, &[]),
            Err(Error::TooFewDocs(1))
        ));
    }

    #[test]
    fn one_vs_many_identical_pair() {
        let pred = doc_with_passes("novice", &[10.0, 20.0]);
        let refs = vec![doc_with_passes("expert", &[10.0, 20.0])];
        let rep = one_vs_many(
            &pred,
            &refs,
            &soccer(),
            &cats(&[PASS]),
            &tol(0.44),
            None,
            &[],
        )
        .unwrap();
        let m = rep.mean(PASS, MatchMode::Nnm).unwrap();
        assert_eq!(m.precision, Some(1.0));
        assert_eq!(m.recall, Some(1.0));
    }

    #[test]
    fn one_vs_many_missing_event_hurts_recall_not_precision() {
        // pred misses the pass@20 present in all references
        let pred = doc_with_passes("novice", &[10.0]);
        let refs = vec![
            doc_with_passes("e1", &[10.0, 20.0]),
            doc_with_passes("e2", &[10.05, 20.0]),
        ];
        let rep = one_vs_many(
            &pred,
            &refs,
            &soccer(),
            &cats(&[PASS]),
            &tol(0.44),
            None,
            &[],
        )
        .unwrap();
        let m = rep.mean(PASS, MatchMode::Nnm).unwrap();
        assert_eq!(m.precision, Some(1.0));
        assert_eq!(m.recall, Some(0.5));
        assert!(m.recall < m.precision);
    }
}
