//! The three evaluation mechanisms for comparing two annotations.
//!
//! * [`temporal_iou`] for duration states (game status, possession):
//!   intersection over union of interval unions.
//! * [`nnm_match`]: nearest-neighbour matching of spotted events under a
//!   per-category tolerance window. Many-to-one assignments are allowed,
//!   which is exactly the positive bias SCM exists to expose. Scored
//!   predictions additionally get [`average_precision_over_tolerances`].
//! * [`scm_match`]: sequence consistency matching. Game-status boundaries
//!   are aligned first ([`scm_align_boundaries`]), missed status events are
//!   adopted across docs, then events are counted per sequence and category
//!   and paired by order of occurrence only where the counts agree.
//!
//! All functions are pure; results merge by summation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationDoc, EventRecord, Interval, Sequence};
use crate::error::{Error, Result};
use crate::taxonomy::{PathGroup, Taxonomy};

// ---------------------------------------------------------------------------
// tolerances
// ---------------------------------------------------------------------------

/// How a window length `w_eval` translates into a match condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfWidthMode {
    /// Match iff `|dt| <= w_eval / 2` (w_eval is the total window length).
    #[default]
    Half,
    /// Match iff `|dt| <= w_eval`.
    Full,
}

/// Per-category evaluation windows in seconds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ToleranceSpec {
    #[serde(default)]
    pub mode: HalfWidthMode,
    /// Total window length per category id; the key `*` is a fallback.
    #[serde(default)]
    pub w_eval: BTreeMap<String, f64>,
}

impl ToleranceSpec {
    /// One window for every category.
    pub fn uniform(w_eval: f64, mode: HalfWidthMode) -> Self {
        let mut t = ToleranceSpec {
            mode,
            w_eval: BTreeMap::new(),
        };
        t.w_eval.insert("*".into(), w_eval);
        t
    }

    /// Windows from a taxonomy's (inherited) `w_eval` defaults.
    pub fn from_taxonomy(taxonomy: &Taxonomy) -> Self {
        let mut spec = ToleranceSpec::default();
        for node in taxonomy.nodes() {
            if let Some(w) = taxonomy.effective_w_eval(&node.id) {
                spec.w_eval.insert(node.id.clone(), w);
            }
        }
        spec
    }

    pub fn set(&mut self, category: impl Into<String>, w_eval: f64) {
        self.w_eval.insert(category.into(), w_eval);
    }

    /// Total window length for a category.
    pub fn window(&self, category: &str) -> Result<f64> {
        let w = self
            .w_eval
            .get(category)
            .or_else(|| self.w_eval.get("*"))
            .copied()
            .ok_or_else(|| Error::BadTolerance(category.to_string()))?;
        if w > 0.0 {
            Ok(w)
        } else {
            Err(Error::BadTolerance(category.to_string()))
        }
    }

    /// Maximum |dt| for a match of the given category.
    pub fn max_delta(&self, category: &str) -> Result<f64> {
        let w = self.window(category)?;
        Ok(match self.mode {
            HalfWidthMode::Half => w / 2.0,
            HalfWidthMode::Full => w,
        })
    }
}

// ---------------------------------------------------------------------------
// match results
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Nnm,
    Scm,
}

/// A prediction/reference pair produced by either matcher.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPair {
    pub pred: EventRecord,
    pub reference: EventRecord,
    /// Always true for NNM; SCM order-pairs first and applies the window
    /// afterwards, so distant pairs appear with `false` (one FP + one FN).
    pub within_tolerance: bool,
}

/// SCM-only bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScmStats {
    pub consistent_sequences: usize,
    pub total_sequences: usize,
    /// Reference-side events inside count-consistent sequences/partitions.
    pub consistent_ref_events: usize,
    pub total_ref_events: usize,
    pub adopted_into_pred: usize,
    pub adopted_into_ref: usize,
    /// True when boundary adoption could not produce alternating docs and
    /// matching fell back to the unaligned inputs.
    pub alignment_failed: bool,
}

/// An event skipped by attribute-refined SCM because a requested attribute
/// is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeError {
    pub side: Side,
    pub t: f64,
    pub category: String,
    pub attribute: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Pred,
    Ref,
}

/// Outcome of matching one category between two annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub category: String,
    pub mode: MatchMode,
    pub pairs: Vec<MatchedPair>,
    /// NNM: predictions with no reference inside the window.
    pub unmatched_pred: Vec<EventRecord>,
    /// NNM: references with no prediction inside the window.
    pub unmatched_ref: Vec<EventRecord>,
    /// SCM: events from count-inconsistent sequences (excluded from pairing).
    pub excluded_pred: Vec<EventRecord>,
    pub excluded_ref: Vec<EventRecord>,
    pub pred_total: usize,
    pub ref_total: usize,
    pub scm: Option<ScmStats>,
    pub attribute_errors: Vec<AttributeError>,
}

impl MatchResult {
    /// True positives: NNM counts matched predictions, SCM counts order
    /// pairs that land inside the window.
    pub fn tp(&self) -> usize {
        match self.mode {
            MatchMode::Nnm => self.pred_total - self.unmatched_pred.len(),
            MatchMode::Scm => self.pairs.iter().filter(|p| p.within_tolerance).count(),
        }
    }

    pub fn fp(&self) -> usize {
        match self.mode {
            MatchMode::Nnm => self.unmatched_pred.len(),
            MatchMode::Scm => self.pairs.iter().filter(|p| !p.within_tolerance).count(),
        }
    }

    pub fn fn_count(&self) -> usize {
        match self.mode {
            MatchMode::Nnm => self.unmatched_ref.len(),
            MatchMode::Scm => self.pairs.iter().filter(|p| !p.within_tolerance).count(),
        }
    }

    /// (numerator, denominator), so results can be micro-aggregated.
    pub fn precision_counts(&self) -> (usize, usize) {
        match self.mode {
            MatchMode::Nnm => (self.tp(), self.pred_total),
            MatchMode::Scm => (self.tp(), self.pairs.len()),
        }
    }

    pub fn recall_counts(&self) -> (usize, usize) {
        match self.mode {
            MatchMode::Nnm => (self.ref_total - self.unmatched_ref.len(), self.ref_total),
            MatchMode::Scm => (self.tp(), self.pairs.len()),
        }
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.precision_counts())
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.recall_counts())
    }

    pub fn f1(&self) -> Option<f64> {
        f1_of(self.precision(), self.recall())
    }

    /// SCM only: reference events inside consistent sequences over all
    /// reference events of the category.
    pub fn consistent_event_fraction(&self) -> Option<f64> {
        let s = self.scm.as_ref()?;
        ratio((s.consistent_ref_events, s.total_ref_events))
    }
}

/// `None` encodes an undefined 0/0 ratio; it is never silently 0 or 1.
pub(crate) fn ratio((num, den): (usize, usize)) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

fn f1_of(precision: Option<f64>, recall: Option<f64>) -> Option<f64> {
    match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// temporal IoU
// ---------------------------------------------------------------------------

/// Intersection over union of two interval unions. `None` when both unions
/// are empty (0/0). Inputs must be internally non-overlapping.
pub fn temporal_iou(a: &[Interval], b: &[Interval]) -> Result<Option<f64>> {
    let a = normalized(a)?;
    let b = normalized(b)?;
    let total = |ivs: &[Interval]| ivs.iter().map(Interval::duration).sum::<f64>();
    let inter = intersection_length(&a, &b);
    let union = total(&a) + total(&b) - inter;
    if union <= 0.0 {
        Ok(None)
    } else {
        Ok(Some(inter / union))
    }
}

fn normalized(intervals: &[Interval]) -> Result<Vec<Interval>> {
    let mut out: Vec<Interval> = intervals.to_vec();
    out.sort_by(|x, y| x.start.total_cmp(&y.start));
    for w in out.windows(2) {
        if w[1].start < w[0].end - 1e-9 {
            return Err(Error::OverlappingIntervals(w[1].start, w[0].end));
        }
    }
    Ok(out)
}

fn intersection_length(a: &[Interval], b: &[Interval]) -> f64 {
    let (mut i, mut j, mut total) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let lo = a[i].start.max(b[j].start);
        let hi = a[i].end.min(b[j].end);
        if hi > lo {
            total += hi - lo;
        }
        if a[i].end <= b[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

fn intersect_lists(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let lo = a[i].start.max(b[j].start);
        let hi = a[i].end.min(b[j].end);
        if hi > lo {
            out.push(Interval {
                start: lo,
                end: hi,
                state: a[i].state.clone(),
            });
        }
        if a[i].end <= b[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

fn union_lists(lists: &[Vec<Interval>]) -> Vec<Interval> {
    let mut all: Vec<Interval> = lists.iter().flatten().cloned().collect();
    all.sort_by(|x, y| x.start.total_cmp(&y.start));
    let mut out: Vec<Interval> = Vec::new();
    for iv in all {
        match out.last_mut() {
            Some(last) if iv.start <= last.end => last.end = last.end.max(iv.end),
            _ => out.push(iv),
        }
    }
    out
}

/// Temporal IoU of one state across several annotators.
#[derive(Debug, Clone, Serialize)]
pub struct PairwiseTiou {
    pub path_group: String,
    pub state: String,
    /// `(doc index, doc index, iou)` for every unordered pair with a
    /// defined value.
    pub pairs: Vec<(usize, usize, f64)>,
    pub mean: Option<f64>,
    /// Population standard deviation over the pair values.
    pub std: Option<f64>,
    /// n-way figure: intersection of all unions over union of all unions.
    pub aggregate: Option<f64>,
}

/// Mean and std of [`temporal_iou`] over every unordered annotator pair,
/// plus the n-way aggregate as a secondary figure.
pub fn pairwise_tiou(
    docs: &[&AnnotationDoc],
    taxonomy: &Taxonomy,
    path_group: PathGroup,
    state: &str,
) -> Result<PairwiseTiou> {
    if docs.len() < 2 {
        return Err(Error::TooFewDocs(docs.len()));
    }
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

    let restricted: Vec<Vec<Interval>> = docs
        .iter()
        .map(|d| {
            Ok(d.derive_intervals(taxonomy, path_group)?
                .into_iter()
                .filter(|iv| iv.state == state)
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut pairs = Vec::new();
    for i in 0..docs.len() {
        for j in (i + 1)..docs.len() {
            if let Some(iou) = temporal_iou(&restricted[i], &restricted[j])? {
                pairs.push((i, j, iou));
            }
        }
    }

    let mean = if pairs.is_empty() {
        None
    } else {
        Some(pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64)
    };
    let std = mean.map(|m| {
        (pairs.iter().map(|p| (p.2 - m).powi(2)).sum::<f64>() / pairs.len() as f64).sqrt()
    });

    let intersection = restricted
        .iter()
        .skip(1)
        .fold(restricted[0].clone(), |acc, ivs| intersect_lists(&acc, ivs));
    let union = union_lists(&restricted);
    let inter_len: f64 = intersection.iter().map(Interval::duration).sum();
    let union_len: f64 = union.iter().map(Interval::duration).sum();
    let aggregate = if union_len <= 0.0 {
        None
    } else {
        Some(inter_len / union_len)
    };

    Ok(PairwiseTiou {
        path_group: format!("{path_group:?}"),
        state: state.to_string(),
        pairs,
        mean,
        std,
        aggregate,
    })
}

// ---------------------------------------------------------------------------
// nearest-neighbour matching
// ---------------------------------------------------------------------------

/// Index of the event in `sorted` (ascending t) nearest to `t`; exact
/// distance ties resolve to the earlier event.
fn nearest_index(sorted: &[&EventRecord], t: f64) -> Option<usize> {
    if sorted.is_empty() {
        return None;
    }
    let right = sorted.partition_point(|e| e.t < t);
    let left = right.checked_sub(1);
    match (left, sorted.get(right)) {
        // <= prefers the earlier event on an exact distance tie
        (Some(l), Some(r)) => {
            if (t - sorted[l].t).abs() <= (r.t - t).abs() {
                Some(l)
            } else {
                Some(right)
            }
        }
        (Some(l), None) => Some(l),
        (None, Some(_)) => Some(right),
        (None, None) => None,
    }
}

/// Nearest-neighbour matching of one category. Every prediction pairs with
/// its nearest in-window reference and every reference with its nearest
/// in-window prediction (the union, deduplicated), so many-to-one mappings
/// are allowed. Precision counts predictions with a pair, recall counts
/// references with a pair; by symmetry precision(a, b) equals recall(b, a).
pub fn nnm_match(
    pred: &AnnotationDoc,
    reference: &AnnotationDoc,
    category: &str,
    tol: &ToleranceSpec,
) -> Result<MatchResult> {
    let delta = tol.max_delta(category)?;
    let preds = pred.events_of(category);
    let refs = reference.events_of(category);

    let mut pair_keys: Vec<(usize, usize)> = Vec::new();
    for (pi, p) in preds.iter().enumerate() {
        if let Some(ri) = nearest_index(&refs, p.t) {
            if (p.t - refs[ri].t).abs() <= delta {
                pair_keys.push((pi, ri));
            }
        }
    }
    for (ri, r) in refs.iter().enumerate() {
        if let Some(pi) = nearest_index(&preds, r.t) {
            if (preds[pi].t - r.t).abs() <= delta {
                pair_keys.push((pi, ri));
            }
        }
    }
    pair_keys.sort_unstable();
    pair_keys.dedup();

    let mut matched_pred = vec![false; preds.len()];
    let mut matched_ref = vec![false; refs.len()];
    for (pi, ri) in &pair_keys {
        matched_pred[*pi] = true;
        matched_ref[*ri] = true;
    }

    Ok(MatchResult {
        category: category.to_string(),
        mode: MatchMode::Nnm,
        pairs: pair_keys
            .iter()
            .map(|(pi, ri)| MatchedPair {
                pred: preds[*pi].clone(),
                reference: refs[*ri].clone(),
                within_tolerance: true,
            })
            .collect(),
        unmatched_pred: preds
            .iter()
            .zip(&matched_pred)
            .filter(|(_, m)| !**m)
            .map(|(e, _)| (*e).clone())
            .collect(),
        unmatched_ref: refs
            .iter()
            .zip(&matched_ref)
            .filter(|(_, m)| !**m)
            .map(|(e, _)| (*e).clone())
            .collect(),
        excluded_pred: Vec::new(),
        excluded_ref: Vec::new(),
        pred_total: preds.len(),
        ref_total: refs.len(),
        scm: None,
        attribute_errors: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// temporal average precision
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ApReport {
    pub category: String,
    /// `(w_eval, ap)`; `None` when there are no reference events.
    pub per_tolerance: Vec<(f64, Option<f64>)>,
    pub average: Option<f64>,
}

/// One-to-one greedy matching by descending confidence, then area under the
/// precision-recall curve, averaged over the given window lengths. The
/// confidence is read from each prediction's `score` attribute.
pub fn average_precision_over_tolerances(
    pred: &AnnotationDoc,
    reference: &AnnotationDoc,
    category: &str,
    tolerances: &[f64],
    mode: HalfWidthMode,
) -> Result<ApReport> {
    let preds = pred.events_of(category);
    let refs = reference.events_of(category);

    let mut ranked: Vec<(usize, f64)> = Vec::with_capacity(preds.len());
    for (i, p) in preds.iter().enumerate() {
        let score = p
            .attr("score")
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or(Error::MissingScore(p.t))?;
        ranked.push((i, score));
    }
    // highest confidence first; earlier timestamp breaks ties
    ranked.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(preds[a.0].t.total_cmp(&preds[b.0].t))
    });

    let mut per_tolerance = Vec::with_capacity(tolerances.len());
    for &w in tolerances {
        let delta = match mode {
            HalfWidthMode::Half => w / 2.0,
            HalfWidthMode::Full => w,
        };
        per_tolerance.push((w, average_precision(&ranked, &preds, &refs, delta)));
    }

    let defined: Vec<f64> = per_tolerance.iter().filter_map(|(_, ap)| *ap).collect();
    let average = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };

    Ok(ApReport {
        category: category.to_string(),
        per_tolerance,
        average,
    })
}

fn average_precision(
    ranked: &[(usize, f64)],
    preds: &[&EventRecord],
    refs: &[&EventRecord],
    delta: f64,
) -> Option<f64> {
    if refs.is_empty() {
        return None;
    }
    if ranked.is_empty() {
        return Some(0.0);
    }

    let mut used = vec![false; refs.len()];
    let mut is_tp = Vec::with_capacity(ranked.len());
    for (pi, _) in ranked {
        let t = preds[*pi].t;
        // nearest unused reference inside the window, earlier on ties
        let mut best: Option<(f64, usize)> = None;
        for (ri, r) in refs.iter().enumerate() {
            if used[ri] {
                continue;
            }
            let d = (r.t - t).abs();
            if d <= delta && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, ri));
            }
        }
        match best {
            Some((_, ri)) => {
                used[ri] = true;
                is_tp.push(true);
            }
            None => is_tp.push(false),
        }
    }

    let mut points = Vec::with_capacity(is_tp.len());
    let mut tp = 0usize;
    for (k, hit) in is_tp.iter().enumerate() {
        if *hit {
            tp += 1;
        }
        points.push((tp as f64 / refs.len() as f64, tp as f64 / (k + 1) as f64));
    }

    // all-points interpolation: integrate the precision envelope over recall
    let mut enveloped = Vec::with_capacity(points.len());
    let mut env = 0.0f64;
    for &(r, p) in points.iter().rev() {
        env = env.max(p);
        enveloped.push((r, env));
    }
    enveloped.reverse();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, env) in enveloped {
        if r > prev_recall {
            ap += (r - prev_recall) * env;
            prev_recall = r;
        }
    }
    Some(ap)
}

// ---------------------------------------------------------------------------
// sequence consistency matching
// ---------------------------------------------------------------------------

/// Attribute marking an adopted game-status event. Adopted events unify the
/// sequence borders but never take part in category counting.
pub const ADOPTED_ATTR: &str = "adopted";

/// Result of unifying the game-status boundaries of two docs.
#[derive(Debug, Clone)]
pub struct BoundaryAlignment {
    pub pred: AnnotationDoc,
    pub reference: AnnotationDoc,
    pub adopted_into_pred: usize,
    pub adopted_into_ref: usize,
    /// False when adoption would break the status alternation; in that case
    /// `pred`/`reference` are the unmodified inputs.
    pub alternation_ok: bool,
    /// Unified sequence borders: the k-th pred sequence corresponds to the
    /// k-th reference sequence (equal counts whenever `alternation_ok`).
    pub pred_sequences: Vec<Sequence>,
    pub ref_sequences: Vec<Sequence>,
}

/// Match status-changing events one-to-one in chronological order under the
/// status tolerance; copy ("adopt") every unmatched one into the other doc
/// so both docs segment into the same sequences.
pub fn scm_align_boundaries(
    pred: &AnnotationDoc,
    reference: &AnnotationDoc,
    taxonomy: &Taxonomy,
    tol: &ToleranceSpec,
) -> Result<BoundaryAlignment> {
    let status_events = |doc: &AnnotationDoc| -> Vec<EventRecord> {
        doc.events
            .iter()
            .filter(|e| taxonomy.status_effect_of(&e.category).is_some())
            .cloned()
            .collect()
    };
    let p_status = status_events(pred);
    let r_status = status_events(reference);

    let kind = |e: &EventRecord| taxonomy.status_effect_of(&e.category);
    let delta_of = |e: &EventRecord| tol.max_delta(&e.category).unwrap_or(0.0);

    let mut adopt_into_ref: Vec<EventRecord> = Vec::new();
    let mut adopt_into_pred: Vec<EventRecord> = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    while i < p_status.len() && j < r_status.len() {
        let (p, r) = (&p_status[i], &r_status[j]);
        let delta = delta_of(p).max(delta_of(r));
        if kind(p) == kind(r) && (p.t - r.t).abs() <= delta {
            i += 1;
            j += 1;
        } else if p.t <= r.t {
            adopt_into_ref.push(p.clone());
            i += 1;
        } else {
            adopt_into_pred.push(r.clone());
            j += 1;
        }
    }
    adopt_into_ref.extend(p_status[i..].iter().cloned());
    adopt_into_pred.extend(r_status[j..].iter().cloned());

    let adopt = |doc: &AnnotationDoc, events: &[EventRecord]| -> AnnotationDoc {
        let mut out = doc.clone();
        for e in events {
            let mut copy = e.clone();
            copy.attributes
                .insert(ADOPTED_ATTR.into(), e.annotator.clone());
            copy.annotator = doc.annotator.clone();
            copy.match_id = doc.match_id.clone();
            out.events.push(copy);
        }
        out.sort_events();
        out
    };

    let pred_aligned = adopt(pred, &adopt_into_pred);
    let ref_aligned = adopt(reference, &adopt_into_ref);

    let compatible = pred.initial_status == reference.initial_status
        && pred_aligned.segment_sequences(taxonomy).is_ok()
        && ref_aligned.segment_sequences(taxonomy).is_ok();

    let (pred_out, ref_out, into_pred, into_ref) = if compatible {
        (
            pred_aligned,
            ref_aligned,
            adopt_into_pred.len(),
            adopt_into_ref.len(),
        )
    } else {
        (pred.clone(), reference.clone(), 0, 0)
    };

    let pred_sequences = pred_out.segment_sequences(taxonomy).unwrap_or_default();
    let ref_sequences = ref_out.segment_sequences(taxonomy).unwrap_or_default();
    if compatible {
        debug_assert_eq!(pred_sequences.len(), ref_sequences.len());
    }

    Ok(BoundaryAlignment {
        pred: pred_out,
        reference: ref_out,
        adopted_into_pred: into_pred,
        adopted_into_ref: into_ref,
        alternation_ok: compatible,
        pred_sequences,
        ref_sequences,
    })
}

/// Sequence consistency matching for one category: align boundaries, count
/// the category per sequence on both sides, and pair k-th with k-th only
/// where the counts agree. See [`scm_match_with_attributes`] for the
/// identity-refined variant.
pub fn scm_match(
    pred: &AnnotationDoc,
    reference: &AnnotationDoc,
    taxonomy: &Taxonomy,
    category: &str,
    tol: &ToleranceSpec,
) -> Result<MatchResult> {
    let alignment = scm_align_boundaries(pred, reference, taxonomy, tol)?;
    scm_match_aligned(&alignment, category, tol, &[])
}

/// SCM with events partitioned by the named attribute values (for example
/// the passing player id) before count checking and order pairing.
pub fn scm_match_with_attributes(
    pred: &AnnotationDoc,
    reference: &AnnotationDoc,
    taxonomy: &Taxonomy,
    category: &str,
    tol: &ToleranceSpec,
    attribute_keys: &[String],
) -> Result<MatchResult> {
    let alignment = scm_align_boundaries(pred, reference, taxonomy, tol)?;
    scm_match_aligned(&alignment, category, tol, attribute_keys)
}

/// SCM on pre-aligned boundaries.
pub fn scm_match_aligned(
    alignment: &BoundaryAlignment,
    category: &str,
    tol: &ToleranceSpec,
    attribute_keys: &[String],
) -> Result<MatchResult> {
    let delta = tol.max_delta(category)?;

    let mut result = MatchResult {
        category: category.to_string(),
        mode: MatchMode::Scm,
        pairs: Vec::new(),
        unmatched_pred: Vec::new(),
        unmatched_ref: Vec::new(),
        excluded_pred: Vec::new(),
        excluded_ref: Vec::new(),
        pred_total: 0,
        ref_total: 0,
        scm: None,
        attribute_errors: Vec::new(),
    };
    let mut stats = ScmStats {
        total_sequences: alignment
            .pred_sequences
            .len()
            .max(alignment.ref_sequences.len()),
        adopted_into_pred: alignment.adopted_into_pred,
        adopted_into_ref: alignment.adopted_into_ref,
        alignment_failed: !alignment.alternation_ok,
        ..ScmStats::default()
    };

    let select =
        |seq: Option<&Sequence>, side: Side, errs: &mut Vec<AttributeError>| -> Vec<EventRecord> {
            let Some(seq) = seq else { return Vec::new() };
            let mut out = Vec::new();
            for e in &seq.events {
                if !Taxonomy::is_same_or_descendant(&e.category, category)
                    || e.attr(ADOPTED_ATTR).is_some()
                {
                    continue;
                }
                if let Some(key) = attribute_keys.iter().find(|k| e.attr(k).is_none()) {
                    errs.push(AttributeError {
                        side,
                        t: e.t,
                        category: e.category.clone(),
                        attribute: key.clone(),
                    });
                    continue;
                }
                out.push(e.clone());
            }
            out
        };

    for k in 0..stats.total_sequences {
        let mut errs = Vec::new();
        let pred_events = select(alignment.pred_sequences.get(k), Side::Pred, &mut errs);
        let ref_events = select(alignment.ref_sequences.get(k), Side::Ref, &mut errs);
        result.attribute_errors.append(&mut errs);
        result.pred_total += pred_events.len();
        result.ref_total += ref_events.len();

        // partition by the attribute tuple; one partition when no keys given
        let partition_key = |e: &EventRecord| -> Vec<String> {
            attribute_keys
                .iter()
                .map(|k| e.attr(k).unwrap_or_default().to_string())
                .collect()
        };
        let mut partitions: BTreeMap<Vec<String>, (Vec<EventRecord>, Vec<EventRecord>)> =
            BTreeMap::new();
        for e in pred_events {
            partitions.entry(partition_key(&e)).or_default().0.push(e);
        }
        for e in ref_events {
            partitions.entry(partition_key(&e)).or_default().1.push(e);
        }

        let mut sequence_consistent = true;
        for (_, (ps, rs)) in partitions {
            if ps.len() == rs.len() {
                stats.consistent_ref_events += rs.len();
                for (p, r) in ps.into_iter().zip(rs) {
                    let within = (p.t - r.t).abs() <= delta;
                    result.pairs.push(MatchedPair {
                        pred: p,
                        reference: r,
                        within_tolerance: within,
                    });
                }
            } else {
                sequence_consistent = false;
                result.excluded_pred.extend(ps);
                result.excluded_ref.extend(rs);
            }
        }
        if sequence_consistent {
            stats.consistent_sequences += 1;
        }
    }

    stats.total_ref_events = result.ref_total;
    result.scm = Some(stats);
    Ok(result)
}

// ---------------------------------------------------------------------------
// report aggregation
// ---------------------------------------------------------------------------

/// One line of a metric report; counts are kept so rows can be re-aggregated.
#[derive(Debug, Clone, Serialize)]
pub struct MetricRow {
    pub category: String,
    pub mode: MatchMode,
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
    pub precision_num: usize,
    pub precision_den: usize,
    pub recall_num: usize,
    pub recall_den: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    /// SCM: reference events in consistent sequences / all reference events.
    pub consistency: Option<f64>,
    pub consistent_sequences: Option<usize>,
    pub total_sequences: Option<usize>,
    pub adopted_boundaries: Option<usize>,
}

/// Aggregated precision/recall/F1 per category and mode.
#[derive(Debug, Clone, Serialize, Default)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ap: Vec<ApReport>,
}

/// Merge match results into a report, summing counts over results that
/// share a category and mode.
pub fn report(results: &[MatchResult]) -> MetricReport {
    let mut acc: BTreeMap<(String, MatchMode), Vec<&MatchResult>> = BTreeMap::new();
    for r in results {
        acc.entry((r.category.clone(), r.mode)).or_default().push(r);
    }

    let mut rows = Vec::new();
    for ((category, mode), group) in acc {
        let sum = |f: &dyn Fn(&MatchResult) -> usize| -> usize { group.iter().map(|r| f(r)).sum() };
        let (p_num, p_den) = (
            sum(&|r| r.precision_counts().0),
            sum(&|r| r.precision_counts().1),
        );
        let (r_num, r_den) = (sum(&|r| r.recall_counts().0), sum(&|r| r.recall_counts().1));
        let precision = ratio((p_num, p_den));
        let recall = ratio((r_num, r_den));
        let scm_sum = |f: &dyn Fn(&ScmStats) -> usize| -> Option<usize> {
            group
                .iter()
                .map(|r| r.scm.as_ref().map(f))
                .collect::<Option<Vec<_>>>()
                .map(|v| v.into_iter().sum())
        };
        let consistency = match (
            scm_sum(&|s| s.consistent_ref_events),
            scm_sum(&|s| s.total_ref_events),
        ) {
            (Some(n), Some(d)) => ratio((n, d)),
            _ => None,
        };
        rows.push(MetricRow {
            category,
            mode,
            tp: sum(&|r| r.tp()),
            fp: sum(&|r| r.fp()),
            fn_count: sum(&|r| r.fn_count()),
            precision_num: p_num,
            precision_den: p_den,
            recall_num: r_num,
            recall_den: r_den,
            precision,
            recall,
            f1: f1_of(precision, recall),
            consistency,
            consistent_sequences: scm_sum(&|s| s.consistent_sequences),
            total_sequences: scm_sum(&|s| s.total_sequences),
            adopted_boundaries: scm_sum(&|s| s.adopted_into_pred + s.adopted_into_ref),
        });
    }

    MetricReport {
        rows,
        ap: Vec::new(),
    }
}
