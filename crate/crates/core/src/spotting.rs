//! Turn per-frame classifier score streams into spotted events.
//!
//! The classifier itself is out of scope; this module consumes its output
//! from a tabular file, applies per-category 1-D non-maximum suppression
//! and a confidence threshold, and grid-searches both hyper-parameters
//! against a reference annotation on the NNM F1 score.
//!
//! Score-stream file format: an optional `#! fps=... offset=...` directive,
//! then a comma-separated header `frame,<category>,...` and one row per
//! frame with consecutive frame indices starting at 0:
//!
//! ```text
//! #! fps=25.000 offset=0.000
//! frame,ball_reception,ball_release/intentional/pass
//! 0,0.01,0.00
//! 1,0.83,0.02
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationDoc, EventRecord};
use crate::error::{Error, Result};
use crate::metrics::{self, ToleranceSpec};
use crate::taxonomy::Taxonomy;

/// Per-frame confidence values for a set of categories. Scores are
/// multi-label: several events can peak at the same frame, so per-frame
/// values need not sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreStream {
    pub fps: f64,
    /// Time of frame 0 in seconds.
    pub offset: f64,
    pub categories: Vec<String>,
    /// `scores[frame][category_index]`, each in [0, 1].
    pub scores: Vec<Vec<f64>>,
}

impl ScoreStream {
    pub fn new(fps: f64, offset: f64, categories: Vec<String>) -> Self {
        ScoreStream {
            fps,
            offset,
            categories,
            scores: Vec::new(),
        }
    }

    pub fn frames(&self) -> usize {
        self.scores.len()
    }

    pub fn frame_time(&self, frame: usize) -> f64 {
        self.offset + frame as f64 / self.fps
    }

    /// Segment covered by the stream.
    pub fn span(&self) -> (f64, f64) {
        let end = if self.scores.is_empty() {
            self.offset
        } else {
            self.frame_time(self.frames() - 1)
        };
        (self.offset, end)
    }

    fn column(&self, category: &str) -> Result<usize> {
        self.categories
            .iter()
            .position(|c| c == category)
            .ok_or_else(|| Error::UnknownStreamCategory(category.to_string()))
    }

    /// Build a stream of delta spikes from an annotation: one frame of
    /// confidence `height` at each event of each listed category, zero
    /// elsewhere. The exact inverse of [`spot`] for small nms windows.
    pub fn delta_spikes(
        doc: &AnnotationDoc,
        categories: &[String],
        fps: f64,
        height: f64,
    ) -> ScoreStream {
        let (t_begin, t_end) = doc.segment;
        let frames = ((t_end - t_begin) * fps).round() as usize + 1;
        let mut stream = ScoreStream::new(fps, t_begin, categories.to_vec());
        stream.scores = vec![vec![0.0; categories.len()]; frames];
        for (ci, cat) in categories.iter().enumerate() {
            for e in doc.events_of(cat) {
                let frame = ((e.t - t_begin) * fps).round() as usize;
                if frame < frames {
                    stream.scores[frame][ci] = stream.scores[frame][ci].max(height);
                }
            }
        }
        stream
    }

    /// Serialize in the documented file format.
    pub fn to_file_string(&self) -> String {
        let mut out = format!("#! fps={:.3} offset={:.3}\n", self.fps, self.offset);
        out.push_str("frame");
        for c in &self.categories {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, row) in self.scores.iter().enumerate() {
            out.push_str(&i.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Parse and validate a score-stream file.
pub fn load_scores(document: &str) -> Result<ScoreStream> {
    let mut fps = 25.0;
    let mut offset = 0.0;
    let mut header: Option<Vec<String>> = None;
    let mut scores: Vec<Vec<f64>> = Vec::new();
    let mut next_frame = 0usize;

    for (idx, raw) in document.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(directive) = line.strip_prefix("#!") {
            for token in directive.split_whitespace() {
                let (key, value) = token.split_once('=').ok_or_else(|| Error::Parse {
                    line: lineno,
                    message: format!("token `{token}` is not name=value"),
                })?;
                let parsed = value.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("{key} `{value}` is not a number"),
                })?;
                match key {
                    "fps" => fps = parsed,
                    "offset" => offset = parsed,
                    _ => {}
                }
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }

        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match &header {
            None => {
                if fields.first() != Some(&"frame") || fields.len() < 2 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "header must be frame,<category>,...".into(),
                    });
                }
                header = Some(fields[1..].iter().map(|s| s.to_string()).collect());
            }
            Some(categories) => {
                let frame: usize = fields[0].parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("frame index `{}` is not an integer", fields[0]),
                })?;
                if frame != next_frame {
                    return Err(Error::NonUniformFrames(next_frame));
                }
                if fields.len() != categories.len() + 1 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!(
                            "expected {} score columns, got {}",
                            categories.len(),
                            fields.len() - 1
                        ),
                    });
                }
                let mut row = Vec::with_capacity(categories.len());
                for (ci, field) in fields[1..].iter().enumerate() {
                    let v: f64 = field.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("score `{field}` is not a number"),
                    })?;
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::ScoreOutOfRange {
                            frame,
                            category: categories[ci].clone(),
                            score: v,
                        });
                    }
                    row.push(v);
                }
                scores.push(row);
                next_frame += 1;
            }
        }
    }

    let categories = header.ok_or(Error::Parse {
        line: 0,
        message: "score file has no header row".into(),
    })?;
    let mut stream = ScoreStream::new(fps, offset, categories);
    stream.scores = scores;
    Ok(stream)
}

/// Greedy 1-D non-maximum suppression on one category: repeatedly take the
/// highest remaining score (earlier frame on ties), emit its frame time,
/// and suppress every frame within `w_nms / 2` around it. Zero-confidence
/// frames are never peaks. Output is sorted by time.
pub fn nms_peaks(stream: &ScoreStream, category: &str, w_nms: f64) -> Result<Vec<(f64, f64)>> {
    if w_nms.is_nan() || w_nms <= 0.0 {
        return Err(Error::BadNmsWindow(w_nms));
    }
    let col = stream.column(category)?;

    let mut candidates: Vec<(usize, f64)> = stream
        .scores
        .iter()
        .enumerate()
        .map(|(i, row)| (i, row[col]))
        .filter(|(_, s)| *s > 0.0)
        .collect();
    // highest score first, earlier frame on ties
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let radius = (w_nms / 2.0 * stream.fps + 1e-9).floor() as usize;
    let mut suppressed = vec![false; stream.frames()];
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    for (frame, score) in candidates {
        if suppressed[frame] {
            continue;
        }
        peaks.push((frame, score));
        let lo = frame.saturating_sub(radius);
        let hi = (frame + radius).min(stream.frames().saturating_sub(1));
        for s in &mut suppressed[lo..=hi] {
            *s = true;
        }
    }

    peaks.sort_unstable_by_key(|(frame, _)| *frame);
    Ok(peaks
        .into_iter()
        .map(|(frame, score)| (stream.frame_time(frame), score))
        .collect())
}

/// Per-category NMS window and confidence threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryParams {
    /// NMS window length in seconds (suppression radius is half of it).
    pub w_nms: f64,
    /// Confidence threshold; peaks with score >= tau survive.
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpotterConfig {
    pub categories: BTreeMap<String, CategoryParams>,
}

impl SpotterConfig {
    pub fn set(&mut self, category: impl Into<String>, w_nms: f64, tau: f64) {
        self.categories
            .insert(category.into(), CategoryParams { w_nms, tau });
    }

    pub fn params(&self, category: &str) -> Result<CategoryParams> {
        self.categories
            .get(category)
            .copied()
            .ok_or_else(|| Error::CategoryNotConfigured(category.to_string()))
    }
}

fn detect(stream: &ScoreStream, category: &str, params: CategoryParams) -> Result<Vec<(f64, f64)>> {
    Ok(nms_peaks(stream, category, params.w_nms)?
        .into_iter()
        .filter(|(_, score)| *score >= params.tau)
        .collect())
}

/// Spot events for every category of the stream: NMS peaks filtered by the
/// category threshold, merged into a sorted annotation. Peak confidences are
/// kept in the `score` attribute.
pub fn spot(
    stream: &ScoreStream,
    config: &SpotterConfig,
    taxonomy: &Taxonomy,
) -> Result<AnnotationDoc> {
    let (t_begin, t_end) = stream.span();
    let mut doc = AnnotationDoc::new("", "spotter", t_begin, t_end);
    doc.fps = Some(stream.fps);

    for category in &stream.categories {
        if !taxonomy.contains(category) {
            return Err(Error::UnknownNode(category.clone()));
        }
        let params = config.params(category)?;
        for (t, score) in detect(stream, category, params)? {
            doc.push_event(
                EventRecord::new(t, category.clone()).with_attr("score", format!("{score}")),
            );
        }
    }
    doc.sort_events();
    Ok(doc)
}

/// Hyper-parameter grid for [`tune`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub w_nms: Vec<f64>,
    pub tau: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            w_nms: vec![0.2, 0.5, 1.0, 2.0, 4.0, 8.0],
            tau: (1..=9).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

/// Exhaustive per-category grid search maximizing the NNM F1 score against
/// a reference annotation. Ties (including undefined F1) resolve toward the
/// larger nms window, then the larger threshold: fewer, more confident
/// detections.
pub fn tune(
    stream: &ScoreStream,
    reference: &AnnotationDoc,
    categories: &[String],
    tol: &ToleranceSpec,
    space: &SearchSpace,
) -> Result<SpotterConfig> {
    if space.w_nms.is_empty() || space.tau.is_empty() {
        return Err(Error::EmptySearchSpace);
    }

    let mut config = SpotterConfig::default();
    for category in categories {
        stream.column(category)?;
        let mut best: Option<(f64, f64, f64)> = None; // (f1, w_nms, tau)
        for &w_nms in &space.w_nms {
            for &tau in &space.tau {
                let params = CategoryParams { w_nms, tau };
                let mut pred = AnnotationDoc::new(
                    reference.match_id.clone(),
                    "tuner",
                    reference.segment.0,
                    reference.segment.1,
                );
                pred.fps = Some(stream.fps);
                for (t, score) in detect(stream, category, params)? {
                    pred.push_event(
                        EventRecord::new(t, category.clone())
                            .with_attr("score", format!("{score}")),
                    );
                }
                pred.sort_events();
                let m = metrics::nnm_match(&pred, reference, category, tol)?;
                let f1 = m.f1().unwrap_or(0.0);
                let key = (f1, w_nms, tau);
                let better = match best {
                    None => true,
                    Some(b) => (key.0, key.1, key.2) > (b.0, b.1, b.2),
                };
                if better {
                    best = Some(key);
                }
            }
        }
        let (_, w_nms, tau) = best.expect("non-empty grid");
        config.set(category.clone(), w_nms, tau);
    }
    Ok(config)
}
