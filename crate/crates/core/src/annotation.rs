//! Annotation documents: parsing, validation, and structural queries.
//!
//! The native event file is line oriented and self describing: one event per
//! line as whitespace-separated `name=value` tokens, `#` comment lines, and
//! an optional `#!` directive line carrying document metadata:
//!
//! ```text
//! #! match_id=m1 annotator=a1 segment=0.000..300.000 fps=25.000 initial_status=inactive
//! # a comment
//! t=5.000 category=static_ball_action/kick-off player=h7
//! ```
//!
//! `t` and `category` are required per event; `annotator` and `match_id`
//! default to the document metadata; every other token is kept as an opaque
//! attribute. A comma-separated import profile with a `t_seconds,category,...`
//! header is also accepted. Canonical serialization sorts events and prints
//! timestamps with three decimals, so parse -> serialize -> parse is the
//! identity.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::taxonomy::{AttributeKind, PathGroup, StatusEffect, Taxonomy};

/// Game status between two status-changing events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameState {
    Active,
    Inactive,
}

impl GameState {
    pub fn as_str(self) -> &'static str {
        match self {
            GameState::Active => "active",
            GameState::Inactive => "inactive",
        }
    }
}

/// One spotted event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    /// Timestamp in seconds from the start of the recording.
    pub t: f64,
    /// Taxonomy node id.
    pub category: String,
    pub attributes: BTreeMap<String, String>,
    pub annotator: String,
    pub match_id: String,
}

impl EventRecord {
    pub fn new(t: f64, category: impl Into<String>) -> Self {
        EventRecord {
            t,
            category: category.into(),
            attributes: BTreeMap::new(),
            annotator: String::new(),
            match_id: String::new(),
        }
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(name.into(), value.into());
        self
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }

    fn sort_key(&self) -> (f64, &str, &BTreeMap<String, String>) {
        (self.t, &self.category, &self.attributes)
    }
}

/// A half-open-ish labeled time interval; `start < end`.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub state: String,
}

impl Interval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// One span of active play plus the events inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub index: usize,
    pub interval: Interval,
    pub events: Vec<EventRecord>,
}

/// An ordered collection of events for one match segment.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationDoc {
    pub match_id: String,
    pub annotator: String,
    /// `[t_begin, t_end]` in seconds.
    pub segment: (f64, f64),
    pub fps: Option<f64>,
    pub initial_status: GameState,
    pub initial_possession: Option<String>,
    pub events: Vec<EventRecord>,
}

/// A rule violation found by [`AnnotationDoc::validate`]. Violations are
/// data, not errors: a doc with violations still parses and serializes.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    UnknownCategory {
        t: f64,
        category: String,
    },
    MissingAttribute {
        t: f64,
        category: String,
        attribute: String,
    },
    InvalidAttributeValue {
        t: f64,
        category: String,
        attribute: String,
        value: String,
    },
    /// Two events from one exclusion group at the same instant.
    ExclusionClash {
        t: f64,
        first: String,
        second: String,
    },
    /// Consecutive status events with the same direction.
    StatusAlternation {
        t: f64,
        category: String,
    },
    /// Possession assigned to the possessing team again.
    PossessionRepeat {
        t: f64,
        team: String,
    },
}

impl Violation {
    pub fn rule(&self) -> &'static str {
        match self {
            Violation::UnknownCategory { .. } => "unknown-category",
            Violation::MissingAttribute { .. } => "missing-attribute",
            Violation::InvalidAttributeValue { .. } => "invalid-attribute-value",
            Violation::ExclusionClash { .. } => "exclusion-clash",
            Violation::StatusAlternation { .. } => "status-alternation",
            Violation::PossessionRepeat { .. } => "possession-repeat",
        }
    }

    pub fn timestamp(&self) -> f64 {
        match self {
            Violation::UnknownCategory { t, .. }
            | Violation::MissingAttribute { t, .. }
            | Violation::InvalidAttributeValue { t, .. }
            | Violation::ExclusionClash { t, .. }
            | Violation::StatusAlternation { t, .. }
            | Violation::PossessionRepeat { t, .. } => *t,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={:.3} {}: ", self.timestamp(), self.rule())?;
        match self {
            Violation::UnknownCategory { category, .. } => write!(f, "`{category}`"),
            Violation::MissingAttribute {
                category,
                attribute,
                ..
            } => write!(f, "`{category}` lacks required `{attribute}`"),
            Violation::InvalidAttributeValue {
                category,
                attribute,
                value,
                ..
            } => write!(
                f,
                "`{category}` attribute `{attribute}`=`{value}` does not parse"
            ),
            Violation::ExclusionClash { first, second, .. } => {
                write!(f, "`{first}` and `{second}` are mutually exclusive")
            }
            Violation::StatusAlternation { category, .. } => {
                write!(f, "`{category}` does not alternate the game status")
            }
            Violation::PossessionRepeat { team, .. } => {
                write!(f, "possession assigned to `{team}` twice in a row")
            }
        }
    }
}

impl AnnotationDoc {
    pub fn new(
        match_id: impl Into<String>,
        annotator: impl Into<String>,
        t_begin: f64,
        t_end: f64,
    ) -> Self {
        AnnotationDoc {
            match_id: match_id.into(),
            annotator: annotator.into(),
            segment: (t_begin, t_end),
            fps: None,
            initial_status: GameState::Inactive,
            initial_possession: None,
            events: Vec::new(),
        }
    }

    /// Append an event, inheriting doc-level annotator/match id when the
    /// record leaves them empty. Call [`sort_events`](Self::sort_events)
    /// after a batch of pushes.
    pub fn push_event(&mut self, mut event: EventRecord) {
        if event.annotator.is_empty() {
            event.annotator = self.annotator.clone();
        }
        if event.match_id.is_empty() {
            event.match_id = self.match_id.clone();
        }
        self.events.push(event);
    }

    /// Sort into the canonical order: by timestamp, ties by category id.
    pub fn sort_events(&mut self) {
        self.events.sort_by(|a, b| {
            let (ta, ca, aa) = a.sort_key();
            let (tb, cb, ab) = b.sort_key();
            ta.total_cmp(&tb)
                .then_with(|| ca.cmp(cb))
                .then_with(|| aa.cmp(ab))
        });
    }

    /// Integer key for timestamp equality: frame index when fps is known,
    /// milliseconds otherwise (matching the 3-decimal canonical precision).
    pub fn time_key(&self, t: f64) -> i64 {
        match self.fps {
            Some(fps) => (t * fps).round() as i64,
            None => (t * 1000.0).round() as i64,
        }
    }

    /// Strict frame-accuracy check: events whose timestamp is not an fps
    /// multiple within 1e-6 of a frame. Empty when fps is unknown.
    pub fn off_grid_events(&self) -> Vec<&EventRecord> {
        let Some(fps) = self.fps else {
            return Vec::new();
        };
        self.events
            .iter()
            .filter(|e| {
                let frames = e.t * fps;
                (frames - frames.round()).abs() > 1e-6
            })
            .collect()
    }

    /// Events whose category equals `category` or lies in its subtree.
    pub fn events_of(&self, category: &str) -> Vec<&EventRecord> {
        self.events
            .iter()
            .filter(|e| Taxonomy::is_same_or_descendant(&e.category, category))
            .collect()
    }

    /// Distinct category ids present in the doc, sorted.
    pub fn categories(&self) -> Vec<String> {
        let mut cats: Vec<String> = self.events.iter().map(|e| e.category.clone()).collect();
        cats.sort();
        cats.dedup();
        cats
    }

    // -- parsing -------------------------------------------------------------

    /// Parse either format, sniffing from the first non-comment line.
    pub fn parse(document: &str) -> Result<AnnotationDoc> {
        for line in document.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return if line.split(',').next().unwrap_or("").contains('=') {
                Self::parse_str(document)
            } else {
                Self::parse_csv(document)
            };
        }
        // Only comments/directives: still a valid (possibly empty) doc.
        Self::parse_str(document)
    }

    /// Parse the native `name=value` line format.
    pub fn parse_str(document: &str) -> Result<AnnotationDoc> {
        let mut doc = AnnotationDoc::new("", "", 0.0, 0.0);
        let mut segment_seen = false;
        let mut max_t: f64 = 0.0;

        for (idx, raw) in document.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(directive) = line.strip_prefix("#!") {
                for (key, value) in parse_tokens(directive, lineno)? {
                    match key {
                        "match_id" => doc.match_id = value.to_string(),
                        "annotator" => doc.annotator = value.to_string(),
                        "fps" => {
                            doc.fps = Some(parse_number(value, lineno, "fps")?);
                        }
                        "segment" => {
                            let (a, b) = value.split_once("..").ok_or_else(|| Error::Parse {
                                line: lineno,
                                message: format!("segment `{value}` is not `begin..end`"),
                            })?;
                            doc.segment = (
                                parse_number(a, lineno, "segment begin")?,
                                parse_number(b, lineno, "segment end")?,
                            );
                            segment_seen = true;
                        }
                        "initial_status" => {
                            doc.initial_status = match value {
                                "active" => GameState::Active,
                                "inactive" => GameState::Inactive,
                                other => {
                                    return Err(Error::Parse {
                                        line: lineno,
                                        message: format!(
                                            "initial_status `{other}` is not active/inactive"
                                        ),
                                    })
                                }
                            };
                        }
                        "initial_possession" => {
                            doc.initial_possession = Some(value.to_string());
                        }
                        _ => {} // unknown directives are ignored
                    }
                }
                continue;
            }
            if line.starts_with('#') {
                continue;
            }

            let mut t: Option<f64> = None;
            let mut category: Option<String> = None;
            let mut record = EventRecord::new(0.0, "");
            for (key, value) in parse_tokens(line, lineno)? {
                match key {
                    "t" => t = Some(parse_number(value, lineno, "t")?),
                    "category" => category = Some(value.to_string()),
                    "annotator" => record.annotator = value.to_string(),
                    "match_id" => record.match_id = value.to_string(),
                    other => {
                        record
                            .attributes
                            .insert(other.to_string(), value.to_string());
                    }
                }
            }
            let t = t.ok_or_else(|| Error::Parse {
                line: lineno,
                message: "event line has no t= field".into(),
            })?;
            if t < 0.0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("negative timestamp {t}"),
                });
            }
            record.t = t;
            record.category = category.ok_or_else(|| Error::Parse {
                line: lineno,
                message: "event line has no category= field".into(),
            })?;
            max_t = max_t.max(t);
            doc.push_event(record);
        }

        if !segment_seen {
            doc.segment = (0.0, max_t);
        }
        doc.sort_events();
        Ok(doc)
    }

    /// Parse the comma-separated import profile. The header must name
    /// `t_seconds` and `category`; extra columns become attributes.
    pub fn parse_csv(document: &str) -> Result<AnnotationDoc> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(document.as_bytes());

        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .iter()
            .map(|h| h.to_string())
            .collect();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let t_col = col("t_seconds").ok_or_else(|| Error::Parse {
            line: 1,
            message: "header lacks t_seconds column".into(),
        })?;
        let cat_col = col("category").ok_or_else(|| Error::Parse {
            line: 1,
            message: "header lacks category column".into(),
        })?;
        let ann_col = col("annotator");
        let match_col = col("match_id");

        let mut doc = AnnotationDoc::new("", "", 0.0, 0.0);
        let mut max_t: f64 = 0.0;
        for row in reader.records() {
            let row = row.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                message: e.to_string(),
            })?;
            let lineno = row.position().map(|p| p.line() as usize).unwrap_or(0);
            let t: f64 = parse_number(row.get(t_col).unwrap_or(""), lineno, "t_seconds")?;
            if t < 0.0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("negative timestamp {t}"),
                });
            }
            let mut record = EventRecord::new(t, row.get(cat_col).unwrap_or("").to_string());
            if let Some(c) = ann_col {
                record.annotator = row.get(c).unwrap_or("").to_string();
            }
            if let Some(c) = match_col {
                record.match_id = row.get(c).unwrap_or("").to_string();
            }
            for (i, header) in headers.iter().enumerate() {
                if i == t_col || i == cat_col || Some(i) == ann_col || Some(i) == match_col {
                    continue;
                }
                let value = row.get(i).unwrap_or("");
                if !value.is_empty() {
                    record.attributes.insert(header.clone(), value.to_string());
                }
            }
            max_t = max_t.max(t);
            doc.events.push(record);
        }

        // Doc-level ids from the rows when they are uniform.
        let uniform = |get: fn(&EventRecord) -> &str| -> String {
            let mut values = doc.events.iter().map(get).filter(|v| !v.is_empty());
            match values.next() {
                Some(first)
                    if doc
                        .events
                        .iter()
                        .map(get)
                        .all(|v| v == first || v.is_empty()) =>
                {
                    first.to_string()
                }
                _ => String::new(),
            }
        };
        doc.annotator = uniform(|e| &e.annotator);
        doc.match_id = uniform(|e| &e.match_id);
        doc.segment = (0.0, max_t);
        let (ann, mid) = (doc.annotator.clone(), doc.match_id.clone());
        for e in &mut doc.events {
            if e.annotator.is_empty() {
                e.annotator = ann.clone();
            }
            if e.match_id.is_empty() {
                e.match_id = mid.clone();
            }
        }
        doc.sort_events();
        Ok(doc)
    }

    /// Canonical native-format serialization: directive line first, then one
    /// sorted event per line with three-decimal timestamps and sorted
    /// attributes.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "#! match_id={} annotator={} segment={:.3}..{:.3} initial_status={}",
            self.match_id,
            self.annotator,
            self.segment.0,
            self.segment.1,
            self.initial_status.as_str()
        ));
        if let Some(fps) = self.fps {
            out.push_str(&format!(" fps={fps:.3}"));
        }
        if let Some(p) = &self.initial_possession {
            out.push_str(&format!(" initial_possession={p}"));
        }
        out.push('\n');

        let mut events = self.events.clone();
        events.sort_by(|a, b| {
            let (ta, ca, aa) = a.sort_key();
            let (tb, cb, ab) = b.sort_key();
            ta.total_cmp(&tb)
                .then_with(|| ca.cmp(cb))
                .then_with(|| aa.cmp(ab))
        });
        for e in &events {
            out.push_str(&format!("t={:.3} category={}", e.t, e.category));
            for (name, value) in &e.attributes {
                out.push_str(&format!(" {name}={value}"));
            }
            if e.annotator != self.annotator {
                out.push_str(&format!(" annotator={}", e.annotator));
            }
            if e.match_id != self.match_id {
                out.push_str(&format!(" match_id={}", e.match_id));
            }
            out.push('\n');
        }
        out
    }

    // -- validation ----------------------------------------------------------

    /// Check the doc against a taxonomy. Returns all violations found;
    /// an empty list means the doc is well-formed.
    pub fn validate(&self, taxonomy: &Taxonomy) -> Vec<Violation> {
        let mut out = Vec::new();

        for e in &self.events {
            let Some(_) = taxonomy.node(&e.category) else {
                out.push(Violation::UnknownCategory {
                    t: e.t,
                    category: e.category.clone(),
                });
                continue;
            };
            for def in taxonomy.effective_attributes(&e.category) {
                match e.attr(&def.name) {
                    None if def.required => out.push(Violation::MissingAttribute {
                        t: e.t,
                        category: e.category.clone(),
                        attribute: def.name.clone(),
                    }),
                    Some(value) if !attribute_value_ok(def.kind, value) => {
                        out.push(Violation::InvalidAttributeValue {
                            t: e.t,
                            category: e.category.clone(),
                            attribute: def.name.clone(),
                            value: value.to_string(),
                        })
                    }
                    _ => {}
                }
            }
        }

        // Exclusion clashes at equal timestamps (after fps snapping).
        let mut by_slot: BTreeMap<(usize, i64), &EventRecord> = BTreeMap::new();
        for e in &self.events {
            if let Some(group) = taxonomy.exclusion_group_of(&e.category) {
                let slot = (group, self.time_key(e.t));
                if let Some(first) = by_slot.get(&slot) {
                    out.push(Violation::ExclusionClash {
                        t: e.t,
                        first: first.category.clone(),
                        second: e.category.clone(),
                    });
                } else {
                    by_slot.insert(slot, e);
                }
            }
        }

        // Game-status alternation.
        let mut state = self.initial_status;
        for e in &self.events {
            match taxonomy.status_effect_of(&e.category) {
                Some(StatusEffect::Activate) => {
                    if state == GameState::Active {
                        out.push(Violation::StatusAlternation {
                            t: e.t,
                            category: e.category.clone(),
                        });
                    }
                    state = GameState::Active;
                }
                Some(StatusEffect::Deactivate) => {
                    if state == GameState::Inactive {
                        out.push(Violation::StatusAlternation {
                            t: e.t,
                            category: e.category.clone(),
                        });
                    }
                    state = GameState::Inactive;
                }
                None => {}
            }
        }

        // Possession must change teams.
        let mut holder = self.initial_possession.clone();
        for e in &self.events {
            let Some(node) = taxonomy.node(&e.category) else {
                continue;
            };
            if node.path_group != PathGroup::Possession {
                continue;
            }
            if let Some(team) = e.attr("team") {
                if holder.as_deref() == Some(team) {
                    out.push(Violation::PossessionRepeat {
                        t: e.t,
                        team: team.to_string(),
                    });
                }
                holder = Some(team.to_string());
            }
        }

        out.sort_by(|a, b| a.timestamp().total_cmp(&b.timestamp()));
        out
    }

    // -- intervals and sequences ----------------------------------------------

    /// Derive the interval tiling implied by the change events of one path
    /// group. For `game_status` the tiling alternates active/inactive; for
    /// `possession` intervals carry the possessing team.
    pub fn derive_intervals(
        &self,
        taxonomy: &Taxonomy,
        path_group: PathGroup,
    ) -> Result<Vec<Interval>> {
        let (t_begin, t_end) = self.segment;
        let mut intervals = Vec::new();

        match path_group {
            PathGroup::GameStatus => {
                let mut state = self.initial_status;
                let mut cursor = t_begin;
                for e in &self.events {
                    let Some(effect) = taxonomy.status_effect_of(&e.category) else {
                        continue;
                    };
                    if e.t < t_begin || e.t > t_end {
                        continue;
                    }
                    let next = match effect {
                        StatusEffect::Activate => GameState::Active,
                        StatusEffect::Deactivate => GameState::Inactive,
                    };
                    if next == state {
                        return Err(Error::StatusAlternation {
                            t: e.t,
                            detail: format!("`{}` while already {}", e.category, state.as_str()),
                        });
                    }
                    if e.t > cursor {
                        intervals.push(Interval {
                            start: cursor,
                            end: e.t,
                            state: state.as_str().to_string(),
                        });
                    }
                    cursor = cursor.max(e.t);
                    state = next;
                }
                if t_end > cursor {
                    intervals.push(Interval {
                        start: cursor,
                        end: t_end,
                        state: state.as_str().to_string(),
                    });
                }
            }
            PathGroup::Possession => {
                let mut state = self
                    .initial_possession
                    .clone()
                    .or_else(|| self.infer_initial_possession(taxonomy))
                    .unwrap_or_else(|| "unknown".to_string());
                let mut cursor = t_begin;
                for e in &self.events {
                    let Some(node) = taxonomy.node(&e.category) else {
                        continue;
                    };
                    if node.path_group != PathGroup::Possession {
                        continue;
                    }
                    let Some(team) = e.attr("team") else { continue };
                    if e.t < t_begin || e.t > t_end || team == state {
                        continue;
                    }
                    if e.t > cursor {
                        intervals.push(Interval {
                            start: cursor,
                            end: e.t,
                            state: state.clone(),
                        });
                    }
                    cursor = cursor.max(e.t);
                    state = team.to_string();
                }
                if t_end > cursor {
                    intervals.push(Interval {
                        start: cursor,
                        end: t_end,
                        state,
                    });
                }
            }
            other => {
                return Err(Error::TaxonomyConfig(format!(
                    "derive_intervals is defined for game_status and possession, not {other:?}"
                )))
            }
        }

        Ok(intervals)
    }

    /// With two teams in play, the team before the first possession change
    /// is the other one.
    fn infer_initial_possession(&self, taxonomy: &Taxonomy) -> Option<String> {
        let teams: Vec<&str> = self
            .events
            .iter()
            .filter(|e| {
                taxonomy
                    .node(&e.category)
                    .is_some_and(|n| n.path_group == PathGroup::Possession)
            })
            .filter_map(|e| e.attr("team"))
            .collect();
        let mut distinct: Vec<&str> = teams.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() == 2 {
            let first = teams.first()?;
            distinct.iter().find(|t| *t != first).map(|t| t.to_string())
        } else {
            None
        }
    }

    /// Split the doc into sequences, one per active interval. An event at
    /// exactly an activation time joins the sequence it opens; an event at
    /// exactly a deactivation time joins the sequence it closes.
    pub fn segment_sequences(&self, taxonomy: &Taxonomy) -> Result<Vec<Sequence>> {
        let intervals = self.derive_intervals(taxonomy, PathGroup::GameStatus)?;
        let active: Vec<&Interval> = intervals.iter().filter(|i| i.state == "active").collect();

        let mut sequences: Vec<Sequence> = active
            .iter()
            .enumerate()
            .map(|(index, iv)| Sequence {
                index,
                interval: (*iv).clone(),
                events: Vec::new(),
            })
            .collect();

        for e in &self.events {
            let opening = sequences
                .iter()
                .position(|s| s.interval.start == e.t)
                .or_else(|| {
                    sequences
                        .iter()
                        .position(|s| s.interval.start < e.t && e.t < s.interval.end)
                })
                .or_else(|| sequences.iter().position(|s| s.interval.end == e.t));
            if let Some(idx) = opening {
                sequences[idx].events.push(e.clone());
            }
        }
        Ok(sequences)
    }
}

fn attribute_value_ok(kind: AttributeKind, value: &str) -> bool {
    match kind {
        AttributeKind::String | AttributeKind::PlayerId => true,
        AttributeKind::Number => value.parse::<f64>().is_ok(),
        AttributeKind::PixelCoordinate => value
            .split_once(',')
            .is_some_and(|(x, y)| x.parse::<f64>().is_ok() && y.parse::<f64>().is_ok()),
    }
}

fn parse_tokens(line: &str, lineno: usize) -> Result<Vec<(&str, &str)>> {
    line.split_whitespace()
        .map(|token| {
            token.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("token `{token}` is not name=value"),
            })
        })
        .collect()
}

fn parse_number(text: &str, lineno: usize, what: &str) -> Result<f64> {
    text.trim().parse::<f64>().map_err(|_| Error::Parse {
        line: lineno,
        message: format!("{what} `{text}` is not a number"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soccer() -> Taxonomy {
        Taxonomy::builtin("soccer").unwrap()
    }

    const PASS: &str = "ball_release/intentional/pass/successful_untouched";
    const SHOT: &str = "ball_release/intentional/shot/blocked";
    const KICK_OFF: &str = "static_ball_action/kick-off";
    const BALL_OUT: &str = "referee_decision/ball_out_of_field";

    #[test]
    fn parse_two_line_file() {
        let text = format!(
            "#! match_id=m1 annotator=a1 segment=0.000..10.000\n\
             t=3.00 category={PASS}\n\
             t=4.20 category=ball_reception\n"
        );
        let doc = AnnotationDoc::parse(&text).unwrap();
        assert_eq!(doc.events.len(), 2);
        assert_eq!(doc.events[0].t, 3.0);
        assert_eq!(doc.events[0].category, PASS);
        assert_eq!(doc.events[1].category, "ball_reception");
        assert_eq!(doc.events[0].annotator, "a1");
        assert_eq!(doc.segment, (0.0, 10.0));
    }

    #[test]
    fn parse_empty_file_with_header() {
        let doc =
            AnnotationDoc::parse("#! match_id=m annotator=a segment=0..5\n# nothing\n").unwrap();
        assert!(doc.events.is_empty());
        assert_eq!(doc.match_id, "m");
    }

    #[test]
    fn parse_resorts_out_of_order_events() {
        let text = format!(
            "t=9.0 category=ball_reception\nt=1.0 category={PASS}\nt=5.0 category=ball_reception\n"
        );
        let doc = AnnotationDoc::parse(&text).unwrap();
        let ts: Vec<f64> = doc.events.iter().map(|e| e.t).collect();
        let mut sorted = ts.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(ts, sorted);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = AnnotationDoc::parse_str("t=1.0 category=x\nbogus line\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let err = AnnotationDoc::parse_str("t=-4 category=x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");

        let err = AnnotationDoc::parse_str("t=abc category=x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn parse_preserves_unknown_fields_as_attributes() {
        let doc =
            AnnotationDoc::parse_str("t=1.0 category=ball_reception player=h7 custom=v\n").unwrap();
        assert_eq!(doc.events[0].attr("player"), Some("h7"));
        assert_eq!(doc.events[0].attr("custom"), Some("v"));
    }

    #[test]
    fn parse_csv_profile() {
        let text = "# comment\nt_seconds,category,player,annotator\n4.2,ball_reception,h3,a1\n3.0,ball_reception,h2,a1\n";
        let doc = AnnotationDoc::parse(text).unwrap();
        assert_eq!(doc.events.len(), 2);
        assert_eq!(doc.events[0].t, 3.0);
        assert_eq!(doc.events[0].attr("player"), Some("h2"));
        assert_eq!(doc.annotator, "a1");
    }

    #[test]
    fn round_trip_is_identity() {
        let text = format!(
            "#! match_id=m annotator=a segment=0.000..100.000 fps=25.000 initial_status=inactive\n\
             t=5.000 category={KICK_OFF}\n\
             t=7.160 category={PASS} player=h7\n\
             t=60.000 category={BALL_OUT}\n"
        );
        let doc = AnnotationDoc::parse(&text).unwrap();
        let canon = doc.to_canonical_string();
        let doc2 = AnnotationDoc::parse(&canon).unwrap();
        assert_eq!(doc, doc2);
        assert_eq!(canon, doc2.to_canonical_string());
    }

    fn sample_doc() -> AnnotationDoc {
        let mut doc = AnnotationDoc::new("m1", "a1", 0.0, 100.0);
        doc.fps = Some(25.0);
        doc.push_event(EventRecord::new(5.0, KICK_OFF));
        doc.push_event(EventRecord::new(5.0, PASS).with_attr("player", "h1"));
        doc.push_event(EventRecord::new(30.0, PASS).with_attr("player", "h4"));
        doc.push_event(EventRecord::new(60.0, BALL_OUT));
        doc.sort_events();
        doc
    }

    #[test]
    fn validate_well_formed_doc_is_clean() {
        assert!(sample_doc().validate(&soccer()).is_empty());
    }

    #[test]
    fn strict_mode_finds_off_grid_timestamps() {
        let mut doc = sample_doc(); // fps 25: grid step 0.04
        assert!(doc.off_grid_events().is_empty());
        doc.push_event(EventRecord::new(10.01, "ball_reception"));
        doc.sort_events();
        let off: Vec<f64> = doc.off_grid_events().iter().map(|e| e.t).collect();
        assert_eq!(off, vec![10.01]);
        doc.fps = None;
        assert!(doc.off_grid_events().is_empty());
    }

    #[test]
    fn validate_flags_exclusion_clash() {
        let mut doc = AnnotationDoc::new("m", "a", 0.0, 10.0);
        doc.push_event(EventRecord::new(5.0, PASS));
        doc.push_event(EventRecord::new(5.0, SHOT));
        doc.sort_events();
        let violations = doc.validate(&soccer());
        assert_eq!(violations.len(), 1);
        assert!(matches!(&violations[0], Violation::ExclusionClash { t, .. } if *t == 5.0));
    }

    #[test]
    fn validate_flags_broken_alternation() {
        let mut doc = AnnotationDoc::new("m", "a", 0.0, 30.0);
        doc.initial_status = GameState::Active;
        doc.push_event(EventRecord::new(10.0, "referee_decision/foul"));
        doc.push_event(EventRecord::new(20.0, "referee_decision/foul"));
        doc.sort_events();
        let violations = doc.validate(&soccer());
        assert_eq!(violations.len(), 1);
        assert!(
            matches!(&violations[0], Violation::StatusAlternation { t, .. } if *t == 20.0),
            "{violations:?}"
        );
    }

    #[test]
    fn validate_flags_missing_required_attribute() {
        let mut doc = AnnotationDoc::new("m", "a", 0.0, 10.0);
        doc.push_event(EventRecord::new(3.0, "possession_change"));
        let violations = doc.validate(&soccer());
        assert!(matches!(
            &violations[0],
            Violation::MissingAttribute { attribute, .. } if attribute == "team"
        ));
    }

    #[test]
    fn validate_flags_possession_repeat() {
        let mut doc = AnnotationDoc::new("m", "a", 0.0, 50.0);
        doc.push_event(EventRecord::new(10.0, "possession_change").with_attr("team", "B"));
        doc.push_event(EventRecord::new(20.0, "possession_change").with_attr("team", "B"));
        doc.sort_events();
        let violations = doc.validate(&soccer());
        assert_eq!(violations.len(), 1);
        assert!(matches!(&violations[0], Violation::PossessionRepeat { team, .. } if team == "B"));
    }

    #[test]
    fn derive_status_intervals() {
        let mut doc = AnnotationDoc::new("m", "a", 0.0, 100.0);
        doc.push_event(EventRecord::new(5.0, KICK_OFF));
        doc.push_event(EventRecord::new(60.0, BALL_OUT));
        doc.sort_events();
        let intervals = doc
            .derive_intervals(&soccer(), PathGroup::GameStatus)
            .unwrap();
        assert_eq!(
            intervals,
            vec![
                Interval {
                    start: 0.0,
                    end: 5.0,
                    state: "inactive".into()
                },
                Interval {
                    start: 5.0,
                    end: 60.0,
                    state: "active".into()
                },
                Interval {
                    start: 60.0,
                    end: 100.0,
                    state: "inactive".into()
                },
            ]
        );
    }

    #[test]
    fn derive_intervals_without_events_covers_segment() {
        let mut doc = AnnotationDoc::new("m", "a", 0.0, 42.0);
        doc.initial_status = GameState::Active;
        let intervals = doc
            .derive_intervals(&soccer(), PathGroup::GameStatus)
            .unwrap();
        assert_eq!(
            intervals,
            vec![Interval {
                start: 0.0,
                end: 42.0,
                state: "active".into()
            }]
        );
    }

    #[test]
    fn derive_possession_intervals() {
        let mut doc = AnnotationDoc::new("m", "a", 0.0, 30.0);
        doc.initial_possession = Some("A".into());
        doc.push_event(EventRecord::new(10.0, "possession_change").with_attr("team", "B"));
        let intervals = doc
            .derive_intervals(&soccer(), PathGroup::Possession)
            .unwrap();
        assert_eq!(
            intervals,
            vec![
                Interval {
                    start: 0.0,
                    end: 10.0,
                    state: "A".into()
                },
                Interval {
                    start: 10.0,
                    end: 30.0,
                    state: "B".into()
                },
            ]
        );
    }

    #[test]
    fn intervals_tile_the_segment() {
        let doc = sample_doc();
        let intervals = doc
            .derive_intervals(&soccer(), PathGroup::GameStatus)
            .unwrap();
        assert_eq!(intervals.first().unwrap().start, doc.segment.0);
        assert_eq!(intervals.last().unwrap().end, doc.segment.1);
        for pair in intervals.windows(2) {
            assert_eq!(pair[0].end, pair[1].start);
            assert!(pair[0].duration() > 0.0);
        }
    }

    #[test]
    fn sequences_contain_their_events() {
        let doc = sample_doc();
        let seqs = doc.segment_sequences(&soccer()).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].interval.start, 5.0);
        assert_eq!(seqs[0].interval.end, 60.0);
        // kick-off@5, set-piece pass@5, pass@30, and the closing ball-out@60
        assert_eq!(seqs[0].events.len(), 4);
    }

    #[test]
    fn no_active_interval_means_no_sequences() {
        let doc = AnnotationDoc::new("m", "a", 0.0, 10.0);
        assert!(doc.segment_sequences(&soccer()).unwrap().is_empty());
    }

    #[test]
    fn set_piece_events_join_the_opening_sequence() {
        let doc = sample_doc();
        let seqs = doc.segment_sequences(&soccer()).unwrap();
        let at_five: Vec<&str> = seqs[0]
            .events
            .iter()
            .filter(|e| e.t == 5.0)
            .map(|e| e.category.as_str())
            .collect();
        assert_eq!(at_five, vec![PASS, KICK_OFF]);
    }

    #[test]
    fn event_at_deactivation_joins_closing_sequence() {
        let mut doc = sample_doc();
        doc.push_event(EventRecord::new(60.0, "ball_reception"));
        doc.sort_events();
        let seqs = doc.segment_sequences(&soccer()).unwrap();
        assert!(seqs[0]
            .events
            .iter()
            .any(|e| e.category == "ball_reception"));
    }
}
