//! Timeline export: one lane per annotator, one glyph per event, colored
//! by category. The structured JSON form is the assertion surface for
//! tests; the SVG rendering is derived from it and fully deterministic
//! (category colors come from the sorted category list, not hashes).

use serde::Serialize;

use crate::annotation::AnnotationDoc;

const PALETTE: [&str; 10] = [
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628", "#f781bf", "#999999",
    "#66c2a5", "#fc8d62",
];

#[derive(Debug, Clone, Serialize)]
pub struct TimelineEvent {
    pub t: f64,
    pub category: String,
    pub color: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Lane {
    pub annotator: String,
    pub events: Vec<TimelineEvent>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timeline {
    pub t_begin: f64,
    pub t_end: f64,
    /// Sorted category -> color legend.
    pub legend: Vec<(String, String)>,
    pub lanes: Vec<Lane>,
}

/// Build the timeline structure for a set of docs over the same segment.
pub fn build_timeline(docs: &[AnnotationDoc]) -> Timeline {
    let mut categories: Vec<String> = docs
        .iter()
        .flat_map(|d| d.events.iter().map(|e| e.category.clone()))
        .collect();
    categories.sort();
    categories.dedup();
    let legend: Vec<(String, String)> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), PALETTE[i % PALETTE.len()].to_string()))
        .collect();
    let color_of = |category: &str| -> String {
        legend
            .iter()
            .find(|(c, _)| c == category)
            .map(|(_, col)| col.clone())
            .unwrap_or_else(|| PALETTE[0].to_string())
    };

    let t_begin = docs
        .iter()
        .map(|d| d.segment.0)
        .fold(f64::INFINITY, f64::min);
    let t_end = docs
        .iter()
        .map(|d| d.segment.1)
        .fold(f64::NEG_INFINITY, f64::max);

    let lanes = docs
        .iter()
        .enumerate()
        .map(|(i, d)| Lane {
            annotator: if d.annotator.is_empty() {
                format!("doc{i}")
            } else {
                d.annotator.clone()
            },
            events: d
                .events
                .iter()
                .map(|e| TimelineEvent {
                    t: e.t,
                    category: e.category.clone(),
                    color: color_of(&e.category),
                })
                .collect(),
        })
        .collect();

    Timeline {
        t_begin: if t_begin.is_finite() { t_begin } else { 0.0 },
        t_end: if t_end.is_finite() { t_end } else { 0.0 },
        legend,
        lanes,
    }
}

impl Timeline {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("timeline serializes")
    }

    /// Deterministic standalone SVG: time axis in seconds, one lane per
    /// annotator, one circle per event.
    pub fn to_svg(&self) -> String {
        const WIDTH: f64 = 1000.0;
        const LANE_H: f64 = 36.0;
        const MARGIN_X: f64 = 110.0;
        const MARGIN_Y: f64 = 30.0;

        let span = (self.t_end - self.t_begin).max(1e-9);
        let height = MARGIN_Y * 2.0 + LANE_H * self.lanes.len().max(1) as f64 + 20.0;
        let x = |t: f64| MARGIN_X + (t - self.t_begin) / span * (WIDTH - MARGIN_X - 20.0);

        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">\n"
        ));
        svg.push_str("<style>text{font-family:monospace;font-size:11px}</style>\n");

        // axis with ten ticks
        let axis_y = height - MARGIN_Y + 4.0;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{axis_y}\" x2=\"{}\" y2=\"{axis_y}\" stroke=\"#333\"/>\n",
            x(self.t_begin),
            x(self.t_end)
        ));
        for i in 0..=10 {
            let t = self.t_begin + span * i as f64 / 10.0;
            svg.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{axis_y}\" x2=\"{0}\" y2=\"{1}\" stroke=\"#333\"/>\n",
                x(t),
                axis_y + 4.0
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{t:.0}s</text>\n",
                x(t),
                axis_y + 16.0
            ));
        }

        for (i, lane) in self.lanes.iter().enumerate() {
            let y = MARGIN_Y + LANE_H * i as f64 + LANE_H / 2.0;
            svg.push_str(&format!(
                "<text x=\"8\" y=\"{}\" dominant-baseline=\"middle\">{}</text>\n",
                y,
                xml_escape(&lane.annotator)
            ));
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ddd\"/>\n",
                x(self.t_begin),
                x(self.t_end)
            ));
            for e in &lane.events {
                svg.push_str(&format!(
                    "<circle cx=\"{}\" cy=\"{y}\" r=\"4\" fill=\"{}\"><title>{} @ {:.3}s</title></circle>\n",
                    x(e.t),
                    e.color,
                    xml_escape(&e.category),
                    e.t
                ));
            }
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
