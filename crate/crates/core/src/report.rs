//! Plain-text rendering of metric and agreement reports.
//!
//! The machine-readable form of every report is its JSON serialization;
//! these helpers produce the aligned tables for humans: one row per event
//! category, NN and SC columns, consistency percentages in brackets.

use std::fmt::Write as _;

use crate::agreement::AgreementReport;
use crate::metrics::{MatchMode, MetricReport, MetricRow, PairwiseTiou, ToleranceSpec};

fn pct(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{:.1}", x * 100.0),
        None => "-".to_string(),
    }
}

fn pct_with_consistency(v: Option<f64>, consistency: Option<f64>) -> String {
    match (v, consistency) {
        (Some(x), Some(c)) => format!("{:.1} ({:.0})", x * 100.0, c * 100.0),
        (Some(x), None) => format!("{:.1}", x * 100.0),
        (None, _) => "-".to_string(),
    }
}

fn row_of<'a>(rows: &'a [MetricRow], category: &str, mode: MatchMode) -> Option<&'a MetricRow> {
    rows.iter()
        .find(|r| r.category == category && r.mode == mode)
}

/// Aligned table with NN and SC columns per category. SC cells carry the
/// percentage of reference events from consistent sequences in brackets.
pub fn render_metric_table(report: &MetricReport, tol: Option<&ToleranceSpec>) -> String {
    let mut categories: Vec<&str> = report.rows.iter().map(|r| r.category.as_str()).collect();
    categories.sort_unstable();
    categories.dedup();

    let name_width = categories
        .iter()
        .map(|c| c.len())
        .chain(std::iter::once("event".len()))
        .max()
        .unwrap_or(8)
        + 2;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_width$} {:>7} {:>8} {:>8} {:>15} {:>15}",
        "event", "w_eval", "NN prc", "NN rec", "SC prc", "SC rec",
    );
    for category in categories {
        let w = tol
            .and_then(|t| t.window(category).ok())
            .map(|w| format!("{w:.2}"))
            .unwrap_or_else(|| "-".to_string());
        let nn = row_of(&report.rows, category, MatchMode::Nnm);
        let sc = row_of(&report.rows, category, MatchMode::Scm);
        let _ = writeln!(
            out,
            "{:<name_width$} {:>7} {:>8} {:>8} {:>15} {:>15}",
            category,
            w,
            nn.map_or("-".into(), |r| pct(r.precision)),
            nn.map_or("-".into(), |r| pct(r.recall)),
            sc.map_or("-".into(), |r| pct_with_consistency(
                r.precision,
                r.consistency
            )),
            sc.map_or("-".into(), |r| pct_with_consistency(
                r.recall,
                r.consistency
            )),
        );
    }

    if !report.ap.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<name_width$} {:>10} {:>8}", "event", "w_eval", "AP");
        for ap in &report.ap {
            for (w, value) in &ap.per_tolerance {
                let _ = writeln!(
                    out,
                    "{:<name_width$} {:>10.2} {:>8}",
                    ap.category,
                    w,
                    pct(*value)
                );
            }
            let _ = writeln!(
                out,
                "{:<name_width$} {:>10} {:>8}",
                ap.category,
                "average",
                pct(ap.average)
            );
        }
    }
    out
}

/// Temporal-IoU lines, `mean +- std` over annotator pairs.
pub fn render_tiou(sections: &[PairwiseTiou]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:>12} {:>8} {:>10}",
        "duration state", "mean tIoU", "std", "n-way"
    );
    for s in sections {
        let label = format!("{} ({})", s.state, s.path_group);
        let mean = s
            .mean
            .map(|m| format!("{m:.2}"))
            .unwrap_or_else(|| "-".to_string());
        let std = s
            .std
            .map(|v| format!("{v:.2}"))
            .unwrap_or_else(|| "-".to_string());
        let agg = s
            .aggregate
            .map(|v| format!("{v:.2}"))
            .unwrap_or_else(|| "-".to_string());
        let _ = writeln!(out, "{label:<24} {mean:>12} {std:>8} {agg:>10}");
    }
    out
}

/// Mean-human table plus the per-annotator breakdown and the full directed
/// pair matrix per category.
pub fn render_agreement(report: &AgreementReport) -> String {
    let mut out = String::new();

    let name_width = report
        .categories
        .iter()
        .map(|c| c.len())
        .chain(std::iter::once(5))
        .max()
        .unwrap_or(8)
        + 2;

    let _ = writeln!(out, "mean human performance");
    let _ = writeln!(
        out,
        "{:<name_width$} {:>8} {:>8} {:>15} {:>15}",
        "event", "NN prc", "NN rec", "SC prc", "SC rec",
    );
    for category in &report.categories {
        let nn = report.mean(category, MatchMode::Nnm);
        let sc = report.mean(category, MatchMode::Scm);
        let _ = writeln!(
            out,
            "{:<name_width$} {:>8} {:>8} {:>15} {:>15}",
            category,
            nn.map_or("-".into(), |s| pct(s.precision)),
            nn.map_or("-".into(), |s| pct(s.recall)),
            sc.map_or("-".into(), |s| pct_with_consistency(
                s.precision,
                s.consistency
            )),
            sc.map_or("-".into(), |s| pct_with_consistency(
                s.recall,
                s.consistency
            )),
        );
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "individual performance (mean over references)");
    for category in &report.categories {
        let _ = writeln!(out, "  {category}");
        for ind in report.individual.iter().filter(|i| i.category == *category) {
            let mode = match ind.mode {
                MatchMode::Nnm => "NN",
                MatchMode::Scm => "SC",
            };
            let _ = writeln!(
                out,
                "    {:<16} {}  prc {:>6}  rec {:>6}{}",
                ind.annotator,
                mode,
                pct(ind.scores.precision),
                pct(ind.scores.recall),
                match (ind.mode, ind.scores.consistency) {
                    (MatchMode::Scm, c @ Some(_)) => format!("  cons {:>4}", pct(c)),
                    _ => String::new(),
                }
            );
        }
    }

    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "pair matrix (NN precision, pred row vs reference column)"
    );
    for category in &report.categories {
        let _ = writeln!(out, "  {category}");
        let _ = write!(out, "    {:<12}", "");
        for reference in &report.annotators {
            let _ = write!(out, " {reference:>10}");
        }
        let _ = writeln!(out);
        for pred in &report.annotators {
            let _ = write!(out, "    {pred:<12}");
            for reference in &report.annotators {
                let cell = if pred == reference {
                    "-".to_string()
                } else {
                    report
                        .comparison(pred, reference, category, MatchMode::Nnm)
                        .map_or("-".to_string(), |s| pct(s.precision))
                };
                let _ = write!(out, " {cell:>10}");
            }
            let _ = writeln!(out);
        }
    }

    out
}
