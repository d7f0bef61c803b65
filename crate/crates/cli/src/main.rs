//! Command-line surface: validate, eval, agree, spot, tune, synth, timeline.
//!
//! Every command is deterministic given its inputs (no wall clock, no
//! unseeded randomness), and every output directory receives a
//! `manifest.json` recording the command, input digests, and parameters.

mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use spoteval::agreement;
use spoteval::annotation::AnnotationDoc;
use spoteval::metrics::{self, ApReport, MatchResult, MetricReport, PairwiseTiou};
use spoteval::report as render;
use spoteval::spotting::{self, SearchSpace, SpotterConfig};
use spoteval::synthgen::{self, MatchModel, NoiseModel};
use spoteval::taxonomy::{PathGroup, Taxonomy};
use spoteval::timeline;

use util::{OutDir, RunManifest};

#[derive(Parser)]
#[command(
    name = "spoteval",
    version,
    about = "Evaluation toolkit for spotted events in invasion games"
)]
struct Cli {
    /// Bundled sport name (soccer, handball) or a taxonomy config path.
    #[arg(long, global = true, default_value = "soccer")]
    taxonomy: String,
    /// Output directory; reports land here together with manifest.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for generator commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for pairwise evaluation (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Nn,
    Sc,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TimelineFormat {
    Svg,
    Json,
    Both,
}

#[derive(Args)]
struct MatchingOpts {
    /// Roll both docs up to this tree depth before matching.
    #[arg(long)]
    level: Option<usize>,
    /// Tolerance file (TOML) overriding the taxonomy w_eval defaults.
    #[arg(long)]
    tol: Option<PathBuf>,
    /// Comma-separated attribute names refining SCM (e.g. player).
    #[arg(long, value_delimiter = ',')]
    attrs: Vec<String>,
    /// Per-category window override, e.g. --w-eval ball_release=0.6.
    #[arg(long = "w-eval", value_name = "CATEGORY=SECONDS")]
    w_eval: Vec<String>,
    /// Categories to evaluate (default: every category in the inputs).
    #[arg(long = "category")]
    categories: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check an annotation file against the taxonomy rules.
    Validate {
        events: PathBuf,
        /// Also require timestamps to sit on the fps frame grid.
        #[arg(long)]
        strict: bool,
    },
    /// Compare a prediction against a reference annotation.
    Eval {
        pred: PathBuf,
        reference: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Both)]
        mode: Mode,
        #[command(flatten)]
        matching: MatchingOpts,
        /// Window lengths for temporal AP (needs score attributes).
        #[arg(long, value_delimiter = ',')]
        ap_tolerances: Vec<f64>,
    },
    /// Inter-annotator agreement across several annotation files.
    Agree {
        docs: Vec<PathBuf>,
        /// Treat this file as the only predictor (one-vs-many protocol).
        #[arg(long)]
        one: Option<PathBuf>,
        #[command(flatten)]
        matching: MatchingOpts,
    },
    /// Turn a classifier score stream into spotted events.
    Spot {
        #[arg(long)]
        scores: PathBuf,
        /// Spotter config (TOML) with per-category w_nms and tau.
        #[arg(long)]
        config: PathBuf,
    },
    /// Grid-search w_nms and tau per category on the NNM F1 score.
    Tune {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Search space (TOML with w_nms = [...] and tau = [...]).
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        tol: Option<PathBuf>,
        #[arg(long = "category")]
        categories: Vec<String>,
    },
    /// Generate synthetic matches and noisy annotator variants.
    Synth {
        /// Match model (TOML); defaults to the bundled soccer-like model.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Noise model (TOML) for the variants.
        #[arg(long)]
        noise: Option<PathBuf>,
        /// Number of noisy variants to emit.
        #[arg(long, default_value_t = 0)]
        variants: usize,
        /// Emit the NNM-positive-bias demonstration instead.
        #[arg(long)]
        bias_demo: bool,
    },
    /// Export an annotator timeline as SVG and/or JSON.
    Timeline {
        docs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = TimelineFormat::Both)]
        format: TimelineFormat,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(util::classify(&err))
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let taxonomy = util::load_taxonomy(&cli.taxonomy)?;
    match cli.command {
        Command::Validate { events, strict } => cmd_validate(&taxonomy, &events, strict),
        Command::Eval {
            pred,
            reference,
            mode,
            matching,
            ap_tolerances,
        } => cmd_eval(
            &taxonomy,
            cli.out.as_deref(),
            &pred,
            &reference,
            mode,
            &matching,
            &ap_tolerances,
        ),
        Command::Agree {
            docs,
            one,
            matching,
        } => cmd_agree(
            &taxonomy,
            cli.out.as_deref(),
            &docs,
            one.as_deref(),
            &matching,
        ),
        Command::Spot { scores, config } => {
            cmd_spot(&taxonomy, cli.out.as_deref(), &scores, &config)
        }
        Command::Tune {
            scores,
            reference,
            grid,
            tol,
            categories,
        } => cmd_tune(
            &taxonomy,
            cli.out.as_deref(),
            &scores,
            &reference,
            grid.as_deref(),
            tol.as_deref(),
            &categories,
        ),
        Command::Synth {
            model,
            noise,
            variants,
            bias_demo,
        } => cmd_synth(
            &taxonomy,
            cli.out.as_deref(),
            cli.seed,
            model.as_deref(),
            noise.as_deref(),
            variants,
            bias_demo,
        ),
        Command::Timeline { docs, format } => cmd_timeline(cli.out.as_deref(), &docs, format),
    }
}

// ---------------------------------------------------------------------------

fn cmd_validate(taxonomy: &Taxonomy, events: &std::path::Path, strict: bool) -> Result<u8> {
    let doc = util::load_doc(events)?;
    let violations = doc.validate(taxonomy);
    for v in &violations {
        println!("{v}");
    }
    let mut off_grid = 0usize;
    if strict {
        for e in doc.off_grid_events() {
            println!(
                "t={:.3} off-frame-grid: `{}` is not an fps multiple",
                e.t, e.category
            );
            off_grid += 1;
        }
    }
    if violations.is_empty() && off_grid == 0 {
        println!("ok: {} events, 0 violations", doc.events.len());
        Ok(0)
    } else {
        Ok(util::EXIT_DOMAIN)
    }
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct EvalOutput {
    tiou: Vec<PairwiseTiou>,
    metrics: MetricReport,
}

fn apply_window_overrides(
    tol: &mut spoteval::ToleranceSpec,
    taxonomy: &Taxonomy,
    overrides: &[String],
) -> Result<()> {
    for entry in overrides {
        let Some((category, value)) = entry.split_once('=') else {
            bail!("--w-eval `{entry}` is not CATEGORY=SECONDS");
        };
        if category != "*" && !taxonomy.contains(category) {
            return Err(spoteval::Error::UnknownNode(category.to_string()).into());
        }
        let w: f64 = value
            .parse()
            .with_context(|| format!("--w-eval `{entry}`: bad number"))?;
        tol.set(category.to_string(), w);
    }
    Ok(())
}

/// Categories present in the docs and known to the taxonomy; unknown ones
/// are skipped with a warning (they are reported by `validate`).
fn union_categories(docs: &[&AnnotationDoc], taxonomy: &Taxonomy) -> Vec<String> {
    let mut cats: Vec<String> = docs.iter().flat_map(|d| d.categories()).collect();
    cats.sort();
    cats.dedup();
    cats.retain(|c| {
        let known = taxonomy.contains(c);
        if !known {
            eprintln!("warning: skipping unknown category `{c}`");
        }
        known
    });
    cats
}

fn warn_violations(taxonomy: &Taxonomy, doc: &AnnotationDoc, label: &str) {
    let violations = doc.validate(taxonomy);
    if !violations.is_empty() {
        eprintln!(
            "warning: {label} has {} violation(s); run `spoteval validate` for details",
            violations.len()
        );
    }
}

/// Interval-IoU sections for the docs; duration metrics need a common
/// segment, so differing segments skip the section with a warning instead
/// of failing the whole evaluation.
fn tiou_sections(taxonomy: &Taxonomy, docs: &[&AnnotationDoc]) -> Result<Vec<PairwiseTiou>> {
    if docs.iter().any(|d| d.segment != docs[0].segment) {
        eprintln!("warning: segments differ; skipping temporal-IoU section");
        return Ok(Vec::new());
    }
    let mut sections = Vec::new();
    sections.push(metrics::pairwise_tiou(
        docs,
        taxonomy,
        PathGroup::GameStatus,
        "active",
    )?);
    let mut states: Vec<String> = Vec::new();
    for doc in docs {
        for iv in doc.derive_intervals(taxonomy, PathGroup::Possession)? {
            if iv.state != "unknown" && !states.contains(&iv.state) {
                states.push(iv.state);
            }
        }
    }
    states.sort();
    for state in states {
        sections.push(metrics::pairwise_tiou(
            docs,
            taxonomy,
            PathGroup::Possession,
            &state,
        )?);
    }
    Ok(sections)
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    taxonomy: &Taxonomy,
    out: Option<&std::path::Path>,
    pred_path: &std::path::Path,
    ref_path: &std::path::Path,
    mode: Mode,
    matching: &MatchingOpts,
    ap_tolerances: &[f64],
) -> Result<u8> {
    let mut pred = util::load_doc(pred_path)?;
    let mut reference = util::load_doc(ref_path)?;
    warn_violations(taxonomy, &pred, "prediction");
    warn_violations(taxonomy, &reference, "reference");

    if let Some(depth) = matching.level {
        pred = taxonomy.rollup(&pred, depth)?;
        reference = taxonomy.rollup(&reference, depth)?;
    }
    let mut tol = util::load_tolerances(taxonomy, matching.tol.as_deref())?;
    apply_window_overrides(&mut tol, taxonomy, &matching.w_eval)?;
    let categories = if matching.categories.is_empty() {
        union_categories(&[&pred, &reference], taxonomy)
    } else {
        matching.categories.clone()
    };

    let mut results: Vec<MatchResult> = Vec::new();
    let alignment = metrics::scm_align_boundaries(&pred, &reference, taxonomy, &tol)?;
    for category in &categories {
        if mode != Mode::Sc {
            results.push(metrics::nnm_match(&pred, &reference, category, &tol)?);
        }
        if mode != Mode::Nn {
            let sc = metrics::scm_match_aligned(&alignment, category, &tol, &matching.attrs)?;
            for err in &sc.attribute_errors {
                eprintln!(
                    "warning: `{}` at t={:.3} lacks attribute `{}`; excluded from SCM",
                    err.category, err.t, err.attribute
                );
            }
            results.push(sc);
        }
    }
    let mut metric_report = metrics::report(&results);

    if !ap_tolerances.is_empty() {
        let mut ap_rows: Vec<ApReport> = Vec::new();
        for category in &categories {
            ap_rows.push(metrics::average_precision_over_tolerances(
                &pred,
                &reference,
                category,
                ap_tolerances,
                tol.mode,
            )?);
        }
        metric_report.ap = ap_rows;
    }

    let tiou = tiou_sections(taxonomy, &[&pred, &reference])?;

    let text = format!(
        "{}\n{}",
        render::render_tiou(&tiou),
        render::render_metric_table(&metric_report, Some(&tol))
    );
    print!("{text}");

    if let Some(dir) = out {
        let outdir = OutDir::create(dir)?;
        let mut manifest = RunManifest::new(Some(taxonomy));
        manifest.add_input(pred_path)?;
        manifest.add_input(ref_path)?;
        manifest.tolerances = Some(tol.clone());
        let output = EvalOutput {
            tiou,
            metrics: metric_report,
        };
        outdir.write(
            &mut manifest,
            "report.json",
            &serde_json::to_string_pretty(&output)?,
        )?;
        outdir.write(&mut manifest, "report.txt", &text)?;
        outdir.finish(&manifest)?;
    }
    Ok(0)
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct AgreeOutput {
    tiou: Vec<PairwiseTiou>,
    agreement: agreement::AgreementReport,
}

fn cmd_agree(
    taxonomy: &Taxonomy,
    out: Option<&std::path::Path>,
    doc_paths: &[PathBuf],
    one: Option<&std::path::Path>,
    matching: &MatchingOpts,
) -> Result<u8> {
    let docs: Vec<AnnotationDoc> = doc_paths
        .iter()
        .map(|p| util::load_doc(p))
        .collect::<Result<_>>()?;
    for (path, doc) in doc_paths.iter().zip(&docs) {
        warn_violations(taxonomy, doc, &path.display().to_string());
    }
    let mut tol = util::load_tolerances(taxonomy, matching.tol.as_deref())?;
    apply_window_overrides(&mut tol, taxonomy, &matching.w_eval)?;

    let (report, all_docs) = match one {
        Some(pred_path) => {
            let pred = util::load_doc(pred_path)?;
            if docs.is_empty() {
                bail!("--one needs at least one reference doc");
            }
            let categories = if matching.categories.is_empty() {
                let mut refs: Vec<&AnnotationDoc> = docs.iter().collect();
                refs.push(&pred);
                union_categories(&refs, taxonomy)
            } else {
                matching.categories.clone()
            };
            let rep = agreement::one_vs_many(
                &pred,
                &docs,
                taxonomy,
                &categories,
                &tol,
                matching.level,
                &matching.attrs,
            )?;
            let mut all = vec![pred];
            all.extend(docs);
            (rep, all)
        }
        None => {
            let categories = if matching.categories.is_empty() {
                union_categories(&docs.iter().collect::<Vec<_>>(), taxonomy)
            } else {
                matching.categories.clone()
            };
            let rep = agreement::pairwise_agreement(
                &docs,
                taxonomy,
                &categories,
                &tol,
                matching.level,
                &matching.attrs,
            )?;
            (rep, docs)
        }
    };

    let refs: Vec<&AnnotationDoc> = all_docs.iter().collect();
    let tiou = tiou_sections(taxonomy, &refs)?;

    let text = format!(
        "{}\n{}",
        render::render_tiou(&tiou),
        render::render_agreement(&report)
    );
    print!("{text}");

    if let Some(dir) = out {
        let outdir = OutDir::create(dir)?;
        let mut manifest = RunManifest::new(Some(taxonomy));
        for p in doc_paths {
            manifest.add_input(p)?;
        }
        if let Some(p) = one {
            manifest.add_input(p)?;
        }
        manifest.tolerances = Some(tol.clone());
        let output = AgreeOutput {
            tiou,
            agreement: report,
        };
        outdir.write(
            &mut manifest,
            "agreement.json",
            &serde_json::to_string_pretty(&output)?,
        )?;
        outdir.write(&mut manifest, "agreement.txt", &text)?;
        outdir.finish(&manifest)?;
    }
    Ok(0)
}

// ---------------------------------------------------------------------------

fn cmd_spot(
    taxonomy: &Taxonomy,
    out: Option<&std::path::Path>,
    scores: &std::path::Path,
    config_path: &std::path::Path,
) -> Result<u8> {
    let stream = spotting::load_scores(&std::fs::read_to_string(scores)?)?;
    let config: SpotterConfig = toml::from_str(&std::fs::read_to_string(config_path)?)
        .with_context(|| format!("parsing spotter config `{}`", config_path.display()))?;
    let mut doc = spotting::spot(&stream, &config, taxonomy)?;
    doc.match_id = scores
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    for e in &mut doc.events {
        e.match_id = doc.match_id.clone();
    }
    let text = doc.to_canonical_string();

    match out {
        Some(dir) => {
            let outdir = OutDir::create(dir)?;
            let mut manifest = RunManifest::new(Some(taxonomy));
            manifest.add_input(scores)?;
            manifest.add_input(config_path)?;
            outdir.write(&mut manifest, "spotted.events", &text)?;
            outdir.finish(&manifest)?;
            eprintln!("spotted {} events", doc.events.len());
        }
        None => print!("{text}"),
    }
    Ok(0)
}

fn cmd_tune(
    taxonomy: &Taxonomy,
    out: Option<&std::path::Path>,
    scores: &std::path::Path,
    ref_path: &std::path::Path,
    grid: Option<&std::path::Path>,
    tol_file: Option<&std::path::Path>,
    categories: &[String],
) -> Result<u8> {
    let stream = spotting::load_scores(&std::fs::read_to_string(scores)?)?;
    let reference = util::load_doc(ref_path)?;
    let space: SearchSpace = match grid {
        Some(path) => toml::from_str(&std::fs::read_to_string(path)?)
            .with_context(|| format!("parsing grid `{}`", path.display()))?,
        None => SearchSpace::default(),
    };
    let tol = util::load_tolerances(taxonomy, tol_file)?;
    let categories: Vec<String> = if categories.is_empty() {
        stream.categories.clone()
    } else {
        categories.to_vec()
    };

    let config = spotting::tune(&stream, &reference, &categories, &tol, &space)?;
    let text = toml::to_string_pretty(&config)?;
    print!("{text}");

    if let Some(dir) = out {
        let outdir = OutDir::create(dir)?;
        let mut manifest = RunManifest::new(Some(taxonomy));
        manifest.add_input(scores)?;
        manifest.add_input(ref_path)?;
        if let Some(p) = grid {
            manifest.add_input(p)?;
        }
        manifest.tolerances = Some(tol);
        outdir.write(&mut manifest, "tuned.toml", &text)?;
        outdir.finish(&manifest)?;
    }
    Ok(0)
}

// ---------------------------------------------------------------------------

fn relabel(mut doc: AnnotationDoc, annotator: &str) -> AnnotationDoc {
    let old = doc.annotator.clone();
    doc.annotator = annotator.to_string();
    for e in &mut doc.events {
        if e.annotator == old {
            e.annotator = annotator.to_string();
        }
    }
    doc
}

fn cmd_synth(
    taxonomy: &Taxonomy,
    out: Option<&std::path::Path>,
    seed: u64,
    model_path: Option<&std::path::Path>,
    noise_path: Option<&std::path::Path>,
    variants: usize,
    bias_demo: bool,
) -> Result<u8> {
    if bias_demo {
        let report = synthgen::bias_demo(seed)?;
        let text = report.to_text();
        print!("{text}");
        if let Some(dir) = out {
            let outdir = OutDir::create(dir)?;
            let mut manifest = RunManifest::new(Some(taxonomy));
            manifest.seed = Some(seed);
            outdir.write(&mut manifest, "bias_demo.txt", &text)?;
            outdir.write(
                &mut manifest,
                "bias_demo.json",
                &serde_json::to_string_pretty(&report)?,
            )?;
            outdir.finish(&manifest)?;
        }
        return Ok(0);
    }

    let mut model: MatchModel = match model_path {
        Some(path) => toml::from_str(&std::fs::read_to_string(path)?)
            .with_context(|| format!("parsing match model `{}`", path.display()))?,
        None => MatchModel::for_taxonomy(taxonomy, seed),
    };
    model.seed = seed;
    let base = relabel(synthgen::generate_match(&model, taxonomy)?, "annotator-0");

    let noise_template: NoiseModel = match noise_path {
        Some(path) => toml::from_str(&std::fs::read_to_string(path)?)
            .with_context(|| format!("parsing noise model `{}`", path.display()))?,
        None => NoiseModel::default(),
    };

    match out {
        Some(dir) => {
            let outdir = OutDir::create(dir)?;
            let mut manifest = RunManifest::new(Some(taxonomy));
            manifest.seed = Some(seed);
            if let Some(p) = model_path {
                manifest.add_input(p)?;
            }
            if let Some(p) = noise_path {
                manifest.add_input(p)?;
            }
            outdir.write(&mut manifest, "match.events", &base.to_canonical_string())?;
            for k in 1..=variants {
                let noise = NoiseModel {
                    seed: seed.wrapping_add(k as u64),
                    ..noise_template.clone()
                };
                let variant = relabel(
                    synthgen::perturb(&base, &noise, taxonomy),
                    &format!("annotator-{k}"),
                );
                outdir.write(
                    &mut manifest,
                    &format!("variant-{k}.events"),
                    &variant.to_canonical_string(),
                )?;
            }
            outdir.finish(&manifest)?;
            eprintln!(
                "wrote match.events ({} events) and {} variant(s)",
                base.events.len(),
                variants
            );
        }
        None => {
            if variants > 0 {
                bail!("--variants needs --out DIR to write multiple files");
            }
            print!("{}", base.to_canonical_string());
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------------------

fn cmd_timeline(
    out: Option<&std::path::Path>,
    doc_paths: &[PathBuf],
    format: TimelineFormat,
) -> Result<u8> {
    if doc_paths.is_empty() {
        bail!("timeline needs at least one annotation file");
    }
    let docs: Vec<AnnotationDoc> = doc_paths
        .iter()
        .map(|p| util::load_doc(p))
        .collect::<Result<_>>()?;
    let tl = timeline::build_timeline(&docs);

    match out {
        Some(dir) => {
            let outdir = OutDir::create(dir)?;
            let mut manifest = RunManifest::new(None);
            for p in doc_paths {
                manifest.add_input(p)?;
            }
            if format != TimelineFormat::Svg {
                outdir.write(&mut manifest, "timeline.json", &tl.to_json())?;
            }
            if format != TimelineFormat::Json {
                outdir.write(&mut manifest, "timeline.svg", &tl.to_svg())?;
            }
            outdir.finish(&manifest)?;
        }
        None => match format {
            TimelineFormat::Svg => print!("{}", tl.to_svg()),
            _ => print!("{}", tl.to_json()),
        },
    }
    Ok(0)
}
