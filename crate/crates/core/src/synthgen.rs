//! Seeded synthetic matches and noisy annotator variants.
//!
//! The generator builds structurally valid annotations (alternating status
//! events, possession changes only on actual turnovers, reception/release
//! chains on a frame grid, set pieces with paired static-ball and release
//! events) so metric properties can be tested against a known ground truth.
//! Everything is driven by a ChaCha stream: equal seeds give byte-identical
//! output after canonical serialization.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationDoc, EventRecord, GameState};
use crate::error::{Error, Result};
use crate::metrics::{self, HalfWidthMode, ToleranceSpec};
use crate::taxonomy::{StatusEffect, Taxonomy};

const PASS_UNTOUCHED: &str = "ball_release/intentional/pass/successful_untouched";

/// Weighted category mixture; weights need not sum to one.
pub type Mixture = Vec<(String, f64)>;

fn mixture(entries: &[(&str, f64)]) -> Mixture {
    entries.iter().map(|(c, w)| (c.to_string(), *w)).collect()
}

/// Parameters of one synthetic match.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchModel {
    /// Segment length in seconds.
    pub duration: f64,
    pub fps: f64,
    /// Inclusive range for the number of active sequences.
    pub sequences: (usize, usize),
    /// Ball events per second of active play.
    pub event_rate_hz: f64,
    /// Release-type mixture; defaults proportional to observed soccer
    /// event counts (passes outnumber shots by roughly 40:1).
    pub release_mixture: Mixture,
    /// Static-ball-action mixture for sequence restarts.
    pub restart_mixture: Mixture,
    /// Referee-decision mixture for sequence ends.
    pub stop_mixture: Mixture,
    pub players_per_team: usize,
    pub seed: u64,
}

impl Default for MatchModel {
    fn default() -> Self {
        MatchModel {
            duration: 300.0,
            fps: 25.0,
            sequences: (3, 6),
            event_rate_hz: 0.8,
            release_mixture: mixture(&[
                ("ball_release/intentional/pass/intercepted", 83.0),
                ("ball_release/intentional/pass/off_target", 175.0),
                ("ball_release/intentional/pass/successful_deflected", 24.0),
                (PASS_UNTOUCHED, 1064.0),
                ("ball_release/intentional/shot/blocked", 17.0),
                ("ball_release/intentional/shot/off_target", 8.0),
                ("ball_release/intentional/shot/successful", 6.0),
                ("ball_release/unintentional/other", 74.0),
                ("ball_release/unintentional/successful_interference", 80.0),
            ]),
            restart_mixture: mixture(&[
                ("static_ball_action/corner", 11.0),
                ("static_ball_action/free-kick", 29.0),
                ("static_ball_action/goal-kick", 18.0),
                ("static_ball_action/penalty", 1.0),
                ("static_ball_action/throw-in", 60.0),
            ]),
            stop_mixture: mixture(&[
                ("referee_decision/ball_out_of_field", 101.0),
                ("referee_decision/foul", 32.0),
                ("referee_decision/goal", 3.0),
                ("referee_decision/other", 5.0),
                ("referee_decision/yellow", 1.0),
            ]),
            players_per_team: 7,
            seed: 0,
        }
    }
}

impl MatchModel {
    pub fn with_seed(seed: u64) -> Self {
        MatchModel {
            seed,
            ..MatchModel::default()
        }
    }

    /// Default model restricted to the categories a taxonomy actually has
    /// (the stock mixtures name soccer leaves; handball lacks corners and
    /// goal-kicks, for example).
    pub fn for_taxonomy(taxonomy: &Taxonomy, seed: u64) -> Self {
        let mut model = MatchModel::with_seed(seed);
        for mix in [
            &mut model.release_mixture,
            &mut model.restart_mixture,
            &mut model.stop_mixture,
        ] {
            mix.retain(|(cat, _)| taxonomy.contains(cat));
        }
        model
    }
}

/// Per-event noise applied by [`perturb`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Std of the Gaussian timestamp jitter for ball/possession events.
    pub jitter_std: f64,
    /// Separate (typically smaller) jitter for status events, since the
    /// SCM boundary adoption depends on them.
    pub status_jitter_std: f64,
    /// Probability of dropping a non-status event.
    pub miss_rate: f64,
    /// Spurious insertions per minute of segment.
    pub spurious_per_minute: f64,
    /// Probability of swapping a category against one of its siblings.
    pub confusion_rate: f64,
    /// Tree depth at which the sibling swap happens (>= 1).
    pub confusion_depth: usize,
    /// Correlated-error mode: shift every event inside a random
    /// sub-interval of this length (seconds) by one draw of `jitter_std`.
    pub block_shift_len: Option<f64>,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            jitter_std: 0.1,
            status_jitter_std: 0.025,
            miss_rate: 0.05,
            spurious_per_minute: 0.5,
            confusion_rate: 0.05,
            confusion_depth: 3,
            block_shift_len: None,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn silent(seed: u64) -> Self {
        NoiseModel {
            jitter_std: 0.0,
            status_jitter_std: 0.0,
            miss_rate: 0.0,
            spurious_per_minute: 0.0,
            confusion_rate: 0.0,
            confusion_depth: 3,
            block_shift_len: None,
            seed,
        }
    }

    pub fn with_seed(seed: u64) -> Self {
        NoiseModel {
            seed,
            ..NoiseModel::default()
        }
    }
}

fn sample_mixture<'a>(mix: &'a Mixture, rng: &mut ChaCha8Rng) -> &'a str {
    let total: f64 = mix.iter().map(|(_, w)| w).sum();
    let mut x = rng.gen::<f64>() * total;
    for (cat, w) in mix {
        x -= w;
        if x <= 0.0 {
            return cat;
        }
    }
    &mix.last().expect("non-empty mixture").0
}

const HOME: &str = "home";
const AWAY: &str = "away";

fn other(team: &str) -> &'static str {
    if team == HOME {
        AWAY
    } else {
        HOME
    }
}

/// Generate a structurally valid synthetic match. The output passes
/// [`AnnotationDoc::validate`] with zero violations for every seed.
pub fn generate_match(model: &MatchModel, taxonomy: &Taxonomy) -> Result<AnnotationDoc> {
    for (name, mix) in [
        ("release", &model.release_mixture),
        ("restart", &model.restart_mixture),
        ("stop", &model.stop_mixture),
    ] {
        if mix.is_empty() {
            return Err(Error::InfeasibleModel(format!("{name} mixture is empty")));
        }
        for (cat, _) in mix {
            if !taxonomy.contains(cat) {
                return Err(Error::UnknownNode(cat.clone()));
            }
        }
    }
    // rate 0 is the bare status skeleton: sequences without ball events
    let chain_enabled = model.event_rate_hz > 0.0;
    let mean_gap = model.fps / model.event_rate_hz;
    if chain_enabled && mean_gap < 2.0 {
        return Err(Error::InfeasibleModel(format!(
            "event rate {} Hz exceeds half the frame rate {}",
            model.event_rate_hz, model.fps
        )));
    }
    if model.sequences.0 == 0 || model.sequences.0 > model.sequences.1 {
        return Err(Error::InfeasibleModel(format!(
            "bad sequence range {:?}",
            model.sequences
        )));
    }
    let total_frames = (model.duration * model.fps).round() as i64;
    let min_block = (6.0 * model.fps) as i64;
    if total_frames < model.sequences.1 as i64 * min_block {
        return Err(Error::InfeasibleModel(format!(
            "duration {}s too short for up to {} sequences",
            model.duration, model.sequences.1
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let n_seq = rng.gen_range(model.sequences.0..=model.sequences.1);
    let block = total_frames / n_seq as i64;
    let edge = (block / 4).min((5.0 * model.fps) as i64).max(1);

    let mut doc = AnnotationDoc::new(
        format!("synthetic-{}", model.seed),
        "gen",
        0.0,
        model.duration,
    );
    doc.fps = Some(model.fps);
    doc.initial_status = GameState::Inactive;

    let pick_player = |team: &str, rng: &mut ChaCha8Rng| -> String {
        let n = rng.gen_range(1..=model.players_per_team);
        format!("{}{}", &team[..1], n)
    };
    let gap = |rng: &mut ChaCha8Rng| -> i64 {
        let mean = mean_gap;
        let lo = (mean / 2.0).max(1.0) as i64;
        let hi = ((mean * 1.5) as i64).max(lo + 1);
        rng.gen_range(lo..=hi)
    };
    let t_of = |frame: i64| frame as f64 / model.fps;

    let mut possession: Option<String> = None;
    for k in 0..n_seq {
        let start = k as i64 * block;
        let end = if k + 1 == n_seq {
            total_frames
        } else {
            (k + 1) as i64 * block
        };
        let activate = start + rng.gen_range(1..=edge);
        let deactivate = end - rng.gen_range(1..=edge);

        // restart: kick-off opens the match, sampled restarts afterwards
        let restart_cat = if k == 0 {
            "static_ball_action/kick-off".to_string()
        } else {
            sample_mixture(&model.restart_mixture, &mut rng).to_string()
        };
        doc.push_event(EventRecord::new(t_of(activate), restart_cat));

        // executing team; emit a possession change when it differs from the
        // team holding the ball before the restart
        let team_flips = possession.is_some() && rng.gen_bool(0.5);
        let mut team: String = match &possession {
            None => HOME.to_string(),
            Some(current) => {
                if team_flips {
                    other(current).to_string()
                } else {
                    current.clone()
                }
            }
        };
        if team_flips {
            doc.push_event(
                EventRecord::new(t_of(activate), "possession_change")
                    .with_attr("team", team.clone()),
            );
        }
        if possession.is_none() {
            doc.initial_possession = Some(team.clone());
        }
        possession = Some(team.clone());

        // set piece: the restart is executed as a ball release at the
        // same instant
        if chain_enabled {
            let mut player = pick_player(&team, &mut rng);
            let mut release_cat = sample_mixture(&model.release_mixture, &mut rng).to_string();
            doc.push_event(
                EventRecord::new(t_of(activate), release_cat.clone())
                    .with_attr("player", player.clone()),
            );

            // reception/release chain until just before the stop event
            let mut cursor = activate;
            loop {
                cursor += gap(&mut rng);
                if cursor >= deactivate {
                    break;
                }
                let (next_team, flipped) = chain_outcome(&release_cat, &team, &mut rng);
                let receiver = loop {
                    let p = pick_player(&next_team, &mut rng);
                    if p != player || next_team != team {
                        break p;
                    }
                };
                doc.push_event(
                    EventRecord::new(t_of(cursor), "ball_reception")
                        .with_attr("player", receiver.clone()),
                );
                if flipped {
                    doc.push_event(
                        EventRecord::new(t_of(cursor), "possession_change")
                            .with_attr("team", next_team.clone()),
                    );
                }
                team = next_team;
                possession = Some(team.clone());
                player = receiver;

                cursor += gap(&mut rng);
                if cursor >= deactivate {
                    break;
                }
                release_cat = sample_mixture(&model.release_mixture, &mut rng).to_string();
                doc.push_event(
                    EventRecord::new(t_of(cursor), release_cat.clone())
                        .with_attr("player", player.clone()),
                );
            }
        }

        let stop_cat = sample_mixture(&model.stop_mixture, &mut rng).to_string();
        doc.push_event(EventRecord::new(t_of(deactivate), stop_cat));
    }

    doc.sort_events();
    debug_assert!(doc.validate(taxonomy).is_empty());
    Ok(doc)
}

/// Where the ball goes after a release: same team keeps it, or the other
/// side gains possession (turnover).
fn chain_outcome(release_cat: &str, team: &str, rng: &mut ChaCha8Rng) -> (String, bool) {
    let keeps = if release_cat.contains("/pass/successful") {
        true
    } else if release_cat.contains("intercepted") || release_cat.contains("successful_interference")
    {
        false
    } else {
        // off-target balls, shots, self-induced losses: either side recovers
        rng.gen_bool(0.5)
    };
    if keeps {
        (team.to_string(), false)
    } else {
        (other(team).to_string(), true)
    }
}

/// Apply seeded per-event noise: deletions, timestamp jitter, sibling label
/// confusion, spurious insertions, and an optional correlated block shift.
/// Status events are never deleted and their jitter is reverted when it
/// would break the alternation; zero noise is the identity.
pub fn perturb(doc: &AnnotationDoc, noise: &NoiseModel, taxonomy: &Taxonomy) -> AnnotationDoc {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let (t_begin, t_end) = doc.segment;
    let fps = doc.fps.unwrap_or(25.0);
    let snap = |t: f64| -> f64 {
        let frame = ((t - t_begin) * fps).round().max(0.0);
        (t_begin + frame / fps).min(t_end)
    };
    let is_status = |cat: &str| taxonomy.status_effect_of(cat).is_some();

    // correlated block shift: one window, one offset
    let block = noise.block_shift_len.filter(|len| *len > 0.0).map(|len| {
        let start = t_begin + rng.gen::<f64>() * (t_end - t_begin - len).max(0.0);
        let shift = Normal::new(0.0, noise.jitter_std.max(1e-9))
            .map(|n| n.sample(&mut rng))
            .unwrap_or(0.0);
        (start, start + len, shift)
    });

    let mut events: Vec<EventRecord> = Vec::with_capacity(doc.events.len());
    for e in &doc.events {
        let status = is_status(&e.category);
        if !status && noise.miss_rate > 0.0 && rng.gen::<f64>() < noise.miss_rate {
            continue;
        }
        let mut out = e.clone();

        let sigma = if status {
            noise.status_jitter_std
        } else {
            noise.jitter_std
        };
        if sigma > 0.0 {
            let dt = Normal::new(0.0, sigma).expect("sigma > 0").sample(&mut rng);
            out.t = snap((out.t + dt).clamp(t_begin, t_end));
        }
        if let Some((bs, be, shift)) = block {
            if out.t >= bs && out.t <= be {
                out.t = snap((out.t + shift).clamp(t_begin, t_end));
            }
        }

        if !status && noise.confusion_rate > 0.0 && rng.gen::<f64>() < noise.confusion_rate {
            if let Some(new_cat) =
                confuse_label(&out.category, noise.confusion_depth, taxonomy, &mut rng)
            {
                out.category = new_cat;
            }
        }
        events.push(out);
    }

    // spurious insertions, uniform over the segment
    let lambda = noise.spurious_per_minute * (t_end - t_begin) / 60.0;
    if lambda > 0.0 && lambda.is_finite() {
        let count = Poisson::new(lambda).expect("lambda > 0").sample(&mut rng) as usize;
        let cats: Vec<String> = {
            let mut c: Vec<String> = doc
                .events
                .iter()
                .filter(|e| !is_status(&e.category))
                .map(|e| e.category.clone())
                .collect();
            c.sort();
            c.dedup();
            c
        };
        for _ in 0..count {
            let t = snap(t_begin + rng.gen::<f64>() * (t_end - t_begin));
            let cat = if cats.is_empty() {
                PASS_UNTOUCHED.to_string()
            } else {
                cats[rng.gen_range(0..cats.len())].clone()
            };
            let mut ev = EventRecord::new(t, cat);
            ev.annotator = doc.annotator.clone();
            ev.match_id = doc.match_id.clone();
            ev.attributes
                .insert("player".into(), format!("x{}", rng.gen_range(1..=9)));
            events.push(ev);
        }
    }

    // revert status jitter when it broke the alternation order
    let original_kinds: Vec<StatusEffect> = doc
        .events
        .iter()
        .filter_map(|e| taxonomy.status_effect_of(&e.category))
        .collect();
    let mut jittered: Vec<(f64, StatusEffect)> = events
        .iter()
        .filter_map(|e| taxonomy.status_effect_of(&e.category).map(|k| (e.t, k)))
        .collect();
    jittered.sort_by(|a, b| a.0.total_cmp(&b.0));
    let new_kinds: Vec<StatusEffect> = jittered.iter().map(|(_, k)| *k).collect();
    if new_kinds != original_kinds {
        let originals: BTreeMap<&str, Vec<f64>> = {
            let mut m: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for e in &doc.events {
                if is_status(&e.category) {
                    m.entry(e.category.as_str()).or_default().push(e.t);
                }
            }
            m
        };
        let mut counters: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &mut events {
            if is_status(&e.category) {
                let idx = counters.entry(e.category.as_str()).or_insert(0);
                if let Some(ts) = originals.get(e.category.as_str()) {
                    if let Some(t) = ts.get(*idx) {
                        e.t = *t;
                    }
                }
                *idx += 1;
            }
        }
    }

    // exclusion clashes introduced by jitter: bump the later event by one
    // frame until its slot is free
    let mut out = doc.clone();
    out.events = events;
    out.sort_events();
    let mut taken: BTreeMap<(usize, i64), ()> = BTreeMap::new();
    for e in &mut out.events {
        let Some(group) = taxonomy.exclusion_group_of(&e.category) else {
            continue;
        };
        let mut key = out_time_key(e.t, t_begin, fps);
        while taken.contains_key(&(group, key)) {
            key += 1;
            e.t = t_begin + key as f64 / fps;
        }
        taken.insert((group, key), ());
    }
    out.sort_events();
    out
}

fn out_time_key(t: f64, t_begin: f64, fps: f64) -> i64 {
    ((t - t_begin) * fps).round() as i64
}

/// Swap the ancestor at `depth` against a random sibling, then pick a
/// random leaf below it. `None` when the node is too shallow or has no
/// sibling.
fn confuse_label(
    category: &str,
    depth: usize,
    taxonomy: &Taxonomy,
    rng: &mut ChaCha8Rng,
) -> Option<String> {
    if depth == 0 {
        return None;
    }
    let node = taxonomy.node(category)?;
    if node.depth() < depth {
        return None;
    }
    let at_depth = taxonomy.ancestor_at(category, depth).ok()?;
    let parent = taxonomy.node(at_depth)?.parent.clone()?;
    let siblings: Vec<String> = taxonomy
        .children(&parent)
        .filter(|n| n.id != at_depth)
        .map(|n| n.id.clone())
        .collect();
    if siblings.is_empty() {
        return None;
    }
    let sibling = &siblings[rng.gen_range(0..siblings.len())];
    // descend to a uniform leaf of the sibling subtree
    let mut leaves: Vec<String> = taxonomy
        .nodes()
        .filter(|n| Taxonomy::is_same_or_descendant(&n.id, sibling) && taxonomy.is_leaf(&n.id))
        .map(|n| n.id.clone())
        .collect();
    leaves.sort();
    Some(leaves[rng.gen_range(0..leaves.len())].clone())
}

// ---------------------------------------------------------------------------
// NNM positive-bias demonstration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct BiasCase {
    pub duplicates: usize,
    pub nnm_precision: Option<f64>,
    pub nnm_recall: Option<f64>,
    pub scm_precision: Option<f64>,
    pub scm_consistent_fraction: Option<f64>,
}

/// NNM precision vs SCM consistency on docs where each reference event
/// attracts several near-duplicate predictions.
#[derive(Debug, Clone, Serialize)]
pub struct BiasDemoReport {
    pub category: String,
    pub w_eval: f64,
    pub cases: Vec<BiasCase>,
}

impl BiasDemoReport {
    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{:5.1}", x * 100.0),
            None => "    -".to_string(),
        };
        let mut out = String::from("duplicates  NN prc  NN rec  SC prc  SC consistent\n");
        for c in &self.cases {
            out.push_str(&format!(
                "{:>10}  {}  {}  {}  {}\n",
                c.duplicates,
                fmt(c.nnm_precision),
                fmt(c.nnm_recall),
                fmt(c.scm_precision),
                fmt(c.scm_consistent_fraction),
            ));
        }
        out
    }
}

/// Construct reference/prediction pairs where every reference pass gains
/// `k` duplicated predictions 40 ms apart, for k in {0, 1, 2, 5}: NNM
/// precision stays at 1.0 for every k while the SCM consistent-event
/// fraction collapses to zero as soon as a single duplicate exists.
pub fn bias_demo(seed: u64) -> Result<BiasDemoReport> {
    let taxonomy = Taxonomy::builtin("soccer")?;
    let w_eval = 0.44;
    let tol = ToleranceSpec::uniform(w_eval, HalfWidthMode::Half);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // two sequences with a handful of seeded pass times each
    let mut reference = AnnotationDoc::new("bias-demo", "reference", 0.0, 120.0);
    reference.fps = Some(25.0);
    let mut pass_times = Vec::new();
    for (activate, deactivate) in [(5.0, 55.0), (65.0, 115.0)] {
        reference.push_event(EventRecord::new(activate, "static_ball_action/kick-off"));
        reference.push_event(EventRecord::new(
            deactivate,
            "referee_decision/ball_out_of_field",
        ));
        let mut t = activate + 2.0;
        for _ in 0..3 {
            t += 1.0 + (rng.gen_range(0..50) as f64) * 0.04;
            pass_times.push(t);
            reference.push_event(EventRecord::new(t, PASS_UNTOUCHED));
        }
    }
    reference.sort_events();

    let mut cases = Vec::new();
    for k in [0usize, 1, 2, 5] {
        let mut pred = reference.clone();
        pred.annotator = format!("duplicator-{k}");
        for t in &pass_times {
            for dup in 1..=k {
                // 40 ms per duplicate keeps all copies inside w_eval / 2
                pred.push_event(EventRecord::new(t + dup as f64 * 0.04, PASS_UNTOUCHED));
            }
        }
        pred.sort_events();

        let nn = metrics::nnm_match(&pred, &reference, PASS_UNTOUCHED, &tol)?;
        let sc = metrics::scm_match(&pred, &reference, &taxonomy, PASS_UNTOUCHED, &tol)?;
        cases.push(BiasCase {
            duplicates: k,
            nnm_precision: nn.precision(),
            nnm_recall: nn.recall(),
            scm_precision: sc.precision(),
            scm_consistent_fraction: sc.consistent_event_fraction(),
        });
    }

    Ok(BiasDemoReport {
        category: PASS_UNTOUCHED.to_string(),
        w_eval,
        cases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soccer() -> Taxonomy {
        Taxonomy::builtin("soccer").unwrap()
    }

    #[test]
    fn rate_zero_single_sequence_is_exactly_the_status_pair() {
        let model = MatchModel {
            event_rate_hz: 0.0,
            sequences: (1, 1),
            duration: 60.0,
            ..MatchModel::with_seed(7)
        };
        let doc = generate_match(&model, &soccer()).unwrap();
        assert_eq!(doc.events.len(), 2, "{:?}", doc.events);
        assert_eq!(doc.events[0].category, "static_ball_action/kick-off");
        assert!(doc.events[1].category.starts_with("referee_decision"));
        assert!(doc.validate(&soccer()).is_empty());
    }

    #[test]
    fn rate_zero_multi_sequence_has_only_status_and_possession_events() {
        let model = MatchModel {
            event_rate_hz: 0.0,
            sequences: (3, 3),
            duration: 90.0,
            ..MatchModel::with_seed(8)
        };
        let doc = generate_match(&model, &soccer()).unwrap();
        assert!(doc
            .events
            .iter()
            .all(|e| e.category.starts_with("static_ball_action")
                || e.category.starts_with("referee_decision")
                || e.category == "possession_change"));
        assert!(doc.validate(&soccer()).is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let model = MatchModel::with_seed(42);
        let a = generate_match(&model, &soccer()).unwrap();
        let b = generate_match(&model, &soccer()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_canonical_string(), b.to_canonical_string());
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_match(&MatchModel::with_seed(1), &soccer()).unwrap();
        let b = generate_match(&MatchModel::with_seed(2), &soccer()).unwrap();
        assert_ne!(a.to_canonical_string(), b.to_canonical_string());
    }

    #[test]
    fn generated_docs_validate_across_seeds() {
        let tax = soccer();
        for seed in 0..50 {
            let doc = generate_match(&MatchModel::with_seed(seed), &tax).unwrap();
            let violations = doc.validate(&tax);
            assert!(violations.is_empty(), "seed {seed}: {violations:?}");
            assert!(doc.segment_sequences(&tax).is_ok());
        }
    }

    #[test]
    fn long_run_release_mixture_tracks_the_configured_weights() {
        let model = MatchModel {
            duration: 80_000.0,
            sequences: (100, 100),
            event_rate_hz: 1.0,
            ..MatchModel::with_seed(11)
        };
        let doc = generate_match(&model, &soccer()).unwrap();

        let count = |prefix: &str| -> f64 {
            doc.events
                .iter()
                .filter(|e| e.category.starts_with(prefix))
                .count() as f64
        };
        let releases = count("ball_release");
        assert!(releases > 10_000.0, "got {releases} releases");

        // Top-level release shares as configured: pass 1346, shot 31,
        // unintentional 154 of 1531 total.
        for (prefix, weight) in [
            ("ball_release/intentional/pass", 1346.0),
            ("ball_release/intentional/shot", 31.0),
            ("ball_release/unintentional", 154.0),
        ] {
            let expected = weight / 1531.0;
            let got = count(prefix) / releases;
            let rel = (got - expected).abs() / expected;
            assert!(
                rel < 0.05,
                "{prefix}: expected share {expected:.4}, got {got:.4} (rel err {rel:.3})"
            );
        }
        let passes = count("ball_release/intentional/pass");
        let shots = count("ball_release/intentional/shot");
        assert!(passes > 20.0 * shots, "passes {passes} shots {shots}");
    }

    #[test]
    fn taxonomy_restricted_model_generates_handball_matches() {
        let tax = Taxonomy::builtin("handball").unwrap();
        let model = MatchModel::for_taxonomy(&tax, 13);
        assert!(!model
            .restart_mixture
            .iter()
            .any(|(c, _)| c.contains("corner")));
        let doc = generate_match(&model, &tax).unwrap();
        assert!(doc.validate(&tax).is_empty());
        assert!(!doc.events.is_empty());
    }

    #[test]
    fn infeasible_rate_is_rejected() {
        let model = MatchModel {
            event_rate_hz: 20.0,
            ..MatchModel::with_seed(0)
        };
        assert!(matches!(
            generate_match(&model, &soccer()),
            Err(Error::InfeasibleModel(_))
        ));
    }

    #[test]
    fn zero_noise_is_identity() {
        let doc = generate_match(&MatchModel::with_seed(5), &soccer()).unwrap();
        let out = perturb(&doc, &NoiseModel::silent(99), &soccer());
        assert_eq!(doc, out);
        assert_eq!(doc.to_canonical_string(), out.to_canonical_string());
    }

    #[test]
    fn full_miss_rate_leaves_only_status_events() {
        let doc = generate_match(&MatchModel::with_seed(5), &soccer()).unwrap();
        let noise = NoiseModel {
            miss_rate: 1.0,
            ..NoiseModel::silent(1)
        };
        let out = perturb(&doc, &noise, &soccer());
        assert!(!out.events.is_empty());
        assert!(out
            .events
            .iter()
            .all(|e| soccer().status_effect_of(&e.category).is_some()));
    }

    #[test]
    fn perturb_is_deterministic_per_seed() {
        let doc = generate_match(&MatchModel::with_seed(5), &soccer()).unwrap();
        let noise = NoiseModel::with_seed(123);
        let a = perturb(&doc, &noise, &soccer());
        let b = perturb(&doc, &noise, &soccer());
        assert_eq!(a.to_canonical_string(), b.to_canonical_string());
        let c = perturb(&doc, &NoiseModel::with_seed(124), &soccer());
        assert_ne!(a.to_canonical_string(), c.to_canonical_string());
    }

    #[test]
    fn jitter_moves_timestamps_on_the_frame_grid() {
        let doc = generate_match(&MatchModel::with_seed(5), &soccer()).unwrap();
        let noise = NoiseModel {
            jitter_std: 0.1,
            status_jitter_std: 0.02,
            ..NoiseModel::silent(7)
        };
        let out = perturb(&doc, &noise, &soccer());
        assert_eq!(out.events.len(), doc.events.len());
        let moved = out
            .events
            .iter()
            .zip(&doc.events)
            .filter(|(a, b)| a.t != b.t)
            .count();
        assert!(moved > 0);
        for e in &out.events {
            let frames = e.t * 25.0;
            assert!((frames - frames.round()).abs() < 1e-6, "off-grid t {}", e.t);
        }
    }

    #[test]
    fn perturbed_status_events_keep_alternating() {
        let tax = soccer();
        for seed in 0..20 {
            let doc = generate_match(&MatchModel::with_seed(seed), &tax).unwrap();
            let noise = NoiseModel {
                status_jitter_std: 2.0, // large enough to threaten reordering
                ..NoiseModel::with_seed(seed + 1000)
            };
            let out = perturb(&doc, &noise, &tax);
            assert!(
                out.segment_sequences(&tax).is_ok(),
                "seed {seed} broke alternation"
            );
        }
    }

    #[test]
    fn block_shift_moves_a_contiguous_span() {
        let doc = generate_match(&MatchModel::with_seed(5), &soccer()).unwrap();
        let noise = NoiseModel {
            jitter_std: 1.0,
            status_jitter_std: 0.0,
            miss_rate: 0.0,
            spurious_per_minute: 0.0,
            confusion_rate: 0.0,
            confusion_depth: 3,
            block_shift_len: Some(30.0),
            seed: 3,
        };
        let out = perturb(&doc, &noise, &soccer());
        let moved = out
            .events
            .iter()
            .zip(&doc.events)
            .filter(|(a, b)| a.t != b.t)
            .count();
        assert!(moved > 0, "block shift moved nothing");
        assert!(moved < doc.events.len(), "block shift moved everything");
    }

    #[test]
    fn confusion_swaps_to_sibling_leaves() {
        let doc = generate_match(&MatchModel::with_seed(5), &soccer()).unwrap();
        let noise = NoiseModel {
            confusion_rate: 1.0,
            confusion_depth: 3,
            ..NoiseModel::silent(11)
        };
        let tax = soccer();
        let out = perturb(&doc, &noise, &tax);
        assert_eq!(out.events.len(), doc.events.len());
        let mut swapped = 0;
        for (a, b) in out.events.iter().zip(&doc.events) {
            assert_eq!(a.t, b.t);
            if a.category != b.category {
                swapped += 1;
                // swap stays below the same depth-2 ancestor
                assert_eq!(
                    tax.ancestor_at(&a.category, 2).unwrap(),
                    tax.ancestor_at(&b.category, 2).unwrap()
                );
            }
        }
        assert!(swapped > 0);
    }

    #[test]
    fn bias_demo_shows_the_positive_bias() {
        let rep = bias_demo(42).unwrap();
        for case in &rep.cases {
            assert_eq!(case.nnm_precision, Some(1.0), "k={}", case.duplicates);
            assert_eq!(case.nnm_recall, Some(1.0));
            if case.duplicates == 0 {
                assert_eq!(case.scm_consistent_fraction, Some(1.0));
                assert_eq!(case.scm_precision, Some(1.0));
            } else {
                assert!(
                    case.scm_consistent_fraction.unwrap() <= 0.5,
                    "k={}: {:?}",
                    case.duplicates,
                    case.scm_consistent_fraction
                );
            }
        }
    }

    #[test]
    fn bias_demo_is_deterministic() {
        let a = bias_demo(42).unwrap();
        let b = bias_demo(42).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }
}
