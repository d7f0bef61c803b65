//! Hierarchical event taxonomy, loaded from data-driven config.
//!
//! A taxonomy is a forest of rooted trees. Node ids are slash-separated
//! paths (`ball_release/intentional/pass/intercepted`), so a node's id is
//! always its parent's id plus one slug segment. Each tree lives entirely
//! inside one path group (game status, possession, individual ball events),
//! and depth counts edges from the tree root: depth 0 of
//! `ball_release/intentional/pass` is `ball_release`.
//!
//! Two configs ship with the crate (`soccer`, `handball`); users add sports
//! by writing new config files, not code.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::annotation::AnnotationDoc;
use crate::error::{Error, Result};

/// Which conceptual path of the taxonomy a tree belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathGroup {
    GameStatus,
    Possession,
    IndividualBall,
    Other,
}

/// Whether an event marks an instant or the boundary of a derived interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampKind {
    Instant,
    IntervalBoundary,
}

/// Effect of a game-status changing event on the match state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusEffect {
    /// Play becomes active (static ball actions: kick-off, throw-in, ...).
    Activate,
    /// Play becomes inactive (referee decisions: foul, ball out, ...).
    Deactivate,
}

/// Value kind of an event attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    String,
    Number,
    PixelCoordinate,
    PlayerId,
}

/// An attribute declared on a node; valid for the node and all descendants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default)]
    pub required: bool,
}

/// One category in the taxonomy.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxonomyNode {
    /// Stable slug path, e.g. `ball_release/intentional/pass`.
    pub id: String,
    pub label: String,
    pub parent: Option<String>,
    pub path_group: PathGroup,
    pub timestamp_kind: TimestampKind,
    /// Game-status effect; present on every `game_status` node (inherited
    /// from the tree root at load time).
    pub status_effect: Option<StatusEffect>,
    /// Evaluation window length in seconds declared on this node itself.
    /// Query [`Taxonomy::effective_w_eval`] for the inherited value.
    pub w_eval_default: Option<f64>,
    /// Attributes declared on this node itself (not inherited ones).
    pub attributes: Vec<AttributeDef>,
}

impl TaxonomyNode {
    /// Depth in edges from the tree root (root nodes have depth 0).
    pub fn depth(&self) -> usize {
        self.id.matches('/').count()
    }

    /// Last slug segment of the id.
    pub fn slug(&self) -> &str {
        self.id.rsplit('/').next().unwrap_or(&self.id)
    }
}

/// A loaded, validated taxonomy. Immutable after load; cheap to share.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    pub sport: String,
    nodes: BTreeMap<String, TaxonomyNode>,
    exclusion_groups: Vec<BTreeSet<String>>,
}

// ---------------------------------------------------------------------------
// config file schema
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ConfigFile {
    sport: String,
    /// When false, the implicit all-individual-ball-leaves exclusion group
    /// is not added.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    individual_ball_exclusive: bool,
    #[serde(default)]
    nodes: Vec<ConfigNode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    exclusion_groups: Vec<ConfigGroup>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConfigNode {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    /// Optional; derived from the id when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<String>,
    /// Required on tree roots; inherited by descendants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path_group: Option<PathGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp_kind: Option<TimestampKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    status_effect: Option<StatusEffect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w_eval: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    attributes: Vec<AttributeDef>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConfigGroup {
    members: Vec<String>,
}

fn default_true() -> bool {
    true
}
#[allow(clippy::trivially_copy_pass_by_ref)]
fn is_true(b: &bool) -> bool {
    *b
}

// ---------------------------------------------------------------------------
// loading
// ---------------------------------------------------------------------------

/// Parse and validate a taxonomy config document.
pub fn load_taxonomy(config_document: &str) -> Result<Taxonomy> {
    let cfg: ConfigFile =
        toml::from_str(config_document).map_err(|e| Error::TaxonomyConfig(e.to_string()))?;
    Taxonomy::from_config(cfg)
}

impl Taxonomy {
    /// Load one of the bundled sport configs (`soccer` or `handball`).
    pub fn builtin(sport: &str) -> Result<Taxonomy> {
        match sport {
            "soccer" => load_taxonomy(include_str!("../assets/soccer.taxonomy")),
            "handball" => load_taxonomy(include_str!("../assets/handball.taxonomy")),
            other => Err(Error::TaxonomyConfig(format!(
                "no bundled taxonomy for sport `{other}` (have: soccer, handball)"
            ))),
        }
    }

    fn from_config(cfg: ConfigFile) -> Result<Taxonomy> {
        // Duplicate ids first; everything later assumes the map is injective.
        let mut seen = BTreeSet::new();
        for n in &cfg.nodes {
            if !seen.insert(n.id.clone()) {
                return Err(Error::DuplicateId(n.id.clone()));
            }
        }

        let by_id: BTreeMap<&str, &ConfigNode> =
            cfg.nodes.iter().map(|n| (n.id.as_str(), n)).collect();

        // Explicit parent, or derived by stripping the last slug segment.
        let parent_of = |n: &ConfigNode| -> Option<String> {
            n.parent
                .clone()
                .or_else(|| n.id.rsplit_once('/').map(|(head, _)| head.to_string()))
        };

        // Cycle detection before structural checks so a self-parent reports
        // as a cycle, not as a path-encoding problem.
        for n in &cfg.nodes {
            let mut hops = 0usize;
            let mut cur = parent_of(n);
            while let Some(p) = cur {
                hops += 1;
                if hops > cfg.nodes.len() {
                    return Err(Error::CyclicParent(n.id.clone()));
                }
                cur = by_id.get(p.as_str()).and_then(|pn| parent_of(pn));
            }
        }

        let mut nodes: BTreeMap<String, TaxonomyNode> = BTreeMap::new();
        // Process parents before children so inheritance can read the
        // resolved parent. Sorting by id works because a child id is
        // lexicographically after its parent id.
        let mut order: Vec<&ConfigNode> = cfg.nodes.iter().collect();
        order.sort_by(|a, b| a.id.cmp(&b.id));

        for n in &order {
            let parent = parent_of(n);
            let resolved_parent = match &parent {
                None => None,
                Some(p) => {
                    if !by_id.contains_key(p.as_str()) {
                        return Err(Error::OrphanParent {
                            node: n.id.clone(),
                            parent: p.clone(),
                        });
                    }
                    // id must equal parent id + "/" + slug
                    match n.id.rsplit_once('/') {
                        Some((head, slug)) if head == p && !slug.is_empty() => {
                            Some(nodes.get(p.as_str()).expect("parent resolved first"))
                        }
                        _ => {
                            return Err(Error::PathEncoding {
                                node: n.id.clone(),
                                parent: p.clone(),
                            })
                        }
                    }
                }
            };

            let path_group = match (n.path_group, resolved_parent) {
                (Some(g), None) => g,
                (None, Some(p)) => p.path_group,
                (Some(g), Some(p)) => {
                    if g != p.path_group {
                        return Err(Error::PathGroupMismatch {
                            node: n.id.clone(),
                            given: format!("{g:?}"),
                            root: format!("{:?}", p.path_group),
                        });
                    }
                    g
                }
                (None, None) => {
                    return Err(Error::TaxonomyConfig(format!(
                        "root node `{}` must declare a path_group",
                        n.id
                    )))
                }
            };

            let timestamp_kind = n.timestamp_kind.unwrap_or(match path_group {
                PathGroup::GameStatus | PathGroup::Possession => TimestampKind::IntervalBoundary,
                PathGroup::IndividualBall | PathGroup::Other => TimestampKind::Instant,
            });

            let status_effect = n
                .status_effect
                .or_else(|| resolved_parent.and_then(|p| p.status_effect));
            if path_group == PathGroup::GameStatus && status_effect.is_none() {
                return Err(Error::TaxonomyConfig(format!(
                    "game_status node `{}` has no status_effect (activate/deactivate)",
                    n.id
                )));
            }

            if let Some(w) = n.w_eval {
                if w.is_nan() || w <= 0.0 {
                    return Err(Error::TaxonomyConfig(format!(
                        "node `{}` has non-positive w_eval {w}",
                        n.id
                    )));
                }
            }

            // Attribute redefinition against the inherited set.
            let mut inherited: BTreeSet<&str> = BTreeSet::new();
            let mut up = resolved_parent;
            while let Some(p) = up {
                inherited.extend(p.attributes.iter().map(|a| a.name.as_str()));
                up = p.parent.as_deref().map(|pid| &nodes[pid]);
            }
            for a in &n.attributes {
                if inherited.contains(a.name.as_str()) {
                    return Err(Error::AttributeRedefinition {
                        node: n.id.clone(),
                        attribute: a.name.clone(),
                    });
                }
            }

            nodes.insert(
                n.id.clone(),
                TaxonomyNode {
                    id: n.id.clone(),
                    label: n.label.clone().unwrap_or_else(|| n.id.clone()),
                    parent,
                    path_group,
                    timestamp_kind,
                    status_effect,
                    w_eval_default: n.w_eval,
                    attributes: n.attributes.clone(),
                },
            );
        }

        let mut groups: Vec<BTreeSet<String>> = Vec::new();
        for g in &cfg.exclusion_groups {
            let mut set = BTreeSet::new();
            let mut group_pg: Option<(PathGroup, &str)> = None;
            for m in &g.members {
                let node = nodes
                    .get(m)
                    .ok_or_else(|| Error::ExclusionGroupUnknown(m.clone()))?;
                if let Some((pg, first)) = group_pg {
                    if pg != node.path_group {
                        return Err(Error::ExclusionGroupMixed {
                            a: first.to_string(),
                            b: m.clone(),
                        });
                    }
                } else {
                    group_pg = Some((node.path_group, m));
                }
                set.insert(m.clone());
            }
            if !set.is_empty() {
                groups.push(set);
            }
        }

        if cfg.individual_ball_exclusive {
            let leaves: BTreeSet<String> = nodes
                .values()
                .filter(|n| n.path_group == PathGroup::IndividualBall)
                .filter(|n| !nodes.values().any(|c| c.parent.as_deref() == Some(&n.id)))
                .map(|n| n.id.clone())
                .collect();
            if !leaves.is_empty() && !groups.contains(&leaves) {
                groups.push(leaves);
            }
        }

        Ok(Taxonomy {
            sport: cfg.sport,
            nodes,
            exclusion_groups: groups,
        })
    }

    /// Canonical config serialization; reloading yields an identical taxonomy.
    pub fn to_config_string(&self) -> String {
        let cfg = ConfigFile {
            sport: self.sport.clone(),
            // Groups are serialized explicitly, so the implicit one must not
            // be re-added on reload (it would be a duplicate anyway).
            individual_ball_exclusive: true,
            nodes: self
                .nodes
                .values()
                .map(|n| ConfigNode {
                    id: n.id.clone(),
                    label: Some(n.label.clone()),
                    parent: n.parent.clone(),
                    path_group: Some(n.path_group),
                    timestamp_kind: Some(n.timestamp_kind),
                    status_effect: n.status_effect,
                    w_eval: n.w_eval_default,
                    attributes: n.attributes.clone(),
                })
                .collect(),
            exclusion_groups: self
                .exclusion_groups
                .iter()
                .map(|g| ConfigGroup {
                    members: g.iter().cloned().collect(),
                })
                .collect(),
        };
        toml::to_string_pretty(&cfg).expect("taxonomy serializes")
    }

    // -- queries ------------------------------------------------------------

    pub fn node(&self, id: &str) -> Option<&TaxonomyNode> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TaxonomyNode> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn exclusion_groups(&self) -> &[BTreeSet<String>] {
        &self.exclusion_groups
    }

    pub fn children<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a TaxonomyNode> {
        self.nodes
            .values()
            .filter(move |n| n.parent.as_deref() == Some(id))
    }

    pub fn is_leaf(&self, id: &str) -> bool {
        self.children(id).next().is_none()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TaxonomyNode> {
        self.nodes.values().filter(|n| self.is_leaf(&n.id))
    }

    /// Evaluation window for a node, inherited from the nearest ancestor
    /// that defines one.
    pub fn effective_w_eval(&self, id: &str) -> Option<f64> {
        let mut cur = self.nodes.get(id)?;
        loop {
            if let Some(w) = cur.w_eval_default {
                return Some(w);
            }
            cur = self.nodes.get(cur.parent.as_deref()?)?;
        }
    }

    /// All attributes valid on a node: its own plus every ancestor's.
    pub fn effective_attributes(&self, id: &str) -> Vec<&AttributeDef> {
        let mut out = Vec::new();
        let mut cur = self.nodes.get(id);
        while let Some(n) = cur {
            out.extend(n.attributes.iter());
            cur = n.parent.as_deref().and_then(|p| self.nodes.get(p));
        }
        out
    }

    /// The ancestor of `event_id` at `depth` edges from its tree root.
    /// Identity when `depth` equals the node's own depth.
    pub fn ancestor_at(&self, event_id: &str, depth: usize) -> Result<&str> {
        let node = self
            .nodes
            .get(event_id)
            .ok_or_else(|| Error::UnknownNode(event_id.to_string()))?;
        let own = node.depth();
        if depth > own {
            return Err(Error::DepthOutOfRange {
                node: event_id.to_string(),
                depth,
            });
        }
        let mut cur = node;
        for _ in 0..(own - depth) {
            let pid = cur.parent.as_deref().expect("depth accounting");
            cur = self.nodes.get(pid).expect("parents validated at load");
        }
        Ok(&cur.id)
    }

    /// Replace each event's category by its ancestor at `depth` (clamped to
    /// the event's own depth). Timestamps, attributes, and event count are
    /// untouched.
    pub fn rollup(&self, doc: &AnnotationDoc, depth: usize) -> Result<AnnotationDoc> {
        let mut out = doc.clone();
        for ev in &mut out.events {
            let node = self.nodes.get(&ev.category).ok_or(Error::UnknownCategory {
                category: ev.category.clone(),
                t: ev.t,
            })?;
            let target = depth.min(node.depth());
            ev.category = self.ancestor_at(&node.id, target)?.to_string();
        }
        out.sort_events();
        Ok(out)
    }

    /// True when `id` equals `ancestor` or lies in its subtree.
    /// Pure path computation; neither id needs to exist in the taxonomy.
    pub fn is_same_or_descendant(id: &str, ancestor: &str) -> bool {
        id == ancestor
            || (id.len() > ancestor.len()
                && id.starts_with(ancestor)
                && id.as_bytes()[ancestor.len()] == b'/')
    }

    /// Exclusion group containing `category`, if any. A category belongs to
    /// a group when its subtree path crosses any member (ancestor or
    /// descendant counts: annotating `pass` clashes with `shot` even though
    /// the group lists their leaves).
    pub fn exclusion_group_of(&self, category: &str) -> Option<usize> {
        self.exclusion_groups.iter().position(|g| {
            g.iter().any(|m| {
                Self::is_same_or_descendant(category, m) || Self::is_same_or_descendant(m, category)
            })
        })
    }

    /// Inherited game-status effect of a category, if it is a status event.
    pub fn status_effect_of(&self, category: &str) -> Option<StatusEffect> {
        self.nodes.get(category).and_then(|n| n.status_effect)
    }

    /// All node ids in a path group.
    pub fn ids_in_group(&self, group: PathGroup) -> impl Iterator<Item = &str> {
        self.nodes
            .values()
            .filter(move |n| n.path_group == group)
            .map(|n| n.id.as_str())
    }
}
