//! Scenario documents: TOML files with `lane_graph`, `anchors`, `traffic`
//! and `limits` sections, validated and resolved into a [`ScenarioSpec`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::{Polyline, Vec2};
use super::lane_graph::{Anchor, Edge, EdgeId, LaneGraph};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario document does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("`{referrer}` references unknown {kind} `{name}`")]
    Dangling {
        referrer: String,
        kind: &'static str,
        name: String,
    },
    #[error("unknown builtin scenario `{0}`")]
    UnknownBuiltin(String),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Detour,
    Shared,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    pub t_forward: u32,
    pub t_reset: u32,
    pub v_max: f64,
    pub crawl_speed: f64,
    pub safe_distance: f64,
    pub tick: f64,
    #[serde(default = "default_a_max")]
    pub a_max: f64,
    #[serde(default = "default_stuck_steps")]
    pub stuck_steps: u32,
    #[serde(default = "default_vehicle_length")]
    pub vehicle_length: f64,
    #[serde(default = "default_vehicle_width")]
    pub vehicle_width: f64,
    #[serde(default = "default_lane_width")]
    pub lane_width: f64,
}

fn default_a_max() -> f64 {
    3.0
}
fn default_stuck_steps() -> u32 {
    50
}
fn default_vehicle_length() -> f64 {
    4.2
}
fn default_vehicle_width() -> f64 {
    1.8
}
fn default_lane_width() -> f64 {
    3.5
}

/// An initial pose the ego can start an episode from, 1-based in the public
/// API. Non-informative anchors disable traffic and scramble novelty inputs.
#[derive(Debug, Clone)]
pub struct InitialAnchor {
    pub anchor: Anchor,
    pub informative: bool,
    /// Edge chain from the anchor's edge to the goal edge.
    pub route: Vec<EdgeId>,
}

#[derive(Debug, Clone)]
pub struct TrafficStream {
    pub spawn: Anchor,
    pub route: Vec<EdgeId>,
    pub speed: f64,
    /// Seconds between spawns; `None` spawns exactly once.
    pub period: Option<f64>,
    pub first: f64,
    /// Fractional speed jitter drawn per vehicle from the world seed.
    pub speed_jitter: f64,
    /// Fill the route with vehicles already en route at t = 0.
    pub prepopulate: bool,
}

#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: String,
    pub reward_kind: RewardKind,
    pub graph: LaneGraph,
    pub initial_anchors: Vec<InitialAnchor>,
    pub goal: Anchor,
    pub streams: Vec<TrafficStream>,
    pub limits: Limits,
}

impl ScenarioSpec {
    /// Number of initial anchors; anchor indices run 1..=n.
    pub fn n_initial(&self) -> usize {
        self.initial_anchors.len()
    }

    pub fn initial(&self, index: usize) -> Option<&InitialAnchor> {
        if index == 0 {
            return None;
        }
        self.initial_anchors.get(index - 1)
    }

    pub fn from_toml_str(name_hint: &str, text: &str) -> Result<Self, ScenarioError> {
        let doc: ScenarioDoc = toml::from_str(text)?;
        resolve(name_hint, doc)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let hint = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_toml_str(&hint, &text)
    }

    /// Load one of the scenarios shipped with the crate.
    pub fn builtin(name: &str) -> Result<Self, ScenarioError> {
        let text = builtin_source(name).ok_or_else(|| ScenarioError::UnknownBuiltin(name.into()))?;
        Self::from_toml_str(name, text)
    }

    /// Resolve `name` as a builtin scenario first, then as a file path.
    pub fn load(name_or_path: &str) -> Result<Self, ScenarioError> {
        match Self::builtin(name_or_path) {
            Err(ScenarioError::UnknownBuiltin(_)) => Self::from_path(name_or_path),
            other => other,
        }
    }
}

pub const BUILTIN_SCENARIOS: &[&str] = &[
    "corridor",
    "detour",
    "three_way",
    "four_way",
    "five_way",
    "five_way_ablation",
    "roundabout",
];

pub fn builtin_source(name: &str) -> Option<&'static str> {
    match name {
        "corridor" => Some(include_str!("../../scenarios/corridor.toml")),
        "detour" => Some(include_str!("../../scenarios/detour.toml")),
        "three_way" => Some(include_str!("../../scenarios/three_way.toml")),
        "four_way" => Some(include_str!("../../scenarios/four_way.toml")),
        "five_way" => Some(include_str!("../../scenarios/five_way.toml")),
        "five_way_ablation" => Some(include_str!("../../scenarios/five_way_ablation.toml")),
        "roundabout" => Some(include_str!("../../scenarios/roundabout.toml")),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Raw document shape
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    name: Option<String>,
    reward: RewardKind,
    limits: Limits,
    lane_graph: LaneGraphDoc,
    anchors: AnchorsDoc,
    #[serde(default)]
    traffic: TrafficDoc,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LaneGraphDoc {
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    x: f64,
    y: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    id: String,
    from: String,
    to: String,
    #[serde(default)]
    via: Vec<[f64; 2]>,
    width: Option<f64>,
    detour_of: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorsDoc {
    initial: Vec<InitialDoc>,
    goal: AnchorDoc,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialDoc {
    edge: String,
    s: f64,
    #[serde(default = "default_true")]
    informative: bool,
    route: Option<Vec<String>>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorDoc {
    edge: String,
    s: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrafficDoc {
    #[serde(default)]
    streams: Vec<StreamDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StreamDoc {
    edge: String,
    s: f64,
    route: Vec<String>,
    speed: f64,
    period: Option<f64>,
    #[serde(default)]
    first: f64,
    #[serde(default)]
    speed_jitter: f64,
    #[serde(default)]
    prepopulate: bool,
}

// ---------------------------------------------------------------------------
// Resolution + validation
// ---------------------------------------------------------------------------

fn resolve(name_hint: &str, doc: ScenarioDoc) -> Result<ScenarioSpec, ScenarioError> {
    let limits = doc.limits;
    if limits.t_forward == 0 {
        return Err(invalid("limits.t_forward", "must be >= 1"));
    }
    if limits.t_reset == 0 {
        return Err(invalid("limits.t_reset", "must be >= 1"));
    }
    if !(limits.safe_distance > 0.0) {
        return Err(invalid("limits.safe_distance", "must be > 0"));
    }
    if !(limits.tick > 0.0) || !(limits.v_max > 0.0) || !(limits.a_max > 0.0) {
        return Err(invalid("limits", "tick, v_max and a_max must be > 0"));
    }
    if limits.crawl_speed < 0.0 || limits.crawl_speed > limits.v_max {
        return Err(invalid("limits.crawl_speed", "must lie in [0, v_max]"));
    }

    let mut node_ids = BTreeMap::new();
    let mut nodes = Vec::with_capacity(doc.lane_graph.nodes.len());
    for (i, n) in doc.lane_graph.nodes.iter().enumerate() {
        if node_ids.insert(n.id.clone(), i as u32).is_some() {
            return Err(invalid("lane_graph.nodes", format!("duplicate node id `{}`", n.id)));
        }
        nodes.push(Vec2::new(n.x, n.y));
    }

    let mut edge_ids = BTreeMap::new();
    let mut edges = Vec::with_capacity(doc.lane_graph.edges.len());
    for (i, e) in doc.lane_graph.edges.iter().enumerate() {
        if edge_ids.insert(e.id.clone(), EdgeId(i as u32)).is_some() {
            return Err(invalid("lane_graph.edges", format!("duplicate edge id `{}`", e.id)));
        }
        let from = *node_ids.get(&e.from).ok_or_else(|| ScenarioError::Dangling {
            referrer: format!("edge `{}`", e.id),
            kind: "node",
            name: e.from.clone(),
        })?;
        let to = *node_ids.get(&e.to).ok_or_else(|| ScenarioError::Dangling {
            referrer: format!("edge `{}`", e.id),
            kind: "node",
            name: e.to.clone(),
        })?;
        let mut pts = vec![nodes[from as usize]];
        pts.extend(e.via.iter().map(|p| Vec2::new(p[0], p[1])));
        pts.push(nodes[to as usize]);
        let centerline = Polyline::new(pts);
        if centerline.length() <= 0.0 {
            return Err(invalid(
                format!("lane_graph.edges[{i}] `{}`", e.id),
                "centerline must have strictly positive length",
            ));
        }
        let width = e.width.unwrap_or(limits.lane_width);
        if !(width > 0.0) {
            return Err(invalid(format!("edge `{}`.width", e.id), "must be > 0"));
        }
        edges.push(Edge {
            name: e.id.clone(),
            from,
            to,
            centerline,
            width,
            detour_of: None, // resolved below, after all ids are known
            center_cross: Vec::new(),
        });
    }
    for (i, e) in doc.lane_graph.edges.iter().enumerate() {
        if let Some(own) = &e.detour_of {
            let id = *edge_ids.get(own).ok_or_else(|| ScenarioError::Dangling {
                referrer: format!("edge `{}`.detour_of", e.id),
                kind: "edge",
                name: own.clone(),
            })?;
            edges[i].detour_of = Some(id);
        }
    }

    let graph = LaneGraph::new(nodes, edges);

    let resolve_anchor = |field: &str, edge: &str, s: f64| -> Result<Anchor, ScenarioError> {
        let id = *edge_ids.get(edge).ok_or_else(|| ScenarioError::Dangling {
            referrer: field.to_string(),
            kind: "edge",
            name: edge.to_string(),
        })?;
        let len = graph.edge(id).length();
        if !(0.0..=len).contains(&s) {
            return Err(invalid(field, format!("arc length {s} outside [0, {len:.3}]")));
        }
        Ok(Anchor { edge: id, s })
    };

    let goal = resolve_anchor("anchors.goal", &doc.anchors.goal.edge, doc.anchors.goal.s)?;

    if doc.anchors.initial.is_empty() {
        return Err(invalid("anchors.initial", "at least one initial anchor is required"));
    }
    let mut initial_anchors = Vec::with_capacity(doc.anchors.initial.len());
    for (i, a) in doc.anchors.initial.iter().enumerate() {
        let field = format!("anchors.initial[{i}]");
        let anchor = resolve_anchor(&field, &a.edge, a.s)?;
        let route = match &a.route {
            Some(names) => resolve_route(&graph, &edge_ids, &field, names, anchor.edge, goal.edge)?,
            None => graph.route(anchor.edge, goal.edge).ok_or_else(|| {
                invalid(&field, "no lane-graph path from this anchor to the goal")
            })?,
        };
        initial_anchors.push(InitialAnchor {
            anchor,
            informative: a.informative,
            route,
        });
    }

    let mut streams = Vec::with_capacity(doc.traffic.streams.len());
    for (i, s) in doc.traffic.streams.iter().enumerate() {
        let field = format!("traffic.streams[{i}]");
        let spawn = resolve_anchor(&field, &s.edge, s.s)?;
        if !(s.speed >= 0.0) {
            return Err(invalid(format!("{field}.speed"), "must be >= 0"));
        }
        if let Some(p) = s.period {
            if !(p > 0.0) {
                return Err(invalid(format!("{field}.period"), "must be > 0 when present"));
            }
        }
        let route = resolve_stream_route(&graph, &edge_ids, &field, &s.route, spawn.edge)?;
        streams.push(TrafficStream {
            spawn,
            route,
            speed: s.speed,
            period: s.period,
            first: s.first,
            speed_jitter: s.speed_jitter,
            prepopulate: s.prepopulate,
        });
    }

    let name = doc.name.unwrap_or_else(|| name_hint.to_string());
    Ok(ScenarioSpec {
        name,
        reward_kind: doc.reward,
        graph,
        initial_anchors,
        goal,
        streams,
        limits,
    })
}

fn resolve_route(
    graph: &LaneGraph,
    edge_ids: &BTreeMap<String, EdgeId>,
    field: &str,
    names: &[String],
    start: EdgeId,
    goal_edge: EdgeId,
) -> Result<Vec<EdgeId>, ScenarioError> {
    let chain = resolve_stream_route(graph, edge_ids, field, names, start)?;
    if *chain.last().unwrap() != goal_edge {
        return Err(invalid(
            format!("{field}.route"),
            "route must end on the goal edge",
        ));
    }
    Ok(chain)
}

fn resolve_stream_route(
    graph: &LaneGraph,
    edge_ids: &BTreeMap<String, EdgeId>,
    field: &str,
    names: &[String],
    start: EdgeId,
) -> Result<Vec<EdgeId>, ScenarioError> {
    if names.is_empty() {
        return Err(invalid(format!("{field}.route"), "route must not be empty"));
    }
    let mut chain = Vec::with_capacity(names.len());
    for n in names {
        let id = *edge_ids.get(n).ok_or_else(|| ScenarioError::Dangling {
            referrer: format!("{field}.route"),
            kind: "edge",
            name: n.clone(),
        })?;
        chain.push(id);
    }
    if chain[0] != start {
        return Err(invalid(
            format!("{field}.route"),
            "route must start on the anchor's edge",
        ));
    }
    for w in chain.windows(2) {
        if graph.edge(w[0]).to != graph.edge(w[1]).from {
            return Err(invalid(
                format!("{field}.route"),
                format!(
                    "edges `{}` and `{}` are not connected",
                    graph.edge(w[0]).name,
                    graph.edge(w[1]).name
                ),
            ));
        }
    }
    Ok(chain)
}
