//! Directed lane graph: nodes, lane-segment edges with centerline polylines,
//! geometric conflict zones between edge pairs, and shortest-path routing.

use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::geometry::{Polyline, Vec2};

/// Index into [`LaneGraph::edges`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

#[derive(Debug, Clone)]
pub struct Edge {
    pub name: String,
    pub from: u32,
    pub to: u32,
    pub centerline: Polyline,
    pub width: f64,
    /// Lane this edge temporarily departs from (an overtaking bypass).
    /// Arc intervals farther than half a lane width from that lane count
    /// as center-line crossings.
    pub detour_of: Option<EdgeId>,
    /// Arc intervals of this edge on the wrong side of the road.
    pub center_cross: Vec<(f64, f64)>,
}

impl Edge {
    pub fn length(&self) -> f64 {
        self.centerline.length()
    }
}

/// A pose on the graph: an edge plus an arc length along its centerline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub edge: EdgeId,
    pub s: f64,
}

/// Arc interval on each edge of a pair whose swept corridors intersect.
#[derive(Debug, Clone, Copy)]
pub struct ConflictZone {
    pub range_a: (f64, f64),
    pub range_b: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct LaneGraph {
    pub nodes: Vec<Vec2>,
    pub edges: Vec<Edge>,
    /// Outgoing edges per node.
    successors: Vec<Vec<EdgeId>>,
    /// Symmetric conflict map keyed by ordered edge pair.
    conflicts: BTreeMap<(EdgeId, EdgeId), ConflictZone>,
}

/// Corridors must overlap by at least this fraction of the half-width sum
/// before two edges count as conflicting; keeps parallel adjacent lanes out.
const CONFLICT_SHRINK: f64 = 0.9;
const SAMPLE_STEP: f64 = 0.5;

impl LaneGraph {
    pub fn new(nodes: Vec<Vec2>, mut edges: Vec<Edge>) -> Self {
        let mut successors = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            successors[e.from as usize].push(EdgeId(i as u32));
        }
        let conflicts = compute_conflicts(&edges);
        compute_center_cross(&mut edges);
        Self {
            nodes,
            edges,
            successors,
            conflicts,
        }
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0 as usize]
    }

    pub fn edge_by_name(&self, name: &str) -> Option<EdgeId> {
        self.edges
            .iter()
            .position(|e| e.name == name)
            .map(|i| EdgeId(i as u32))
    }

    pub fn successors(&self, id: EdgeId) -> &[EdgeId] {
        &self.successors[self.edge(id).to as usize]
    }

    pub fn conflict(&self, a: EdgeId, b: EdgeId) -> Option<ConflictZone> {
        if a <= b {
            self.conflicts.get(&(a, b)).copied()
        } else {
            self.conflicts.get(&(b, a)).map(|z| ConflictZone {
                range_a: z.range_b,
                range_b: z.range_a,
            })
        }
    }

    pub fn conflict_pairs(&self) -> impl Iterator<Item = (EdgeId, EdgeId)> + '_ {
        self.conflicts.keys().copied()
    }

    /// All conflicts touching `e`, oriented so `range_a` lies on `e`.
    pub fn conflicts_involving(&self, e: EdgeId) -> impl Iterator<Item = (EdgeId, ConflictZone)> + '_ {
        self.conflicts.iter().filter_map(move |(&(a, b), z)| {
            if a == e {
                Some((b, *z))
            } else if b == e {
                Some((
                    a,
                    ConflictZone {
                        range_a: z.range_b,
                        range_b: z.range_a,
                    },
                ))
            } else {
                None
            }
        })
    }

    /// World pose at an anchor.
    pub fn pose_at(&self, a: Anchor) -> (Vec2, Vec2) {
        self.edge(a.edge).centerline.point_at(a.s)
    }

    /// Shortest edge chain (by centerline length) from the end of `from` to
    /// the edge containing `to`. The returned chain starts with `from`.
    pub fn route(&self, from: EdgeId, to: EdgeId) -> Option<Vec<EdgeId>> {
        self.route_avoiding(from, to, &|_| false)
    }

    /// Like [`route`](Self::route), skipping edges the predicate marks as
    /// blocked (except the start and target edges themselves).
    pub fn route_avoiding(
        &self,
        from: EdgeId,
        to: EdgeId,
        blocked: &dyn Fn(EdgeId) -> bool,
    ) -> Option<Vec<EdgeId>> {
        if from == to {
            return Some(vec![from]);
        }
        let n = self.edges.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev: Vec<Option<EdgeId>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[from.0 as usize] = 0.0;
        heap.push(HeapEntry {
            cost: 0.0,
            edge: from,
        });
        while let Some(HeapEntry { cost, edge }) = heap.pop() {
            if cost > dist[edge.0 as usize] {
                continue;
            }
            if edge == to {
                break;
            }
            for &next in self.successors(edge) {
                if next != to && blocked(next) {
                    continue;
                }
                let c = cost + self.edge(next).length();
                if c < dist[next.0 as usize] {
                    dist[next.0 as usize] = c;
                    prev[next.0 as usize] = Some(edge);
                    heap.push(HeapEntry { cost: c, edge: next });
                }
            }
        }
        if dist[to.0 as usize].is_infinite() {
            return None;
        }
        let mut chain = vec![to];
        let mut cur = to;
        while let Some(p) = prev[cur.0 as usize] {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        Some(chain)
    }
}

struct HeapEntry {
    cost: f64,
    edge: EdgeId,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.edge == other.edge
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Min-heap on cost, with the edge id as a deterministic tie-break.
        other
            .cost
            .partial_cmp(&self.cost)
            .expect("finite route cost")
            .then_with(|| other.edge.cmp(&self.edge))
    }
}

/// Detect conflicting edge pairs by sampling both centerlines and looking for
/// sample pairs closer than the shrunk half-width sum. Edges that directly
/// continue one another are excluded; merges and diverges are kept.
fn compute_conflicts(edges: &[Edge]) -> BTreeMap<(EdgeId, EdgeId), ConflictZone> {
    let samples: Vec<Vec<(f64, Vec2)>> = edges
        .iter()
        .map(|e| e.centerline.sample(SAMPLE_STEP))
        .collect();
    let mut out = BTreeMap::new();
    for i in 0..edges.len() {
        for j in (i + 1)..edges.len() {
            let (a, b) = (&edges[i], &edges[j]);
            if a.to == b.from || b.to == a.from {
                continue; // continuation, handled by leader following
            }
            if a.detour_of == Some(EdgeId(j as u32)) || b.detour_of == Some(EdgeId(i as u32)) {
                continue; // a bypass shares endpoints with its own lane
            }
            let thresh = (a.width + b.width) * 0.5 * CONFLICT_SHRINK;
            let mut ra: Option<(f64, f64)> = None;
            let mut rb: Option<(f64, f64)> = None;
            for &(sa, pa) in &samples[i] {
                for &(sb, pb) in &samples[j] {
                    if pa.dist(pb) < thresh {
                        ra = Some(extend(ra, sa));
                        rb = Some(extend(rb, sb));
                    }
                }
            }
            if let (Some(range_a), Some(range_b)) = (ra, rb) {
                out.insert(
                    (EdgeId(i as u32), EdgeId(j as u32)),
                    ConflictZone { range_a, range_b },
                );
            }
        }
    }
    out
}

fn extend(r: Option<(f64, f64)>, s: f64) -> (f64, f64) {
    match r {
        None => (s, s),
        Some((lo, hi)) => (lo.min(s), hi.max(s)),
    }
}

/// For bypass edges, mark arc intervals farther than half a lane width from
/// the lane they detour from: that is where the vehicle sits across the
/// center line.
fn compute_center_cross(edges: &mut [Edge]) {
    for i in 0..edges.len() {
        let Some(own) = edges[i].detour_of else {
            continue;
        };
        let own_line = edges[own.0 as usize].centerline.clone();
        let half = edges[i].width * 0.5;
        let mut ranges: Vec<(f64, f64)> = Vec::new();
        let mut open: Option<(f64, f64)> = None;
        for (s, p) in edges[i].centerline.sample(SAMPLE_STEP) {
            if own_line.distance_to(p) > half {
                open = Some(extend(open, s));
            } else if let Some(r) = open.take() {
                ranges.push(r);
            }
        }
        if let Some(r) = open {
            ranges.push(r);
        }
        edges[i].center_cross = ranges;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(name: &str, from: u32, to: u32, pts: Vec<Vec2>) -> Edge {
        Edge {
            name: name.into(),
            from,
            to,
            centerline: Polyline::new(pts),
            width: 3.5,
            detour_of: None,
            center_cross: Vec::new(),
        }
    }

    fn crossing_graph() -> LaneGraph {
        // Horizontal edge through (0..40, 0), vertical edge through (20, -20..20).
        let nodes = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(40.0, 0.0),
            Vec2::new(20.0, -20.0),
            Vec2::new(20.0, 20.0),
        ];
        let edges = vec![
            edge("h", 0, 1, vec![Vec2::new(0.0, 0.0), Vec2::new(40.0, 0.0)]),
            edge("v", 2, 3, vec![Vec2::new(20.0, -20.0), Vec2::new(20.0, 20.0)]),
        ];
        LaneGraph::new(nodes, edges)
    }

    #[test]
    fn crossing_edges_conflict_near_intersection() {
        let g = crossing_graph();
        let z = g.conflict(EdgeId(0), EdgeId(1)).expect("conflict detected");
        // Crossing point is at s=20 on both; the zone spans roughly the
        // corridor width around it.
        assert!(z.range_a.0 < 20.0 && 20.0 < z.range_a.1);
        assert!(z.range_b.0 < 20.0 && 20.0 < z.range_b.1);
        assert!(z.range_a.1 - z.range_a.0 < 10.0);
    }

    #[test]
    fn conflict_lookup_is_symmetric() {
        let g = crossing_graph();
        let ab = g.conflict(EdgeId(0), EdgeId(1)).unwrap();
        let ba = g.conflict(EdgeId(1), EdgeId(0)).unwrap();
        assert_eq!(ab.range_a, ba.range_b);
        assert_eq!(ab.range_b, ba.range_a);
    }

    #[test]
    fn parallel_adjacent_lanes_do_not_conflict() {
        let nodes = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(40.0, 0.0),
            Vec2::new(40.0, 3.5),
            Vec2::new(0.0, 3.5),
        ];
        let edges = vec![
            edge("east", 0, 1, vec![Vec2::new(0.0, 0.0), Vec2::new(40.0, 0.0)]),
            edge("west", 2, 3, vec![Vec2::new(40.0, 3.5), Vec2::new(0.0, 3.5)]),
        ];
        let g = LaneGraph::new(nodes, edges);
        assert!(g.conflict(EdgeId(0), EdgeId(1)).is_none());
    }

    #[test]
    fn route_follows_shortest_chain() {
        // Triangle: a: 0->1 (10 m), b: 1->2 (10 m), c: 0->2 (50 m, long way).
        let nodes = vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), Vec2::new(20.0, 0.0)];
        let edges = vec![
            edge("a", 0, 1, vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)]),
            edge("b", 1, 2, vec![Vec2::new(10.0, 0.0), Vec2::new(20.0, 0.0)]),
            edge(
                "c",
                0,
                2,
                vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, -25.0), Vec2::new(20.0, 0.0)],
            ),
        ];
        let g = LaneGraph::new(nodes, edges);
        let chain = g.route(EdgeId(0), EdgeId(1)).unwrap();
        assert_eq!(chain, vec![EdgeId(0), EdgeId(1)]);
        assert!(g.route(EdgeId(1), EdgeId(0)).is_none());
    }
}
