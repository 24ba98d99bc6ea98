//! Rook adjacency over a layer of unit polygons.
//!
//! Two units are adjacent iff their boundaries share a segment of positive
//! length; corner contact does not count.

use std::collections::HashMap;

use geo::line_intersection::{line_intersection, LineIntersection};
use geo::{BoundingRect, Euclidean, Length, Line, LinesIter, MultiPolygon};
use rstar::{RTree, RTreeObject, AABB};

use crate::error::{Error, Result};
use crate::geometry::SpatialUnit;

/// Undirected adjacency graph over spatial units. Nodes are indexed by
/// position in the id-sorted unit order, so the graph is independent of
/// input ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyGraph {
    ids: Vec<String>,
    index: HashMap<String, u32>,
    neighbors: Vec<Vec<u32>>,
    edges: Vec<(u32, u32)>,
    shared_perimeter: Vec<f64>,
}

impl AdjacencyGraph {
    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, node: u32) -> &str {
        &self.ids[node as usize]
    }

    pub fn node(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, node: u32) -> &[u32] {
        &self.neighbors[node as usize]
    }

    /// Edges as (u, v) pairs with u < v, sorted lexicographically.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Shared boundary length for the i-th edge of `edges()`.
    pub fn shared_perimeter(&self, edge_idx: usize) -> f64 {
        self.shared_perimeter[edge_idx]
    }

    pub fn contains_edge(&self, u: u32, v: u32) -> bool {
        self.neighbors[u as usize].binary_search(&v).is_ok()
    }

    /// Build directly from parts; used by ingest-artifact loading.
    pub fn from_parts(
        ids: Vec<String>,
        edges: Vec<(u32, u32)>,
        shared_perimeter: Vec<f64>,
    ) -> Result<Self> {
        if edges.len() != shared_perimeter.len() {
            return Err(Error::Contract(
                "edge and shared-perimeter lists differ in length".into(),
            ));
        }
        let n = ids.len() as u32;
        let index: HashMap<String, u32> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        if index.len() != ids.len() {
            return Err(Error::Contract("duplicate unit id in graph".into()));
        }
        let mut neighbors = vec![Vec::new(); ids.len()];
        for &(u, v) in &edges {
            if u >= n || v >= n || u == v {
                return Err(Error::Contract(format!("bad edge ({u}, {v})")));
            }
            neighbors[u as usize].push(v);
            neighbors[v as usize].push(u);
        }
        for adj in &mut neighbors {
            adj.sort_unstable();
        }
        Ok(AdjacencyGraph {
            ids,
            index,
            neighbors,
            edges,
            shared_perimeter,
        })
    }
}

#[derive(Debug, Clone)]
struct BoundingBox {
    idx: usize,
    envelope: AABB<[f64; 2]>,
}

impl RTreeObject for BoundingBox {
    type Envelope = AABB<[f64; 2]>;

    fn envelope(&self) -> Self::Envelope {
        self.envelope
    }
}

/// Rook adjacency: an edge exists iff two units share a boundary segment of
/// positive total length. Shared perimeter is recorded per edge.
pub fn build_adjacency(units: &[SpatialUnit]) -> Result<AdjacencyGraph> {
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&a, &b| units[a].id.cmp(&units[b].id));

    let ids: Vec<String> = order.iter().map(|&i| units[i].id.clone()).collect();
    for w in ids.windows(2) {
        if w[0] == w[1] {
            return Err(Error::Contract(format!("duplicate unit id `{}`", w[0])));
        }
    }
    let geoms: Vec<&MultiPolygon<f64>> = order.iter().map(|&i| &units[i].geometry).collect();

    let boxes: Vec<BoundingBox> = geoms
        .iter()
        .enumerate()
        .filter_map(|(idx, g)| {
            g.bounding_rect().map(|r| BoundingBox {
                idx,
                envelope: AABB::from_corners(r.min().into(), r.max().into()),
            })
        })
        .collect();
    let rtree = RTree::bulk_load(boxes);

    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut shared: Vec<f64> = Vec::new();
    for (i, geom) in geoms.iter().enumerate() {
        let Some(r) = geom.bounding_rect() else {
            continue;
        };
        let envelope = AABB::from_corners(r.min().into(), r.max().into());
        let mut candidates: Vec<usize> = rtree
            .locate_in_envelope_intersecting(envelope)
            .map(|b| b.idx)
            .filter(|&j| j > i)
            .collect();
        candidates.sort_unstable();
        for j in candidates {
            let len = shared_boundary_length(geom, geoms[j]);
            if len > 0.0 {
                edges.push((i as u32, j as u32));
                shared.push(len);
            }
        }
    }

    AdjacencyGraph::from_parts(ids, edges, shared)
}

/// Total length of the collinear overlap between the boundaries of two
/// polygons. Point contact contributes zero.
fn shared_boundary_length(a: &MultiPolygon<f64>, b: &MultiPolygon<f64>) -> f64 {
    let b_lines: Vec<Line<f64>> = b.lines_iter().collect();
    let mut total = 0.0;
    for la in a.lines_iter() {
        for &lb in &b_lines {
            if !segment_bboxes_touch(&la, &lb) {
                continue;
            }
            if let Some(LineIntersection::Collinear { intersection }) = line_intersection(la, lb) {
                total += Euclidean.length(&intersection);
            }
        }
    }
    total
}

fn segment_bboxes_touch(a: &Line<f64>, b: &Line<f64>) -> bool {
    let (ax0, ax1) = minmax(a.start.x, a.end.x);
    let (ay0, ay1) = minmax(a.start.y, a.end.y);
    let (bx0, bx1) = minmax(b.start.x, b.end.x);
    let (by0, by1) = minmax(b.start.y, b.end.y);
    ax0 <= bx1 && bx0 <= ax1 && ay0 <= by1 && by0 <= ay1
}

fn minmax(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}
