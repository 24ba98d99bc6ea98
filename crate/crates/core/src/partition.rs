//! The Markov chain state: a district map over the adjacency graph with
//! incrementally maintained per-district demographic tallies.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AdjacencyGraph, Crosswalk, SpatialUnit};
use crate::metrics::GroupSchema;

/// Per-district (or per-node) population counts, ordered by the group schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub groups: Vec<u64>,
    pub total: u64,
}

impl Tally {
    pub fn zero(k: usize) -> Self {
        Tally {
            groups: vec![0; k],
            total: 0,
        }
    }

    fn add(&mut self, other: &Tally) {
        for (g, o) in self.groups.iter_mut().zip(&other.groups) {
            *g += o;
        }
        self.total += other.total;
    }

    fn sub(&mut self, other: &Tally) {
        for (g, o) in self.groups.iter_mut().zip(&other.groups) {
            *g = g.checked_sub(*o).expect("tally underflow");
        }
        self.total = self.total.checked_sub(other.total).expect("tally underflow");
    }
}

/// Assignment of graph nodes to district labels, plus running tallies.
///
/// The label set is fixed at construction; a district may transiently hold
/// zero units inside a proposal, which the validators then reject. Cheap to
/// clone: per-node counts and labels are shared.
#[derive(Debug, Clone, PartialEq)]
pub struct DistrictMap {
    labels: Arc<Vec<String>>,
    node_counts: Arc<Vec<Tally>>,
    assignment: Vec<u32>,
    tallies: Vec<Tally>,
    step_index: u64,
}

impl DistrictMap {
    /// Seed state of a chain: the crosswalked historical map at step 0.
    ///
    /// Every graph node must be assigned in the crosswalk (excluded units
    /// are not in the graph), and at least two districts must remain.
    pub fn from_crosswalk(
        crosswalk: &Crosswalk,
        graph: &AdjacencyGraph,
        units: &[SpatialUnit],
        schema: &GroupSchema,
    ) -> Result<Self> {
        let mut labels: Vec<String> = crosswalk
            .assignment
            .values()
            .cloned()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        labels.sort();
        if labels.len() < 2 {
            return Err(Error::Region(format!(
                "need at least two districts, found {}",
                labels.len()
            )));
        }
        let label_index: BTreeMap<&str, u32> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as u32))
            .collect();

        let by_id: BTreeMap<&str, &SpatialUnit> =
            units.iter().map(|u| (u.id.as_str(), u)).collect();

        let k = schema.k();
        let mut node_counts = Vec::with_capacity(graph.node_count());
        let mut assignment = Vec::with_capacity(graph.node_count());
        let mut tallies = vec![Tally::zero(k); labels.len()];
        for node in 0..graph.node_count() as u32 {
            let id = graph.id(node);
            let label = crosswalk.assignment.get(id).ok_or_else(|| {
                Error::Contract(format!("graph node `{id}` is not assigned in the crosswalk"))
            })?;
            let district = label_index[label.as_str()];
            let unit = by_id
                .get(id)
                .ok_or_else(|| Error::Contract(format!("unknown unit `{id}`")))?;
            let counts = Tally {
                groups: schema.labels().iter().map(|l| unit.count(l)).collect(),
                total: schema.labels().iter().map(|l| unit.count(l)).sum(),
            };
            tallies[district as usize].add(&counts);
            node_counts.push(counts);
            assignment.push(district);
        }

        Ok(DistrictMap {
            labels: Arc::new(labels),
            node_counts: Arc::new(node_counts),
            assignment,
            tallies,
            step_index: 0,
        })
    }

    /// Build directly from parts: sorted unique labels, per-node counts, and
    /// a node→district assignment. Tallies are computed here. This is the
    /// geometry-free entry point (artifact loading, tally tables in tests).
    pub fn new(
        labels: Vec<String>,
        node_counts: Vec<Tally>,
        assignment: Vec<u32>,
    ) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Region(format!(
                "need at least two districts, found {}",
                labels.len()
            )));
        }
        if labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract(
                "district labels must be sorted and unique".into(),
            ));
        }
        if node_counts.len() != assignment.len() || node_counts.is_empty() {
            return Err(Error::Contract(
                "node counts and assignment must be non-empty and equal length".into(),
            ));
        }
        let k = node_counts[0].groups.len();
        if node_counts.iter().any(|t| t.groups.len() != k) {
            return Err(Error::Contract("ragged group counts".into()));
        }
        let mut tallies = vec![Tally::zero(k); labels.len()];
        for (node, &d) in assignment.iter().enumerate() {
            if d as usize >= labels.len() {
                return Err(Error::Contract(format!("district {d} out of range")));
            }
            tallies[d as usize].add(&node_counts[node]);
        }
        Ok(DistrictMap {
            labels: Arc::new(labels),
            node_counts: Arc::new(node_counts),
            assignment,
            tallies,
            step_index: 0,
        })
    }

    /// Number of districts (fixed label count).
    pub fn z(&self) -> usize {
        self.labels.len()
    }

    /// Number of population groups per tally.
    pub fn group_count(&self) -> usize {
        self.node_counts.first().map_or(0, |t| t.groups.len())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, district: u32) -> &str {
        &self.labels[district as usize]
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn district_of(&self, node: u32) -> u32 {
        self.assignment[node as usize]
    }

    pub fn tallies(&self) -> &[Tally] {
        &self.tallies
    }

    pub fn tally(&self, district: u32) -> &Tally {
        &self.tallies[district as usize]
    }

    pub fn node_counts(&self) -> &[Tally] {
        &self.node_counts
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub(crate) fn set_step_index(&mut self, t: u64) {
        self.step_index = t;
    }

    /// Node indices currently in a district.
    pub fn district_nodes(&self, district: u32) -> Vec<u32> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == district)
            .map(|(n, _)| n as u32)
            .collect()
    }

    /// Relabel a chunk of nodes to `target`, updating tallies incrementally
    /// and advancing the step index. The chunk must share a single source
    /// district different from `target`; an empty chunk is an identity move.
    pub fn apply_flip(&self, chunk: &[u32], target: u32) -> Result<DistrictMap> {
        let mut next = self.clone();
        next.apply_flip_in_place(chunk, target)?;
        Ok(next)
    }

    pub(crate) fn apply_flip_in_place(&mut self, chunk: &[u32], target: u32) -> Result<()> {
        if target as usize >= self.z() {
            return Err(Error::Contract(format!(
                "flip target {target} out of range (z = {})",
                self.z()
            )));
        }
        self.step_index += 1;
        let Some(&first) = chunk.first() else {
            return Ok(());
        };
        let source = self.assignment[first as usize];
        if source == target {
            return Err(Error::Contract(
                "flip source equals target district".into(),
            ));
        }
        for &node in chunk {
            if self.assignment[node as usize] != source {
                return Err(Error::Contract(
                    "mixed-source chunk: nodes span multiple districts".into(),
                ));
            }
        }
        for &node in chunk {
            let counts = &self.node_counts[node as usize];
            self.tallies[source as usize].sub(counts);
            self.tallies[target as usize].add(counts);
            self.assignment[node as usize] = target;
        }
        Ok(())
    }

    /// Rebuild a map from a stored assignment (snapshot resume). Tallies are
    /// recomputed from the shared per-node counts.
    pub fn with_assignment(&self, assignment: Vec<u32>, step_index: u64) -> Result<DistrictMap> {
        if assignment.len() != self.assignment.len() {
            return Err(Error::Contract(
                "assignment length does not match node count".into(),
            ));
        }
        let k = self.group_count();
        let mut tallies = vec![Tally::zero(k); self.z()];
        for (node, &d) in assignment.iter().enumerate() {
            if d as usize >= self.z() {
                return Err(Error::Contract(format!("district {d} out of range")));
            }
            tallies[d as usize].add(&self.node_counts[node]);
        }
        Ok(DistrictMap {
            labels: Arc::clone(&self.labels),
            node_counts: Arc::clone(&self.node_counts),
            assignment,
            tallies,
            step_index,
        })
    }

    /// Full tally recomputation; the oracle for the incremental updates.
    pub fn recomputed_tallies(&self) -> Vec<Tally> {
        let k = self.group_count();
        let mut tallies = vec![Tally::zero(k); self.z()];
        for (node, &d) in self.assignment.iter().enumerate() {
            tallies[d as usize].add(&self.node_counts[node]);
        }
        tallies
    }
}

/// A pair of adjacent districts with every graph edge crossing between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistrictEdge {
    /// District indices, smaller first.
    pub districts: (u32, u32),
    /// Graph edges (u, v) with u in `districts.0`... or either side; cut
    /// edges keep the graph's (u < v) node order.
    pub cut_edges: Vec<(u32, u32)>,
}

/// Every unordered district pair with at least one cut edge, sorted by pair.
pub fn district_edges(map: &DistrictMap, graph: &AdjacencyGraph) -> Vec<DistrictEdge> {
    let mut pairs: BTreeMap<(u32, u32), Vec<(u32, u32)>> = BTreeMap::new();
    for &(u, v) in graph.edges() {
        let (du, dv) = (map.district_of(u), map.district_of(v));
        if du != dv {
            let key = (du.min(dv), du.max(dv));
            pairs.entry(key).or_default().push((u, v));
        }
    }
    pairs
        .into_iter()
        .map(|(districts, cut_edges)| DistrictEdge {
            districts,
            cut_edges,
        })
        .collect()
}
