//! Chunk-flip proposal kernel.
//!
//! A proposal perturbs the current map by repeatedly picking a pair of
//! adjacent districts, growing a small connected chunk on one side of the
//! boundary, and flipping it to the other side.

use rand::{Rng, RngExt};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::AdjacencyGraph;
use crate::partition::{district_edges, DistrictMap};

/// How many fresh chunks to draw before giving up on one sub-flip when
/// contiguity enforcement keeps rejecting them.
const MAX_CONTIGUITY_REDRAWS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalConfig {
    /// Chunk sizes are drawn uniformly from {1, ..., max_chunk_size}.
    pub max_chunk_size: usize,
    pub rng_seed: u64,
    /// Reject chunks whose removal disconnects the source district.
    pub enforce_contiguity: bool,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig {
            max_chunk_size: 5,
            rng_seed: 0,
            enforce_contiguity: true,
        }
    }
}

impl ProposalConfig {
    /// RNG for standalone proposal use outside a chain.
    pub fn rng(&self) -> ChaCha8Rng {
        use rand::SeedableRng;
        ChaCha8Rng::seed_from_u64(self.rng_seed)
    }
}

/// One-off proposal; chains hold a [`Proposer`] to reuse scratch buffers.
pub fn propose<R: Rng>(
    map: &DistrictMap,
    graph: &AdjacencyGraph,
    cfg: &ProposalConfig,
    rng: &mut R,
) -> DistrictMap {
    Proposer::new(*cfg).propose(map, graph, rng)
}

/// True iff the source district minus the chunk induces a connected
/// subgraph (vacuously true when nothing remains).
pub fn source_is_connected_after_removal(
    map: &DistrictMap,
    graph: &AdjacencyGraph,
    chunk: &[u32],
) -> bool {
    let mut scratch = Scratch::new(graph.node_count());
    scratch.connected_after_removal(map, graph, chunk)
}

/// Epoch-stamped visit marks, reused across proposals to avoid clearing.
#[derive(Debug, Clone)]
struct Scratch {
    stamp: Vec<u64>,
    epoch: u64,
    queue: Vec<u32>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            stamp: vec![0; n],
            epoch: 0,
            queue: Vec::new(),
        }
    }

    fn begin(&mut self) {
        self.epoch += 1;
        self.queue.clear();
    }

    fn mark(&mut self, node: u32) {
        self.stamp[node as usize] = self.epoch;
    }

    fn marked(&self, node: u32) -> bool {
        self.stamp[node as usize] == self.epoch
    }

    /// Connectivity of (source district of chunk[0]) minus chunk.
    fn connected_after_removal(
        &mut self,
        map: &DistrictMap,
        graph: &AdjacencyGraph,
        chunk: &[u32],
    ) -> bool {
        let Some(&first) = chunk.first() else {
            return true;
        };
        let source = map.district_of(first);

        // Mark the chunk as removed.
        self.begin();
        for &c in chunk {
            debug_assert_eq!(map.district_of(c), source, "chunk spans districts");
            self.mark(c);
        }

        let source_size = map.assignment().iter().filter(|&&d| d == source).count();
        let remaining = source_size.saturating_sub(chunk.len());
        if remaining == 0 {
            return true;
        }

        // BFS over the remainder from any surviving source node. The chunk
        // keeps its marks; survivors get marked as visited.
        let start = map
            .assignment()
            .iter()
            .enumerate()
            .find(|&(n, &d)| d == source && !self.marked(n as u32))
            .map(|(n, _)| n as u32)
            .expect("remaining > 0 implies a surviving node");

        self.queue.clear();
        self.queue.push(start);
        self.mark(start);
        let mut visited = 1usize;
        let mut head = 0usize;
        while head < self.queue.len() {
            let u = self.queue[head];
            head += 1;
            for &v in graph.neighbors(u) {
                if map.district_of(v) == source && !self.marked(v) {
                    self.mark(v);
                    self.queue.push(v);
                    visited += 1;
                }
            }
        }
        visited == remaining
    }

    /// Randomized BFS chunk growth from `seed`, staying inside the seed's
    /// district, up to `size` nodes. Returns a sorted chunk.
    fn grow_chunk<R: Rng>(
        &mut self,
        map: &DistrictMap,
        graph: &AdjacencyGraph,
        seed: u32,
        size: usize,
        rng: &mut R,
    ) -> Vec<u32> {
        let source = map.district_of(seed);
        self.begin();
        self.mark(seed);
        let mut chunk = vec![seed];
        let mut frontier: Vec<u32> = Vec::new();
        for &v in graph.neighbors(seed) {
            if map.district_of(v) == source {
                frontier.push(v);
            }
        }
        while chunk.len() < size && !frontier.is_empty() {
            let i = rng.random_range(0..frontier.len());
            let u = frontier.swap_remove(i);
            if self.marked(u) {
                continue;
            }
            self.mark(u);
            chunk.push(u);
            for &v in graph.neighbors(u) {
                if map.district_of(v) == source && !self.marked(v) {
                    frontier.push(v);
                }
            }
        }
        chunk.sort_unstable();
        chunk
    }
}

/// Reusable proposal kernel owning its scratch space.
#[derive(Debug, Clone)]
pub struct Proposer {
    cfg: ProposalConfig,
    scratch: Scratch,
}

impl Proposer {
    pub fn new(cfg: ProposalConfig) -> Self {
        Proposer {
            cfg,
            scratch: Scratch::new(0),
        }
    }

    pub fn config(&self) -> &ProposalConfig {
        &self.cfg
    }

    /// Produce a candidate map: draw r ~ U{1..|district edges|}, then apply
    /// r sub-flips, each picking a district edge, a direction, a boundary
    /// seed unit, and a chunk size at random. Sub-flips that keep failing
    /// the contiguity guard are skipped. The candidate's step index is the
    /// input's plus one, whether or not any sub-flip applied.
    pub fn propose<R: Rng>(
        &mut self,
        map: &DistrictMap,
        graph: &AdjacencyGraph,
        rng: &mut R,
    ) -> DistrictMap {
        if self.scratch.stamp.len() != graph.node_count() {
            self.scratch = Scratch::new(graph.node_count());
        }
        let mut candidate = map.clone();
        let initial_edges = district_edges(map, graph).len();
        if initial_edges == 0 {
            candidate.set_step_index(map.step_index() + 1);
            return candidate;
        }
        let r = rng.random_range(1..=initial_edges);
        for _ in 0..r {
            self.sub_flip(&mut candidate, graph, rng);
        }
        candidate.set_step_index(map.step_index() + 1);
        candidate
    }

    fn sub_flip<R: Rng>(&mut self, candidate: &mut DistrictMap, graph: &AdjacencyGraph, rng: &mut R) {
        let edges = district_edges(candidate, graph);
        if edges.is_empty() {
            return;
        }
        let edge = &edges[rng.random_range(0..edges.len())];
        let (a, b) = edge.districts;
        let (source, target) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };

        // Boundary units of the source district along this district edge.
        let mut seeds: Vec<u32> = edge
            .cut_edges
            .iter()
            .map(|&(u, v)| {
                if candidate.district_of(u) == source {
                    u
                } else {
                    v
                }
            })
            .collect();
        seeds.sort_unstable();
        seeds.dedup();

        for _ in 0..MAX_CONTIGUITY_REDRAWS {
            let seed = seeds[rng.random_range(0..seeds.len())];
            let size = rng.random_range(1..=self.cfg.max_chunk_size);
            let chunk = self.scratch.grow_chunk(candidate, graph, seed, size, rng);
            if self.cfg.enforce_contiguity
                && !self.scratch.connected_after_removal(candidate, graph, &chunk)
            {
                continue;
            }
            candidate
                .apply_flip_in_place(&chunk, target)
                .expect("chunk built from a single source district");
            // apply_flip_in_place advanced the step; propose() sets the
            // final step index, so undo the intermediate bump here.
            candidate.set_step_index(candidate.step_index() - 1);
            return;
        }
    }
}
