//! Contiguous vertex chunks and the per-chunk edge layouts built from them.

use std::ops::Range;

use crate::graph::{Graph, GraphError, VertexId};

/// Assignment of `[0, num_vertices)` to `num_chunks` contiguous ranges of
/// `ceil(num_vertices / num_chunks)` vertices. Trailing chunks may be short
/// or empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Partition {
    num_vertices: usize,
    num_chunks: usize,
    chunk_size: usize,
}

impl Partition {
    pub fn new(num_vertices: usize, num_chunks: usize) -> Self {
        assert!(num_chunks >= 1, "need at least one chunk");
        Self {
            num_vertices,
            num_chunks,
            chunk_size: num_vertices.div_ceil(num_chunks),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_chunks(&self) -> usize {
        self.num_chunks
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    /// First vertex owned by chunk `c` (clamped to `num_vertices` for empty
    /// trailing chunks).
    pub fn base(&self, c: usize) -> usize {
        (c * self.chunk_size).min(self.num_vertices)
    }

    pub fn range(&self, c: usize) -> Range<usize> {
        self.base(c)..self.base(c + 1)
    }

    pub fn len(&self, c: usize) -> usize {
        self.range(c).len()
    }

    pub fn is_empty(&self, c: usize) -> bool {
        self.len(c) == 0
    }

    /// Chunk owning `v`. Requires `v < num_vertices`.
    #[inline]
    pub fn chunk_of(&self, v: VertexId) -> usize {
        debug_assert!((v as usize) < self.num_vertices);
        v as usize / self.chunk_size
    }
}

pub fn chunk_of(v: VertexId, p: &Partition) -> usize {
    p.chunk_of(v)
}

/// Source-major edges of one chunk: local vertices in id order, each with its
/// outgoing destinations (global ids) ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkEdges {
    pub chunk: usize,
    pub base: usize,
    offsets: Vec<usize>,
    targets: Vec<VertexId>,
}

impl ChunkEdges {
    pub fn num_local(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    /// Out-degree of each local vertex.
    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.offsets.windows(2).map(|w| w[1] - w[0])
    }

    pub fn targets_of(&self, local: usize) -> &[VertexId] {
        &self.targets[self.offsets[local]..self.offsets[local + 1]]
    }

    /// `(local source, destination)` pairs in storage order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, VertexId)> + '_ {
        (0..self.num_local()).flat_map(move |l| self.targets_of(l).iter().map(move |&t| (l, t)))
    }
}

/// Splits `g` into `num_chunks` source-major chunks.
pub fn build_chunks(g: &Graph, num_chunks: usize) -> Vec<ChunkEdges> {
    let p = Partition::new(g.num_vertices(), num_chunks);
    (0..num_chunks).map(|c| chunk_edges(g, &p, c)).collect()
}

pub fn chunk_edges(g: &Graph, p: &Partition, c: usize) -> ChunkEdges {
    let range = p.range(c);
    let offsets = g.offsets();
    let start = offsets[range.start];
    ChunkEdges {
        chunk: c,
        base: range.start,
        offsets: offsets[range.start..=range.end].iter().map(|o| o - start).collect(),
        targets: g.targets()[start..offsets[range.end]].to_vec(),
    }
}

/// Reassembles chunks (in order) into the graph they were cut from.
pub fn concat_chunks(chunks: &[ChunkEdges]) -> Result<Graph, GraphError> {
    let mut offsets = vec![0usize];
    let mut targets = Vec::new();
    for chunk in chunks {
        for l in 0..chunk.num_local() {
            targets.extend_from_slice(chunk.targets_of(l));
            offsets.push(targets.len());
        }
    }
    Graph::from_csr(offsets, targets)
}

/// Edges of one chunk regrouped as `(destination, local sources)`, grouped by
/// destination chunk. Destination chunks without edges are omitted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DestMajorEdges {
    pub blocks: Vec<DestBlock>,
}

/// All groups bound for one destination chunk, ascending by destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DestBlock {
    pub dest_chunk: usize,
    dests: Vec<VertexId>,
    group_offsets: Vec<usize>,
    sources: Vec<u32>,
}

impl DestBlock {
    pub fn num_groups(&self) -> usize {
        self.dests.len()
    }

    pub fn num_edges(&self) -> usize {
        self.sources.len()
    }

    /// `(destination, local sources)` in ascending destination order.
    pub fn groups(&self) -> impl Iterator<Item = (VertexId, &[u32])> + '_ {
        self.dests
            .iter()
            .enumerate()
            .map(move |(i, &d)| (d, &self.sources[self.group_offsets[i]..self.group_offsets[i + 1]]))
    }
}

impl DestMajorEdges {
    pub fn num_edges(&self) -> usize {
        self.blocks.iter().map(DestBlock::num_edges).sum()
    }

    /// `(local source, destination)` pairs, in destination-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, VertexId)> + '_ {
        self.blocks.iter().flat_map(|b| {
            b.groups()
                .flat_map(|(d, srcs)| srcs.iter().map(move |&s| (s as usize, d)))
        })
    }
}

/// Regroups a chunk's edges by `(destination chunk, destination)`.
///
/// The sort is stable, so sources within a group keep ascending local order.
pub fn to_dest_major(c: &ChunkEdges, p: &Partition) -> DestMajorEdges {
    let mut pairs: Vec<(VertexId, u32)> = c.edges().map(|(l, d)| (d, l as u32)).collect();
    // Edges are produced with ascending local source, so a stable sort by
    // destination keeps each group's sources ascending.
    pairs.sort_by_key(|&(d, _)| d);

    let mut blocks: Vec<DestBlock> = Vec::new();
    for (dest, src) in pairs {
        let q = p.chunk_of(dest);
        if blocks.last().is_none_or(|b| b.dest_chunk != q) {
            blocks.push(DestBlock {
                dest_chunk: q,
                dests: Vec::new(),
                group_offsets: vec![0],
                sources: Vec::new(),
            });
        }
        let block = blocks.last_mut().unwrap();
        if block.dests.last() != Some(&dest) {
            block.dests.push(dest);
            block.group_offsets.push(block.sources.len());
        }
        block.sources.push(src);
        *block.group_offsets.last_mut().unwrap() = block.sources.len();
    }
    DestMajorEdges { blocks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_uniform, EdgeList};
    use proptest::prelude::*;

    fn graph(edges: &[(u32, u32)], n: usize) -> Graph {
        Graph::from_edge_list(&EdgeList::with_vertices(edges.to_vec(), n))
    }

    #[test]
    fn chunk_of_examples() {
        let p = Partition::new(10, 4);
        assert_eq!(p.chunk_size(), 3);
        assert_eq!(chunk_of(9, &p), 3);
        let one = Partition::new(10, 1);
        assert!((0..10).all(|v| chunk_of(v, &one) == 0));
        assert_eq!(chunk_of(2, &Partition::new(4, 4)), 2);
    }

    #[test]
    fn trailing_chunks_may_be_empty() {
        let p = Partition::new(4, 3);
        assert_eq!(p.range(0), 0..2);
        assert_eq!(p.range(1), 2..4);
        assert!(p.is_empty(2));
        let more = Partition::new(2, 5);
        assert_eq!((0..5).map(|c| more.len(c)).collect::<Vec<_>>(), vec![1, 1, 0, 0, 0]);
        let none = Partition::new(0, 3);
        assert!((0..3).all(|c| none.is_empty(c)));
    }

    #[test]
    fn two_cycle_two_chunks() {
        let chunks = build_chunks(&graph(&[(0, 1), (1, 0)], 2), 2);
        assert_eq!(chunks[0].targets_of(0), &[1]);
        assert_eq!(chunks[1].targets_of(0), &[0]);
        assert_eq!(chunks[1].base, 1);
    }

    #[test]
    fn single_chunk_is_identity() {
        let g = Graph::from_edge_list(&generate_uniform(50, 200, 3));
        let chunks = build_chunks(&g, 1);
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].num_edges(), g.num_edges());
        assert_eq!(concat_chunks(&chunks).unwrap(), g);
    }

    #[test]
    fn random_graph_four_chunks_round_trip() {
        let g = Graph::from_edge_list(&generate_uniform(1000, 5000, 7));
        let chunks = build_chunks(&g, 4);
        assert_eq!(concat_chunks(&chunks).unwrap(), g);
        let degree_sum: usize = chunks.iter().flat_map(|c| c.degrees()).sum();
        assert_eq!(degree_sum, g.num_edges());
    }

    #[test]
    fn dest_major_hand_example() {
        // chunk 0 of a 12-vertex graph with chunk_size 4: 0->5, 1->5, 0->9
        let g = graph(&[(0, 5), (1, 5), (0, 9)], 12);
        let p = Partition::new(12, 3);
        assert_eq!(p.chunk_size(), 4);
        let dm = to_dest_major(&chunk_edges(&g, &p, 0), &p);
        type Group = (u32, Vec<u32>);
        let view: Vec<(usize, Vec<Group>)> = dm
            .blocks
            .iter()
            .map(|b| (b.dest_chunk, b.groups().map(|(d, s)| (d, s.to_vec())).collect()))
            .collect();
        assert_eq!(view, vec![(1, vec![(5, vec![0, 1])]), (2, vec![(9, vec![0])])]);
    }

    #[test]
    fn dest_major_empty_chunk() {
        let g = graph(&[], 4);
        let p = Partition::new(4, 2);
        assert!(to_dest_major(&chunk_edges(&g, &p, 1), &p).blocks.is_empty());
    }

    proptest! {
        #[test]
        fn chunk_of_brackets_vertex(n in 1usize..500, k in 1usize..40) {
            let p = Partition::new(n, k);
            let mut covered = 0;
            for c in 0..k {
                let r = p.range(c);
                prop_assert_eq!(r.start, covered);
                covered = r.end;
                if c + 1 < k && !p.is_empty(c + 1) {
                    prop_assert_eq!(r.len(), p.chunk_size());
                }
            }
            prop_assert_eq!(covered, n);
            for v in 0..n as u32 {
                let c = p.chunk_of(v);
                prop_assert!(c < k);
                prop_assert!(p.base(c) <= v as usize && (v as usize) < p.base(c) + p.chunk_size());
            }
        }

        #[test]
        fn chunks_and_dest_major_preserve_edges(
            edges in prop::collection::vec((0u32..50, 0u32..50), 0..300),
            k in 1usize..9,
        ) {
            let g = graph(&edges, 50);
            let chunks = build_chunks(&g, k);
            prop_assert_eq!(&concat_chunks(&chunks).unwrap(), &g);
            let p = Partition::new(50, k);
            for c in &chunks {
                let dm = to_dest_major(c, &p);
                let mut lhs: Vec<_> = c.edges().collect();
                let mut rhs: Vec<_> = dm.pairs().collect();
                lhs.sort_unstable();
                rhs.sort_unstable();
                prop_assert_eq!(lhs, rhs);
                let mut last_chunk = None;
                for b in &dm.blocks {
                    prop_assert!(last_chunk < Some(b.dest_chunk));
                    last_chunk = Some(b.dest_chunk);
                    let dests: Vec<u32> = b.groups().map(|(d, s)| {
                        assert!(!s.is_empty() && s.is_sorted());
                        d
                    }).collect();
                    prop_assert!(dests.windows(2).all(|w| w[0] < w[1]));
                    prop_assert!(dests.iter().all(|&d| p.chunk_of(d) == b.dest_chunk));
                }
            }
        }
    }
}
