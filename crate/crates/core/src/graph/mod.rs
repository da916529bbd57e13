//! Directed graphs in compressed sparse row form.
//!
//! A [`Graph`] is built once from an [`EdgeList`] and is read-only afterwards.
//! Vertex ids are dense `u32`s; the largest representable id (`u32::MAX`) is
//! reserved so that `num_vertices` always fits in a `u32` and can be used as
//! an "unset label" sentinel.

mod generate;
mod io;

pub use generate::generate_uniform;
pub use io::{load_edge_list, parse_binary, parse_text, write_binary, write_text, EdgeFormat};

use thiserror::Error;

/// Dense vertex identifier.
pub type VertexId = u32;

/// Largest vertex id accepted anywhere in the crate.
pub const MAX_VERTEX_ID: VertexId = u32::MAX - 1;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("byte offset {offset}: {message}")]
    ParseBinary { offset: usize, message: String },
    #[error("{location}: vertex id {value} out of range (limit {limit})")]
    Range {
        location: String,
        value: u64,
        limit: u64,
    },
    #[error("invalid CSR: {0}")]
    InvalidCsr(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Edges in file order, before any CSR construction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeList {
    pub edges: Vec<(VertexId, VertexId)>,
    pub declared_vertices: Option<usize>,
}

impl EdgeList {
    pub fn new(edges: Vec<(VertexId, VertexId)>) -> Self {
        Self {
            edges,
            declared_vertices: None,
        }
    }

    pub fn with_vertices(edges: Vec<(VertexId, VertexId)>, num_vertices: usize) -> Self {
        Self {
            edges,
            declared_vertices: Some(num_vertices),
        }
    }

    /// Declared vertex count, or one past the largest id seen.
    pub fn num_vertices(&self) -> usize {
        self.declared_vertices.unwrap_or_else(|| self.implied_vertices())
    }

    fn implied_vertices(&self) -> usize {
        self.edges
            .iter()
            .map(|&(s, d)| s.max(d) as usize + 1)
            .max()
            .unwrap_or(0)
    }
}

/// Compressed sparse row adjacency, source-major.
///
/// Targets within each source slice are sorted ascending. Duplicate edges are
/// kept, so the graph is a multigraph when the input is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<VertexId>,
}

impl Graph {
    /// Builds the CSR for `list`. Vertex count is `list.num_vertices()`.
    ///
    /// Panics if an edge references a vertex beyond a declared vertex count;
    /// the loaders never produce such lists.
    pub fn from_edge_list(list: &EdgeList) -> Self {
        let n = list.num_vertices();
        let mut offsets = vec![0usize; n + 1];
        for &(src, dst) in &list.edges {
            assert!(
                (src as usize) < n && (dst as usize) < n,
                "edge ({src}, {dst}) outside declared vertex count {n}"
            );
            offsets[src as usize + 1] += 1;
        }
        for v in 0..n {
            offsets[v + 1] += offsets[v];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0 as VertexId; list.edges.len()];
        for &(src, dst) in &list.edges {
            targets[cursor[src as usize]] = dst;
            cursor[src as usize] += 1;
        }
        for v in 0..n {
            targets[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Self { offsets, targets }
    }

    /// Wraps raw CSR arrays after checking every structural invariant.
    pub fn from_csr(offsets: Vec<usize>, targets: Vec<VertexId>) -> Result<Self, GraphError> {
        let Some(&first) = offsets.first() else {
            return Err(GraphError::InvalidCsr("offsets must be non-empty".into()));
        };
        if first != 0 {
            return Err(GraphError::InvalidCsr("offsets[0] must be 0".into()));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(GraphError::InvalidCsr("offsets must be non-decreasing".into()));
        }
        if *offsets.last().unwrap() != targets.len() {
            return Err(GraphError::InvalidCsr(
                "last offset must equal number of targets".into(),
            ));
        }
        let n = offsets.len() - 1;
        if n > MAX_VERTEX_ID as usize + 1 {
            return Err(GraphError::InvalidCsr(format!("too many vertices: {n}")));
        }
        if let Some(&t) = targets.iter().find(|&&t| t as usize >= n) {
            return Err(GraphError::InvalidCsr(format!(
                "target {t} out of range for {n} vertices"
            )));
        }
        for v in 0..n {
            if !targets[offsets[v]..offsets[v + 1]].is_sorted() {
                return Err(GraphError::InvalidCsr(format!(
                    "targets of vertex {v} are not sorted"
                )));
            }
        }
        Ok(Self { offsets, targets })
    }

    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn targets(&self) -> &[VertexId] {
        &self.targets
    }

    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        let v = v as usize;
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn out_degree(&self, v: VertexId) -> usize {
        let v = v as usize;
        self.offsets[v + 1] - self.offsets[v]
    }

    /// All edges in CSR order.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        (0..self.num_vertices()).flat_map(move |v| {
            self.targets[self.offsets[v]..self.offsets[v + 1]]
                .iter()
                .map(move |&t| (v as VertexId, t))
        })
    }

    pub fn to_edge_list(&self) -> EdgeList {
        EdgeList::with_vertices(self.edges().collect(), self.num_vertices())
    }

    /// Out-degree of every vertex.
    pub fn out_degrees(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Undirected version: every edge plus its reverse, duplicates collapsed.
    ///
    /// A reverse edge is only added when it is not already present, so the
    /// result has set semantics and between `E` and `2E` edges. Self-loops
    /// appear once.
    pub fn symmetrize(&self) -> Graph {
        let mut pairs = Vec::with_capacity(self.num_edges() * 2);
        for (s, d) in self.edges() {
            pairs.push((s, d));
            if s != d {
                pairs.push((d, s));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        Graph::from_edge_list(&EdgeList::with_vertices(pairs, self.num_vertices()))
    }
}

/// `d[v] = offsets[v+1] - offsets[v]`.
pub fn out_degrees(g: &Graph) -> Vec<usize> {
    g.out_degrees()
}
