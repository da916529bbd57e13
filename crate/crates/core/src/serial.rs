//! Single-threaded reference implementations.
//!
//! These are the baselines every parallel variant is timed against and the
//! oracles they are checked against. PageRank follows the classic twenty
//! iteration loop over `f32` arrays `a`, `b` and `d`; label propagation
//! rescans every edge until a full pass changes nothing.

use crate::graph::{Graph, VertexId};

pub const DEFAULT_ALPHA: f32 = 0.85;
pub const DEFAULT_ITERATIONS: usize = 20;

/// PageRank state over the whole vertex range.
#[derive(Debug, Clone)]
pub struct RankState {
    /// Rank accumulator.
    pub a: Vec<f32>,
    /// Scaled outgoing contribution, `alpha * a / d`.
    pub b: Vec<f32>,
    /// Out-degree, kept as `f32` like the arithmetic that consumes it.
    pub d: Vec<f32>,
    pub alpha: f32,
}

impl RankState {
    pub fn new(g: &Graph, alpha: f32) -> Self {
        let n = g.num_vertices();
        Self {
            a: vec![0.0; n],
            b: vec![0.0; n],
            d: g.out_degrees().into_iter().map(|d| d as f32).collect(),
            alpha,
        }
    }

    /// Computes outgoing contributions and resets every rank to `1 - alpha`.
    pub fn update(&mut self) {
        update_ranks(&mut self.a, &mut self.b, &self.d, self.alpha);
    }
}

/// Dangling vertices (degree 0) get `b = 0` rather than a non-finite value;
/// nothing ever reads it.
#[inline]
pub fn update_ranks(a: &mut [f32], b: &mut [f32], d: &[f32], alpha: f32) {
    for ((a, b), &d) in a.iter_mut().zip(b.iter_mut()).zip(d) {
        *b = if d > 0.0 { alpha * *a / d } else { 0.0 };
        *a = 1.0 - alpha;
    }
}

pub fn pagerank_serial(g: &Graph, alpha: f32, iterations: usize) -> Vec<f32> {
    let mut state = RankState::new(g, alpha);
    let offsets = g.offsets();
    let targets = g.targets();
    for _ in 0..iterations {
        state.update();
        let (a, b) = (&mut state.a, &state.b);
        for (x, &bx) in b.iter().enumerate() {
            for &y in &targets[offsets[x]..offsets[x + 1]] {
                a[y as usize] += bx;
            }
        }
    }
    state.a
}

/// Per-vertex labels and whether the last pass lowered any of them.
#[derive(Debug, Clone)]
pub struct LabelState {
    pub labels: Vec<VertexId>,
    pub changed: bool,
}

impl LabelState {
    pub fn new(num_vertices: usize) -> Self {
        Self {
            labels: (0..num_vertices as VertexId).collect(),
            changed: false,
        }
    }

    /// One full in-place scan of `g`'s edges.
    pub fn scan(&mut self, g: &Graph) {
        let offsets = g.offsets();
        let targets = g.targets();
        let labels = &mut self.labels;
        self.changed = false;
        for x in 0..labels.len() {
            for &y in &targets[offsets[x]..offsets[x + 1]] {
                let candidate = labels[x];
                let current = &mut labels[y as usize];
                if candidate < *current {
                    *current = candidate;
                    self.changed = true;
                }
            }
        }
    }
}

/// Labels after the fixpoint, together with the number of scans it took
/// (including the final scan that changed nothing).
pub fn labelprop_serial_counted(g_sym: &Graph) -> (Vec<VertexId>, usize) {
    let mut state = LabelState::new(g_sym.num_vertices());
    let mut passes = 0;
    loop {
        state.scan(g_sym);
        passes += 1;
        if !state.changed {
            return (state.labels, passes);
        }
    }
}

/// Connected-component labels of a symmetrized graph: each vertex ends with
/// the smallest id in its component.
pub fn labelprop_serial(g_sym: &Graph) -> Vec<VertexId> {
    labelprop_serial_counted(g_sym).0
}
