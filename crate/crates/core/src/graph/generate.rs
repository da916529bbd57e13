use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EdgeList, VertexId, MAX_VERTEX_ID};

/// `m` edges with both endpoints drawn uniformly from `[0, n)`.
///
/// The stream comes from ChaCha8 seeded with `seed` through
/// `SeedableRng::seed_from_u64`; each edge draws the source and then the
/// destination with `random_range`. ChaCha output is platform independent,
/// so a given `(n, m, seed)` yields the same sequence everywhere for a fixed
/// `rand` release.
///
/// # Panics
/// If `n` is zero or exceeds the vertex id space.
pub fn generate_uniform(n: usize, m: usize, seed: u64) -> EdgeList {
    assert!(n >= 1, "need at least one vertex");
    assert!(n <= MAX_VERTEX_ID as usize + 1, "too many vertices: {n}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = n as VertexId;
    let edges = (0..m)
        .map(|_| (rng.random_range(0..bound), rng.random_range(0..bound)))
        .collect();
    EdgeList::with_vertices(edges, n)
}
