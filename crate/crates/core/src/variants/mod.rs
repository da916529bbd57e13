//! Parallel PageRank and label propagation over chunk workers.
//!
//! Every run partitions the vertices into contiguous chunks, hands each chunk
//! to a worker on the [`engine`](crate::engine), and drives iterations from
//! outside the pool. A PageRank iteration is an `Update` broadcast, a
//! quiescence point, an `Iterate` broadcast and another quiescence point
//! (plus a `Fold` phase for [`VariantId::Atomic`]). A label-propagation
//! iteration is an `Iterate` phase followed by an `Advance` phase that swaps
//! the changed flags and reports whether anything moved.
//!
//! The strategies differ only in how updates cross chunk boundaries:
//!
//! | variant     | exchange                                                   |
//! |-------------|------------------------------------------------------------|
//! | `basic`     | one batch of `(dest, value)` records per destination chunk |
//! | `atomic`    | atomic updates on a global per-vertex buffer               |
//! | `pairs`     | shared buffer per ordered chunk pair, plus a ready notice  |
//! | `reduction` | full-length buffers reduced over a fixed binary tree       |
//! | `sortdest`  | destination-major edges, combined and sent chunk by chunk  |
//!
//! Message variants apply incoming batches in sender order unless
//! `apply_on_arrival` is set, which makes PageRank results bit-reproducible
//! for a fixed chunk count.

mod exchange;
mod labelprop;
mod pagerank;

pub use exchange::{AtomicF32, OrderedInbox, PairBuffers, TreeReducer, TreeStep};
pub use labelprop::LabelPropRun;
pub use pagerank::PageRankRun;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::engine::{EngineError, Trace, TraceEvent};
use crate::graph::{Graph, VertexId};
use crate::partition::{build_chunks, to_dest_major, ChunkEdges, DestMajorEdges, Partition};

/// The five exchange strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VariantId {
    Basic,
    Atomic,
    Pairs,
    Reduction,
    SortDest,
}

impl VariantId {
    pub const ALL: [VariantId; 5] = [
        VariantId::Basic,
        VariantId::Atomic,
        VariantId::Pairs,
        VariantId::Reduction,
        VariantId::SortDest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariantId::Basic => "basic",
            VariantId::Atomic => "atomic",
            VariantId::Pairs => "pairs",
            VariantId::Reduction => "reduction",
            VariantId::SortDest => "sortdest",
        }
    }

    /// Whether results are bit-identical across runs at a fixed chunk count.
    pub fn is_deterministic(self) -> bool {
        self != VariantId::Atomic
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown variant {given:?}; expected one of: {}", Implementation::NAMES.join(", "))]
pub struct UnknownVariant {
    pub given: String,
}

impl FromStr for VariantId {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse::<Implementation>()? {
            Implementation::Parallel(v) => Ok(v),
            Implementation::Serial => Err(UnknownVariant { given: s.into() }),
        }
    }
}

/// A runnable implementation: the serial baseline or one parallel variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Implementation {
    Serial,
    Parallel(VariantId),
}

impl Implementation {
    pub const NAMES: [&'static str; 6] = ["serial", "basic", "atomic", "pairs", "reduction", "sortdest"];

    pub fn name(self) -> &'static str {
        match self {
            Implementation::Serial => "serial",
            Implementation::Parallel(v) => v.name(),
        }
    }
}

impl fmt::Display for Implementation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Implementation {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "serial" {
            return Ok(Implementation::Serial);
        }
        VariantId::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .map(Implementation::Parallel)
            .ok_or_else(|| UnknownVariant { given: s.into() })
    }
}

/// Deliberate misbehaviour, for exercising the verification path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// In every iteration, chunk 0 discards the first non-empty record batch
    /// it receives. Variants without record batches (`atomic`, `reduction`)
    /// are unaffected.
    DropFirstBatch,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Execution units (threads).
    pub workers: usize,
    /// Chunk count; defaults to `workers`.
    pub chunks: Option<usize>,
    pub apply_on_arrival: bool,
    pub trace: bool,
    /// Bound on every quiescence wait.
    pub timeout: Duration,
    /// Label propagation only: send only from vertices that changed in the
    /// previous iteration. Ignored by `reduction`, which always sends
    /// full buffers.
    pub changed_only: bool,
    pub fault: Option<Fault>,
}

impl RunOptions {
    pub fn new(workers: usize) -> Self {
        Self {
            workers,
            chunks: None,
            apply_on_arrival: false,
            trace: false,
            timeout: Duration::from_secs(60),
            changed_only: true,
            fault: None,
        }
    }

    pub fn num_chunks(&self) -> usize {
        self.chunks.unwrap_or(self.workers)
    }

    fn validate(&self) -> Result<(), RunError> {
        if self.workers == 0 {
            return Err(RunError::Config("workers must be at least 1".into()));
        }
        if self.num_chunks() == 0 {
            return Err(RunError::Config("chunks must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for RunOptions {
    fn default() -> Self {
        Self::new(1)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Traffic counters for one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    /// `(dest, value)` / `(dest, label)` records handed to another worker,
    /// by message or through pair buffers. Atomic updates and reduction
    /// buffers are not records.
    pub records: u64,
    /// Messages delivered by the engine, driver broadcasts included.
    pub messages: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub values: Vec<T>,
    pub iterations: usize,
    pub stats: RunStats,
    pub trace: Option<Trace>,
}

/// Total update records transmitted during `run`.
pub fn count_update_records<T>(run: &RunOutput<T>) -> u64 {
    run.stats.records
}

/// Parallel PageRank; same semantics as [`crate::serial::pagerank_serial`].
pub fn run_pagerank(
    g: &Graph,
    variant: VariantId,
    workers: usize,
    alpha: f32,
    iterations: usize,
) -> Result<Vec<f32>, RunError> {
    let run = PageRankRun::prepare(g, variant, alpha, iterations, &RunOptions::new(workers))?;
    Ok(run.execute()?.values)
}

/// Parallel label propagation on a symmetrized graph; the result equals
/// [`crate::serial::labelprop_serial`].
pub fn run_labelprop(g_sym: &Graph, variant: VariantId, workers: usize) -> Result<Vec<VertexId>, RunError> {
    let run = LabelPropRun::prepare(g_sym, variant, &RunOptions::new(workers))?;
    Ok(run.execute()?.values)
}

/// Edge storage for one chunk, in the order its variant walks it.
pub(crate) enum Layout {
    SourceMajor(ChunkEdges),
    DestMajor(DestMajorEdges),
}

pub(crate) struct ChunkSetup {
    pub chunk: usize,
    pub base: usize,
    pub degrees: Vec<usize>,
    pub layout: Layout,
}

/// Cuts `g` into chunks laid out for `variant`.
pub(crate) fn chunk_setups(g: &Graph, p: &Partition, variant: VariantId) -> Vec<ChunkSetup> {
    build_chunks(g, p.num_chunks())
        .into_iter()
        .map(|edges| ChunkSetup {
            chunk: edges.chunk,
            base: edges.base,
            degrees: edges.degrees().collect(),
            layout: match variant {
                VariantId::SortDest => Layout::DestMajor(to_dest_major(&edges, p)),
                _ => Layout::SourceMajor(edges),
            },
        })
        .collect()
}

/// Checks a traced run: every handler event must fall between the driver
/// broadcast that opens its phase and the quiescence point that closes it.
pub fn check_phase_safety(trace: &Trace) -> Result<(), TraceEvent> {
    trace.check_windows("Update", &["Update"])?;
    trace.check_windows(
        "Iterate",
        &["Iterate", "RankBatch", "LabelBatch", "BufferReady", "Partial", "Reduced"],
    )?;
    trace.check_windows("Fold", &["Fold"])?;
    trace.check_windows("Advance", &["Advance"])?;
    Ok(())
}
