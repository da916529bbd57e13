use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::exchange::{AtomicF32, OrderedInbox, PairBuffers, TreeReducer, TreeStep};
use super::{chunk_setups, Fault, Layout, RunError, RunOptions, RunOutput, RunStats, VariantId};
use crate::engine::{Actor, Context, Control, Engine, EngineConfig, Message};
use crate::graph::{Graph, VertexId};
use crate::partition::Partition;
use crate::serial::update_ranks;

struct RankShared {
    variant: VariantId,
    partition: Partition,
    apply_on_arrival: bool,
    records: AtomicU64,
    // Atomic only
    global: Vec<AtomicF32>,
    // Pairs only
    pairs: Option<PairBuffers<(VertexId, f32)>>,
}

struct RankWorker {
    chunk: usize,
    base: usize,
    a: Vec<f32>,
    b: Vec<f32>,
    d: Vec<f32>,
    layout: Layout,
    // records per destination chunk, a capacity hint for `basic`
    out_sizes: Vec<usize>,
    batches: OrderedInbox<Vec<(VertexId, f32)>>,
    notices: OrderedInbox<usize>,
    tree: TreeReducer<f32>,
    fault: Option<Fault>,
    fault_armed: bool,
    shared: Arc<RankShared>,
}

impl Actor for RankWorker {
    type Msg = Message;

    fn handle(&mut self, msg: Message, ctx: &Context<'_, Message>) {
        match msg {
            Message::Update { alpha } => {
                update_ranks(&mut self.a, &mut self.b, &self.d, alpha);
                self.fault_armed = self.fault.is_some();
            }
            Message::Iterate => self.iterate(ctx),
            Message::RankBatch { from, records } => {
                if self.shared.apply_on_arrival {
                    self.apply(&records);
                } else {
                    self.batches.push(from, records);
                    while let Some(records) = self.batches.pop_ready() {
                        self.apply(&records);
                    }
                }
            }
            Message::BufferReady { from } => {
                if self.shared.apply_on_arrival {
                    self.apply_pair(from);
                } else {
                    self.notices.push(from, from);
                    while let Some(from) = self.notices.pop_ready() {
                        self.apply_pair(from);
                    }
                }
            }
            Message::Control(Control::Fold) => {
                let global = &self.shared.global[self.base..self.base + self.a.len()];
                for (a, cell) in self.a.iter_mut().zip(global) {
                    *a += cell.swap(0.0, Ordering::Relaxed);
                }
            }
            Message::Control(Control::RankPartial { level, values }) => {
                self.tree.receive(level, values);
                self.advance_tree(ctx);
            }
            Message::Control(Control::RankReduced(total)) => {
                let slice = &total[self.base..self.base + self.a.len()];
                for (a, v) in self.a.iter_mut().zip(slice) {
                    *a += v;
                }
            }
            other => panic!("pagerank worker cannot handle {other:?}"),
        }
    }
}

impl RankWorker {
    fn iterate(&mut self, ctx: &Context<'_, Message>) {
        let shared = Arc::clone(&self.shared);
        let part = &shared.partition;
        let k = part.num_chunks();
        let me = self.chunk;
        let b = &self.b;
        let mut records = 0u64;
        match (&self.layout, shared.variant) {
            (Layout::SourceMajor(edges), VariantId::Basic) => {
                let mut out: Vec<Vec<(VertexId, f32)>> =
                    self.out_sizes.iter().map(|&n| Vec::with_capacity(n)).collect();
                for (l, &value) in b.iter().enumerate() {
                    for &t in edges.targets_of(l) {
                        out[part.chunk_of(t)].push((t, value));
                    }
                }
                records = edges.num_edges() as u64;
                for (q, batch) in out.into_iter().enumerate() {
                    send(ctx, q, Message::RankBatch { from: me, records: batch });
                }
            }
            (Layout::SourceMajor(edges), VariantId::Atomic) => {
                let global = &shared.global;
                for (l, &value) in b.iter().enumerate() {
                    for &t in edges.targets_of(l) {
                        global[t as usize].fetch_add(value, Ordering::Relaxed);
                    }
                }
            }
            (Layout::SourceMajor(edges), VariantId::Pairs) => {
                let pairs = shared.pairs.as_ref().expect("pair buffers");
                {
                    let mut row = pairs.row(me);
                    for (l, &value) in b.iter().enumerate() {
                        for &t in edges.targets_of(l) {
                            row[part.chunk_of(t)].push((t, value));
                        }
                    }
                }
                records = edges.num_edges() as u64;
                for q in 0..k {
                    send(ctx, q, Message::BufferReady { from: me });
                }
            }
            (Layout::SourceMajor(edges), VariantId::Reduction) => {
                let mut contribution = vec![0.0f32; part.num_vertices()];
                for (l, &value) in b.iter().enumerate() {
                    for &t in edges.targets_of(l) {
                        contribution[t as usize] += value;
                    }
                }
                self.tree.contribute(contribution);
                self.advance_tree(ctx);
            }
            (Layout::DestMajor(dm), VariantId::SortDest) => {
                let mut blocks = dm.blocks.iter().peekable();
                for q in 0..k {
                    let batch: Vec<(VertexId, f32)> = match blocks.next_if(|blk| blk.dest_chunk == q) {
                        Some(block) => block
                            .groups()
                            .map(|(dest, sources)| {
                                let sum = sources.iter().fold(0.0f32, |acc, &s| acc + b[s as usize]);
                                (dest, sum)
                            })
                            .collect(),
                        None => Vec::new(),
                    };
                    records += batch.len() as u64;
                    send(ctx, q, Message::RankBatch { from: me, records: batch });
                }
            }
            _ => unreachable!("layout does not match variant"),
        }
        if records > 0 {
            shared.records.fetch_add(records, Ordering::Relaxed);
        }
    }

    fn apply(&mut self, records: &[(VertexId, f32)]) {
        if self.fault_armed && !records.is_empty() {
            self.fault_armed = false;
            return;
        }
        for &(dest, value) in records {
            self.a[dest as usize - self.base] += value;
        }
    }

    fn apply_pair(&mut self, from: usize) {
        let shared = Arc::clone(&self.shared);
        let pairs = shared.pairs.as_ref().expect("pair buffers");
        let slot = pairs.slot(from, self.chunk);
        self.apply(&slot);
    }

    fn advance_tree(&mut self, ctx: &Context<'_, Message>) {
        let k = self.shared.partition.num_chunks();
        let step = self.tree.advance(self.chunk, k, |left, right| {
            for (l, r) in left.iter_mut().zip(right) {
                *l += r;
            }
        });
        match step {
            TreeStep::Wait => {}
            TreeStep::SendUp { to, level, values } => {
                send(ctx, to, Message::Control(Control::RankPartial { level, values }))
            }
            TreeStep::Root(values) => {
                let total = Arc::new(values);
                for q in 0..k {
                    send(ctx, q, Message::Control(Control::RankReduced(Arc::clone(&total))));
                }
            }
        }
    }
}

fn send(ctx: &Context<'_, Message>, to: usize, msg: Message) {
    ctx.send(to, msg).expect("engine stopped during a run");
}

/// A PageRank run with workers spawned and edges laid out, ready to execute.
///
/// Everything expensive that is not the computation itself (chunking,
/// destination-major regrouping, thread start-up) happens in
/// [`PageRankRun::prepare`], so timing [`PageRankRun::execute`] measures the
/// iterations alone.
pub struct PageRankRun {
    engine: Engine<RankWorker>,
    shared: Arc<RankShared>,
    alpha: f32,
    iterations: usize,
}

impl PageRankRun {
    pub fn prepare(
        g: &Graph,
        variant: VariantId,
        alpha: f32,
        iterations: usize,
        options: &RunOptions,
    ) -> Result<Self, RunError> {
        options.validate()?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(RunError::Config(format!("alpha {alpha} outside [0, 1]")));
        }
        let n = g.num_vertices();
        let partition = Partition::new(n, options.num_chunks());
        let k = partition.num_chunks();
        let shared = Arc::new(RankShared {
            variant,
            partition,
            apply_on_arrival: options.apply_on_arrival,
            records: AtomicU64::new(0),
            global: if variant == VariantId::Atomic {
                (0..n).map(|_| AtomicF32::new(0.0)).collect()
            } else {
                Vec::new()
            },
            pairs: (variant == VariantId::Pairs).then(|| PairBuffers::new(k)),
        });

        let workers = chunk_setups(g, &partition, variant)
            .into_iter()
            .map(|setup| {
                let mut out_sizes = vec![0usize; k];
                if let Layout::SourceMajor(edges) = &setup.layout {
                    for (_, t) in edges.edges() {
                        out_sizes[partition.chunk_of(t)] += 1;
                    }
                }
                let len = setup.degrees.len();
                RankWorker {
                    chunk: setup.chunk,
                    base: setup.base,
                    a: vec![0.0; len],
                    b: vec![0.0; len],
                    d: setup.degrees.iter().map(|&d| d as f32).collect(),
                    layout: setup.layout,
                    out_sizes,
                    batches: OrderedInbox::new(k),
                    notices: OrderedInbox::new(k),
                    tree: TreeReducer::default(),
                    fault: options.fault.filter(|_| setup.chunk == 0),
                    fault_armed: false,
                    shared: Arc::clone(&shared),
                }
            })
            .collect();

        let mut config = EngineConfig::new(options.workers);
        config.trace = options.trace;
        config.quiescence_timeout = options.timeout;
        let engine = Engine::spawn(workers, config)?;
        Ok(Self {
            engine,
            shared,
            alpha,
            iterations,
        })
    }

    pub fn num_chunks(&self) -> usize {
        self.shared.partition.num_chunks()
    }

    /// Runs all iterations and returns the concatenated ranks.
    pub fn execute(self) -> Result<RunOutput<f32>, RunError> {
        let Self {
            mut engine,
            shared,
            alpha,
            iterations,
        } = self;
        for _ in 0..iterations {
            engine.broadcast(Message::Update { alpha })?;
            engine.wait_quiescence()?;
            engine.broadcast(Message::Iterate)?;
            engine.wait_quiescence()?;
            if shared.variant == VariantId::Atomic {
                engine.broadcast(Message::Control(Control::Fold))?;
                engine.wait_quiescence()?;
            }
        }
        let messages = engine.counters().sent;
        let (workers, trace) = engine.shutdown()?;
        let values = workers.into_iter().flat_map(|w| w.a).collect();
        Ok(RunOutput {
            values,
            iterations,
            stats: RunStats {
                records: shared.records.load(Ordering::SeqCst),
                messages,
            },
            trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_uniform, EdgeList};
    use crate::serial::pagerank_serial;
    use crate::variants::{check_phase_safety, count_update_records, run_pagerank};

    fn graph(edges: &[(u32, u32)], n: usize) -> Graph {
        Graph::from_edge_list(&EdgeList::with_vertices(edges.to_vec(), n))
    }

    fn run(g: &Graph, variant: VariantId, options: &RunOptions) -> RunOutput<f32> {
        PageRankRun::prepare(g, variant, 0.85, 20, options)
            .unwrap()
            .execute()
            .unwrap()
    }

    fn max_rel_err(got: &[f32], want: &[f32]) -> f64 {
        got.iter()
            .zip(want)
            .map(|(&g, &w)| ((g as f64 - w as f64) / w as f64).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn two_cycle_all_variants() {
        let g = graph(&[(0, 1), (1, 0)], 2);
        let expected = 1.0 - 0.85f64.powi(20);
        for v in VariantId::ALL {
            let a = run_pagerank(&g, v, 2, 0.85, 20).unwrap();
            for x in a {
                assert!((x as f64 - expected).abs() < 1e-5, "{v}: {x}");
            }
        }
    }

    #[test]
    fn single_vertex_all_variants() {
        let g = graph(&[], 1);
        for v in VariantId::ALL {
            assert_eq!(run_pagerank(&g, v, 1, 0.85, 20).unwrap(), vec![1.0 - 0.85f32], "{v}");
        }
    }

    #[test]
    fn basic_single_worker_is_bit_identical_to_serial() {
        let g = Graph::from_edge_list(&generate_uniform(400, 2000, 9));
        let serial = pagerank_serial(&g, 0.85, 20);
        assert_eq!(run_pagerank(&g, VariantId::Basic, 1, 0.85, 20).unwrap(), serial);
    }

    #[test]
    fn variants_match_serial_with_more_chunks_than_workers() {
        let g = Graph::from_edge_list(&generate_uniform(300, 1500, 4));
        let serial = pagerank_serial(&g, 0.85, 20);
        for v in VariantId::ALL {
            for (workers, chunks) in [(1, 5), (3, 7), (2, 2), (4, 400)] {
                let mut o = RunOptions::new(workers);
                o.chunks = Some(chunks);
                let out = run(&g, v, &o);
                assert!(max_rel_err(&out.values, &serial) <= 1e-4, "{v} {workers}/{chunks}");
            }
        }
    }

    #[test]
    fn apply_on_arrival_still_matches() {
        let g = Graph::from_edge_list(&generate_uniform(300, 1500, 6));
        let serial = pagerank_serial(&g, 0.85, 20);
        for v in VariantId::ALL {
            let mut o = RunOptions::new(4);
            o.apply_on_arrival = true;
            assert!(max_rel_err(&run(&g, v, &o).values, &serial) <= 1e-4, "{v}");
        }
    }

    #[test]
    fn zero_iterations_is_all_zero() {
        let g = graph(&[(0, 1), (1, 2)], 3);
        for v in VariantId::ALL {
            assert_eq!(run_pagerank(&g, v, 2, 0.85, 0).unwrap(), vec![0.0; 3]);
        }
    }

    #[test]
    fn empty_graph_and_surplus_chunks() {
        let g = graph(&[], 0);
        for v in VariantId::ALL {
            assert!(run_pagerank(&g, v, 3, 0.85, 5).unwrap().is_empty());
        }
        let tiny = graph(&[(0, 1)], 2);
        for v in VariantId::ALL {
            let a = run_pagerank(&tiny, v, 8, 0.85, 20).unwrap();
            assert_eq!(a, pagerank_serial(&tiny, 0.85, 20), "{v}");
        }
    }

    #[test]
    fn rejects_bad_config() {
        let g = graph(&[(0, 1)], 2);
        assert!(PageRankRun::prepare(&g, VariantId::Basic, 1.5, 20, &RunOptions::new(1)).is_err());
        assert!(PageRankRun::prepare(&g, VariantId::Basic, 0.85, 20, &RunOptions::new(0)).is_err());
    }

    #[test]
    fn record_counts_basic_vs_sortdest() {
        // sources 0 and 1 share chunk 0 and both point at 5
        let g = graph(&[(0, 5), (1, 5)], 8);
        let mut o = RunOptions::new(2);
        let count = |v, o: &RunOptions| {
            let out = PageRankRun::prepare(&g, v, 0.85, 1, o).unwrap().execute().unwrap();
            count_update_records(&out)
        };
        assert_eq!(count(VariantId::Basic, &o), 2);
        assert_eq!(count(VariantId::SortDest, &o), 1);
        assert_eq!(count(VariantId::Atomic, &o), 0);
        assert_eq!(count(VariantId::Reduction, &o), 0);
        assert_eq!(count(VariantId::Pairs, &o), 2);
        o.chunks = Some(8);
        assert_eq!(count(VariantId::SortDest, &o), 2);
    }

    #[test]
    fn traced_runs_keep_phases_apart() {
        let g = Graph::from_edge_list(&generate_uniform(200, 1000, 2));
        for v in VariantId::ALL {
            let mut o = RunOptions::new(3);
            o.trace = true;
            let out = run(&g, v, &o);
            let trace = out.trace.expect("trace");
            assert_eq!(trace.count("Update"), 20 + 20 * 3);
            check_phase_safety(&trace).unwrap_or_else(|e| panic!("{v}: {e:?}"));
        }
    }

    #[test]
    fn fault_injection_corrupts_result() {
        let g = Graph::from_edge_list(&generate_uniform(100, 600, 3));
        let serial = pagerank_serial(&g, 0.85, 20);
        let mut o = RunOptions::new(2);
        o.fault = Some(Fault::DropFirstBatch);
        let out = run(&g, VariantId::Basic, &o);
        assert!(max_rel_err(&out.values, &serial) > 1e-3);
    }
}
