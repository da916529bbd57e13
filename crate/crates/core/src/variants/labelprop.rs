use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};
use std::sync::Arc;

use super::exchange::{OrderedInbox, PairBuffers, TreeReducer, TreeStep};
use super::{chunk_setups, Fault, Layout, RunError, RunOptions, RunOutput, RunStats, VariantId};
use crate::engine::{Actor, Context, Control, Engine, EngineConfig, Message};
use crate::graph::{Graph, VertexId};
use crate::partition::Partition;

struct LabelShared {
    variant: VariantId,
    partition: Partition,
    apply_on_arrival: bool,
    changed_only: bool,
    // `N`, larger than every label
    sentinel: VertexId,
    records: AtomicU64,
    any_changed: AtomicBool,
    // Atomic only
    global: Vec<AtomicU32>,
    // Pairs only
    pairs: Option<PairBuffers<(VertexId, VertexId)>>,
}

struct LabelWorker {
    chunk: usize,
    base: usize,
    labels: Vec<VertexId>,
    // changed during the previous iteration; these vertices send
    prev_changed: Vec<bool>,
    // changed during the current iteration
    cur_changed: Vec<bool>,
    first: bool,
    layout: Layout,
    batches: OrderedInbox<Vec<(VertexId, VertexId)>>,
    notices: OrderedInbox<usize>,
    tree: TreeReducer<VertexId>,
    fault: Option<Fault>,
    fault_armed: bool,
    shared: Arc<LabelShared>,
}

impl Actor for LabelWorker {
    type Msg = Message;

    fn handle(&mut self, msg: Message, ctx: &Context<'_, Message>) {
        match msg {
            Message::Iterate => self.iterate(ctx),
            Message::LabelBatch { from, records } => {
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
            Message::Control(Control::Advance) => self.advance(),
            Message::Control(Control::LabelPartial { level, values }) => {
                self.tree.receive(level, values);
                self.advance_tree(ctx);
            }
            Message::Control(Control::LabelReduced(total)) => {
                let slice = &total[self.base..self.base + self.labels.len()];
                for (i, &candidate) in slice.iter().enumerate() {
                    self.lower(i, candidate);
                }
            }
            other => panic!("label worker cannot handle {other:?}"),
        }
    }
}

impl LabelWorker {
    fn sends(&self, local: usize) -> bool {
        self.first || !self.shared.changed_only || self.prev_changed[local]
    }

    fn iterate(&mut self, ctx: &Context<'_, Message>) {
        let shared = Arc::clone(&self.shared);
        let part = &shared.partition;
        let k = part.num_chunks();
        let me = self.chunk;
        let labels = &self.labels;
        let mut records = 0u64;
        match (&self.layout, shared.variant) {
            (Layout::SourceMajor(edges), VariantId::Basic) => {
                let mut out: Vec<Vec<(VertexId, VertexId)>> = vec![Vec::new(); k];
                for (l, &label) in labels.iter().enumerate() {
                    if self.sends(l) {
                        for &t in edges.targets_of(l) {
                            out[part.chunk_of(t)].push((t, label));
                        }
                    }
                }
                for (q, batch) in out.into_iter().enumerate() {
                    records += batch.len() as u64;
                    send(ctx, q, Message::LabelBatch { from: me, records: batch });
                }
            }
            (Layout::SourceMajor(edges), VariantId::Atomic) => {
                for (l, &label) in labels.iter().enumerate() {
                    if self.sends(l) {
                        for &t in edges.targets_of(l) {
                            shared.global[t as usize].fetch_min(label, Ordering::Relaxed);
                        }
                    }
                }
            }
            (Layout::SourceMajor(edges), VariantId::Pairs) => {
                let pairs = shared.pairs.as_ref().expect("pair buffers");
                {
                    let mut row = pairs.row(me);
                    for (l, &label) in labels.iter().enumerate() {
                        if self.sends(l) {
                            for &t in edges.targets_of(l) {
                                row[part.chunk_of(t)].push((t, label));
                            }
                        }
                    }
                    records = row.iter().map(|slot| slot.len() as u64).sum();
                }
                for q in 0..k {
                    send(ctx, q, Message::BufferReady { from: me });
                }
            }
            (Layout::SourceMajor(edges), VariantId::Reduction) => {
                let mut contribution = vec![shared.sentinel; part.num_vertices()];
                for (l, &label) in labels.iter().enumerate() {
                    for &t in edges.targets_of(l) {
                        let slot = &mut contribution[t as usize];
                        *slot = (*slot).min(label);
                    }
                }
                self.tree.contribute(contribution);
                self.advance_tree(ctx);
            }
            (Layout::DestMajor(dm), VariantId::SortDest) => {
                let mut blocks = dm.blocks.iter().peekable();
                for q in 0..k {
                    let mut batch = Vec::new();
                    if let Some(block) = blocks.next_if(|blk| blk.dest_chunk == q) {
                        for (dest, sources) in block.groups() {
                            let best = sources
                                .iter()
                                .filter(|&&s| self.sends(s as usize))
                                .map(|&s| labels[s as usize])
                                .min();
                            if let Some(label) = best {
                                batch.push((dest, label));
                            }
                        }
                    }
                    records += batch.len() as u64;
                    send(ctx, q, Message::LabelBatch { from: me, records: batch });
                }
            }
            _ => unreachable!("layout does not match variant"),
        }
        if records > 0 {
            shared.records.fetch_add(records, Ordering::Relaxed);
        }
    }

    fn lower(&mut self, local: usize, candidate: VertexId) {
        if candidate < self.labels[local] {
            self.labels[local] = candidate;
            self.cur_changed[local] = true;
        }
    }

    fn apply(&mut self, records: &[(VertexId, VertexId)]) {
        if self.fault_armed && !records.is_empty() {
            self.fault_armed = false;
            return;
        }
        for &(dest, label) in records {
            self.lower(dest as usize - self.base, label);
        }
    }

    fn apply_pair(&mut self, from: usize) {
        let shared = Arc::clone(&self.shared);
        let pairs = shared.pairs.as_ref().expect("pair buffers");
        let slot = pairs.slot(from, self.chunk);
        self.apply(&slot);
    }

    fn advance(&mut self) {
        let shared = Arc::clone(&self.shared);
        if shared.variant == VariantId::Atomic {
            let global = &shared.global[self.base..self.base + self.labels.len()];
            for (i, cell) in global.iter().enumerate() {
                self.lower(i, cell.swap(shared.sentinel, Ordering::Relaxed));
            }
        }
        std::mem::swap(&mut self.prev_changed, &mut self.cur_changed);
        self.cur_changed.fill(false);
        self.first = false;
        self.fault_armed = self.fault.is_some();
        if self.prev_changed.iter().any(|&c| c) {
            shared.any_changed.store(true, Ordering::Relaxed);
        }
    }

    fn advance_tree(&mut self, ctx: &Context<'_, Message>) {
        let k = self.shared.partition.num_chunks();
        let step = self.tree.advance(self.chunk, k, |left, right| {
            for (l, &r) in left.iter_mut().zip(right) {
                *l = (*l).min(r);
            }
        });
        match step {
            TreeStep::Wait => {}
            TreeStep::SendUp { to, level, values } => {
                send(ctx, to, Message::Control(Control::LabelPartial { level, values }))
            }
            TreeStep::Root(values) => {
                let total = Arc::new(values);
                for q in 0..k {
                    send(ctx, q, Message::Control(Control::LabelReduced(Arc::clone(&total))));
                }
            }
        }
    }
}

fn send(ctx: &Context<'_, Message>, to: usize, msg: Message) {
    ctx.send(to, msg).expect("engine stopped during a run");
}

/// A label-propagation run with workers spawned, ready to execute.
///
/// The input must already be symmetric (see [`Graph::symmetrize`]); the run
/// iterates until no label changes.
pub struct LabelPropRun {
    engine: Engine<LabelWorker>,
    shared: Arc<LabelShared>,
}

impl LabelPropRun {
    pub fn prepare(g_sym: &Graph, variant: VariantId, options: &RunOptions) -> Result<Self, RunError> {
        options.validate()?;
        let n = g_sym.num_vertices();
        let partition = Partition::new(n, options.num_chunks());
        let k = partition.num_chunks();
        // vertex ids stay below u32::MAX, so N fits and exceeds every label
        let sentinel = n as VertexId;
        let shared = Arc::new(LabelShared {
            variant,
            partition,
            apply_on_arrival: options.apply_on_arrival,
            changed_only: options.changed_only,
            sentinel,
            records: AtomicU64::new(0),
            any_changed: AtomicBool::new(false),
            global: if variant == VariantId::Atomic {
                (0..n).map(|_| AtomicU32::new(sentinel)).collect()
            } else {
                Vec::new()
            },
            pairs: (variant == VariantId::Pairs).then(|| PairBuffers::new(k)),
        });

        let workers = chunk_setups(g_sym, &partition, variant)
            .into_iter()
            .map(|setup| {
                let len = setup.degrees.len();
                LabelWorker {
                    chunk: setup.chunk,
                    base: setup.base,
                    labels: (setup.base..setup.base + len).map(|v| v as VertexId).collect(),
                    prev_changed: vec![false; len],
                    cur_changed: vec![false; len],
                    first: true,
                    layout: setup.layout,
                    batches: OrderedInbox::new(k),
                    notices: OrderedInbox::new(k),
                    tree: TreeReducer::default(),
                    fault: options.fault.filter(|_| setup.chunk == 0),
                    fault_armed: options.fault.is_some() && setup.chunk == 0,
                    shared: Arc::clone(&shared),
                }
            })
            .collect();

        let mut config = EngineConfig::new(options.workers);
        config.trace = options.trace;
        config.quiescence_timeout = options.timeout;
        let engine = Engine::spawn(workers, config)?;
        Ok(Self { engine, shared })
    }

    pub fn num_chunks(&self) -> usize {
        self.shared.partition.num_chunks()
    }

    /// Iterates to the fixpoint and returns the concatenated labels.
    /// `iterations` counts passes, including the final one that changed
    /// nothing.
    pub fn execute(self) -> Result<RunOutput<VertexId>, RunError> {
        let Self { mut engine, shared } = self;
        let mut iterations = 0;
        loop {
            engine.broadcast(Message::Iterate)?;
            engine.wait_quiescence()?;
            engine.broadcast(Message::Control(Control::Advance))?;
            engine.wait_quiescence()?;
            iterations += 1;
            if !shared.any_changed.swap(false, Ordering::SeqCst) {
                break;
            }
        }
        let messages = engine.counters().sent;
        let (workers, trace) = engine.shutdown()?;
        let values = workers.into_iter().flat_map(|w| w.labels).collect();
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
    use crate::serial::{labelprop_serial, labelprop_serial_counted};
    use crate::variants::{check_phase_safety, run_labelprop};

    fn sym(edges: &[(u32, u32)], n: usize) -> Graph {
        Graph::from_edge_list(&EdgeList::with_vertices(edges.to_vec(), n)).symmetrize()
    }

    fn run(g: &Graph, variant: VariantId, options: &RunOptions) -> RunOutput<VertexId> {
        LabelPropRun::prepare(g, variant, options).unwrap().execute().unwrap()
    }

    #[test]
    fn two_components() {
        let g = sym(&[(0, 1), (2, 3)], 4);
        for v in VariantId::ALL {
            for w in [1, 2, 3] {
                assert_eq!(run_labelprop(&g, v, w).unwrap(), vec![0, 0, 2, 2], "{v} {w}");
            }
        }
    }

    #[test]
    fn ring_collapses_to_zero() {
        let g = sym(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)], 6);
        for v in VariantId::ALL {
            assert_eq!(run_labelprop(&g, v, 4).unwrap(), vec![0; 6], "{v}");
        }
    }

    #[test]
    fn isolated_and_empty() {
        let g = sym(&[], 3);
        let empty = sym(&[], 0);
        for v in VariantId::ALL {
            assert_eq!(run_labelprop(&g, v, 2).unwrap(), vec![0, 1, 2]);
            assert!(run_labelprop(&empty, v, 2).unwrap().is_empty());
        }
    }

    #[test]
    fn random_graph_matches_serial_everywhere() {
        let g = Graph::from_edge_list(&generate_uniform(500, 400, 5)).symmetrize();
        let serial = labelprop_serial(&g);
        for v in VariantId::ALL {
            for (workers, chunks) in [(1, 1), (2, 2), (4, 4), (2, 9), (3, 60)] {
                let mut o = RunOptions::new(workers);
                o.chunks = Some(chunks);
                assert_eq!(run(&g, v, &o).values, serial, "{v} {workers}/{chunks}");
                o.changed_only = false;
                o.apply_on_arrival = true;
                assert_eq!(run(&g, v, &o).values, serial, "{v} {workers}/{chunks} full");
            }
        }
    }

    #[test]
    fn path_needs_many_iterations() {
        // a path labelled from the far end converges one hop per iteration
        let n = 40u32;
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let g = sym(&edges, n as usize);
        let (_, passes) = labelprop_serial_counted(&g);
        for v in VariantId::ALL {
            let out = run(&g, v, &RunOptions::new(3));
            assert_eq!(out.values, vec![0; n as usize], "{v}");
            assert!(out.iterations >= passes, "{v}: {} < {passes}", out.iterations);
        }
    }

    #[test]
    fn changed_only_sends_fewer_records() {
        let g = Graph::from_edge_list(&generate_uniform(300, 600, 8)).symmetrize();
        let mut o = RunOptions::new(3);
        let sparse = run(&g, VariantId::Basic, &o);
        o.changed_only = false;
        let full = run(&g, VariantId::Basic, &o);
        assert_eq!(sparse.values, full.values);
        assert!(sparse.stats.records < full.stats.records);
    }

    #[test]
    fn traced_runs_keep_phases_apart() {
        let g = Graph::from_edge_list(&generate_uniform(200, 300, 1)).symmetrize();
        for v in VariantId::ALL {
            let mut o = RunOptions::new(3);
            o.trace = true;
            let out = run(&g, v, &o);
            check_phase_safety(&out.trace.unwrap()).unwrap_or_else(|e| panic!("{v}: {e:?}"));
        }
    }

    #[test]
    fn fault_injection_corrupts_result() {
        // chunk 0 = {0, 1}; its own batch carries 0 -> 1 and is dropped, and
        // with changed-only sending nobody resends it
        let g = sym(&[(0, 1)], 4);
        let mut o = RunOptions::new(2);
        o.fault = Some(Fault::DropFirstBatch);
        assert_eq!(run(&g, VariantId::Basic, &o).values, vec![0, 1, 2, 3]);
        assert_eq!(labelprop_serial(&g), vec![0, 0, 2, 3]);
    }
}
