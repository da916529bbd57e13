//! A small actor runtime: index-addressed workers, FIFO mailboxes and exact
//! quiescence detection.
//!
//! Workers are plain values implementing [`Actor`]. [`Engine::spawn`] places
//! worker `c` on execution unit `c % num_units`; each unit is one OS thread
//! that drains a single multi-producer queue of `(worker, message)` envelopes
//! and runs one handler at a time. Because every unit queue is FIFO, messages
//! from one sender to one receiver are handled in send order. Nothing is
//! promised across different senders.
//!
//! Quiescence uses two global counters. A message is counted in `sent`
//! before it is enqueued and in `processed` only after its handler returns,
//! so any message a handler sends is counted before its parent is marked
//! processed. The driver reads `processed` first and `sent` second; equality
//! then implies no message was in flight at the first read, and since only
//! the driver can inject new work, the system stays quiet.

mod message;
mod trace;

pub use message::{Control, Message, MessageKind};
pub use trace::{Trace, TraceEvent, TraceSource};

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("engine needs at least one execution unit")]
    NoUnits,
    #[error("failed to start execution unit: {0}")]
    Startup(String),
    #[error("engine is stopped")]
    Stopped,
    #[error("worker index {index} out of range ({count} workers)")]
    BadIndex { index: usize, count: usize },
    #[error(
        "no quiescence after {waited:?}: sent {sent}, processed {processed}, {active} handlers active"
    )]
    Deadlock {
        waited: Duration,
        sent: u64,
        processed: u64,
        active: usize,
    },
    #[error("worker {worker} panicked: {message}")]
    WorkerPanicked { worker: usize, message: String },
    #[error("quiescence reported with {pending} messages still queued for worker {worker}")]
    FalseQuiescence { worker: usize, pending: usize },
}

/// A worker. Handlers run single-threaded over the worker's own state.
pub trait Actor: Send + 'static {
    type Msg: MessageKind + Send + 'static;

    fn handle(&mut self, msg: Self::Msg, ctx: &Context<'_, Self::Msg>);
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub num_units: usize,
    pub trace: bool,
    /// Upper bound for a single [`Engine::wait_quiescence`] call.
    pub quiescence_timeout: Duration,
}

impl EngineConfig {
    pub fn new(num_units: usize) -> Self {
        Self {
            num_units,
            trace: false,
            quiescence_timeout: Duration::from_secs(60),
        }
    }
}

/// Snapshot of the quiescence bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuiescenceCounter {
    pub sent: u64,
    pub processed: u64,
    pub idle_workers: usize,
    pub num_workers: usize,
}

impl QuiescenceCounter {
    pub fn is_quiescent(&self) -> bool {
        self.sent == self.processed && self.idle_workers == self.num_workers
    }
}

enum Envelope<M> {
    Deliver { to: usize, msg: M },
    Stop,
}

struct Shared<M> {
    units: Vec<Sender<Envelope<M>>>,
    num_workers: usize,
    sent: AtomicU64,
    processed: AtomicU64,
    active: AtomicUsize,
    // messages queued or running, per worker
    pending: Vec<AtomicUsize>,
    failure: Mutex<Option<(usize, String)>>,
    quiet_lock: Mutex<()>,
    quiet: Condvar,
    epoch: Instant,
    trace: bool,
}

impl<M: MessageKind> Shared<M> {
    fn unit_of(&self, worker: usize) -> usize {
        worker % self.units.len()
    }

    fn deliver(&self, to: usize, msg: M) -> Result<(), EngineError> {
        if to >= self.num_workers {
            return Err(EngineError::BadIndex {
                index: to,
                count: self.num_workers,
            });
        }
        self.pending[to].fetch_add(1, Ordering::SeqCst);
        self.sent.fetch_add(1, Ordering::SeqCst);
        if self.units[self.unit_of(to)]
            .send(Envelope::Deliver { to, msg })
            .is_err()
        {
            self.pending[to].fetch_sub(1, Ordering::SeqCst);
            self.sent.fetch_sub(1, Ordering::SeqCst);
            return Err(EngineError::Stopped);
        }
        Ok(())
    }

    fn now_ns(&self) -> u64 {
        self.epoch.elapsed().as_nanos() as u64
    }
}

/// Handle given to a running handler.
pub struct Context<'a, M> {
    me: usize,
    shared: &'a Shared<M>,
}

impl<M: MessageKind> Context<'_, M> {
    /// Index of the worker whose handler is running.
    pub fn index(&self) -> usize {
        self.me
    }

    pub fn num_workers(&self) -> usize {
        self.shared.num_workers
    }

    /// Point-to-point send. Sending to oneself is allowed.
    pub fn send(&self, to: usize, msg: M) -> Result<(), EngineError> {
        self.shared.deliver(to, msg)
    }
}

struct UnitOutput<A> {
    actors: Vec<(usize, A)>,
    events: Vec<TraceEvent>,
}

pub struct Engine<A: Actor> {
    shared: Arc<Shared<A::Msg>>,
    threads: Vec<JoinHandle<UnitOutput<A>>>,
    driver_events: Vec<TraceEvent>,
    timeout: Duration,
    stopped: bool,
}

impl<A: Actor> Engine<A> {
    /// Starts one thread per execution unit and hands worker `c` to unit
    /// `c % num_units`.
    pub fn spawn(actors: Vec<A>, config: EngineConfig) -> Result<Self, EngineError> {
        if config.num_units == 0 {
            return Err(EngineError::NoUnits);
        }
        let num_workers = actors.len();
        let mut senders = Vec::with_capacity(config.num_units);
        let mut receivers = Vec::with_capacity(config.num_units);
        for _ in 0..config.num_units {
            let (tx, rx) = channel();
            senders.push(tx);
            receivers.push(rx);
        }
        let shared = Arc::new(Shared {
            units: senders,
            num_workers,
            sent: AtomicU64::new(0),
            processed: AtomicU64::new(0),
            active: AtomicUsize::new(0),
            pending: (0..num_workers).map(|_| AtomicUsize::new(0)).collect(),
            failure: Mutex::new(None),
            quiet_lock: Mutex::new(()),
            quiet: Condvar::new(),
            epoch: Instant::now(),
            trace: config.trace,
        });

        let mut per_unit: Vec<Vec<(usize, A)>> = (0..config.num_units).map(|_| Vec::new()).collect();
        for (c, actor) in actors.into_iter().enumerate() {
            per_unit[c % config.num_units].push((c, actor));
        }

        let mut engine = Self {
            shared: Arc::clone(&shared),
            threads: Vec::with_capacity(config.num_units),
            driver_events: Vec::new(),
            timeout: config.quiescence_timeout,
            stopped: false,
        };
        for (unit, (rx, actors)) in receivers.into_iter().zip(per_unit).enumerate() {
            let shared = Arc::clone(&shared);
            let spawned = std::thread::Builder::new()
                .name(format!("unit-{unit}"))
                .spawn(move || run_unit(shared, rx, actors, config.num_units));
            match spawned {
                Ok(handle) => engine.threads.push(handle),
                Err(e) => {
                    let _ = engine.stop();
                    return Err(EngineError::Startup(e.to_string()));
                }
            }
        }
        Ok(engine)
    }

    pub fn num_workers(&self) -> usize {
        self.shared.num_workers
    }

    pub fn num_units(&self) -> usize {
        self.shared.units.len()
    }

    /// Execution unit hosting worker `c`.
    pub fn unit_of(&self, c: usize) -> usize {
        self.shared.unit_of(c)
    }

    pub fn counters(&self) -> QuiescenceCounter {
        let processed = self.shared.processed.load(Ordering::SeqCst);
        let sent = self.shared.sent.load(Ordering::SeqCst);
        let active = self.shared.active.load(Ordering::SeqCst);
        QuiescenceCounter {
            sent,
            processed,
            idle_workers: self.shared.num_workers - active.min(self.shared.num_workers),
            num_workers: self.shared.num_workers,
        }
    }

    /// Driver-side send to worker `to`.
    pub fn send(&mut self, to: usize, msg: A::Msg) -> Result<(), EngineError> {
        if self.stopped {
            return Err(EngineError::Stopped);
        }
        self.mark_driver(msg.kind());
        self.shared.deliver(to, msg)
    }

    /// Records a driver-side marker in the trace (no-op when tracing is off).
    pub fn mark_driver(&mut self, kind: &'static str) {
        if self.shared.trace {
            self.driver_events.push(TraceEvent {
                ts_ns: self.shared.now_ns(),
                source: TraceSource::Driver,
                kind,
            });
        }
    }

    /// Blocks until every sent message has been processed.
    ///
    /// Fails if a handler panicked, or if the configured timeout passes
    /// first (the error carries the outstanding counts).
    pub fn wait_quiescence(&mut self) -> Result<(), EngineError> {
        if self.stopped {
            return Err(EngineError::Stopped);
        }
        let start = Instant::now();
        let shared = &*self.shared;
        // Brief spin before parking; phases are often only microseconds long.
        for _ in 0..256 {
            if self.check_failure().is_err() || self.quiet_now() {
                break;
            }
            std::hint::spin_loop();
        }
        let mut guard = shared.quiet_lock.lock().unwrap();
        loop {
            self.check_failure()?;
            if self.quiet_now() {
                break;
            }
            let waited = start.elapsed();
            if waited >= self.timeout {
                let c = self.counters();
                return Err(EngineError::Deadlock {
                    waited,
                    sent: c.sent,
                    processed: c.processed,
                    active: c.num_workers - c.idle_workers,
                });
            }
            let slice = (self.timeout - waited).min(Duration::from_millis(5));
            guard = shared.quiet.wait_timeout(guard, slice).unwrap().0;
        }
        drop(guard);
        for (worker, p) in shared.pending.iter().enumerate() {
            let pending = p.load(Ordering::SeqCst);
            if pending != 0 {
                return Err(EngineError::FalseQuiescence { worker, pending });
            }
        }
        self.mark_driver("Quiescent");
        Ok(())
    }

    fn quiet_now(&self) -> bool {
        let processed = self.shared.processed.load(Ordering::SeqCst);
        let sent = self.shared.sent.load(Ordering::SeqCst);
        processed == sent
    }

    fn check_failure(&self) -> Result<(), EngineError> {
        match &*self.shared.failure.lock().unwrap() {
            Some((worker, message)) => Err(EngineError::WorkerPanicked {
                worker: *worker,
                message: message.clone(),
            }),
            None => Ok(()),
        }
    }

    /// Stops all units. Further sends and waits fail with
    /// [`EngineError::Stopped`].
    pub fn stop(&mut self) -> Result<(), EngineError> {
        if !self.stopped {
            self.stopped = true;
            for tx in &self.shared.units {
                let _ = tx.send(Envelope::Stop);
            }
        }
        self.check_failure()
    }

    /// Stops the engine and returns the workers in index order, plus the
    /// trace if tracing was enabled.
    pub fn shutdown(mut self) -> Result<(Vec<A>, Option<Trace>), EngineError> {
        let status = self.stop();
        let mut actors = Vec::with_capacity(self.shared.num_workers);
        let mut events = std::mem::take(&mut self.driver_events);
        for handle in std::mem::take(&mut self.threads) {
            let out = handle
                .join()
                .map_err(|_| EngineError::Startup("execution unit thread died".into()))?;
            actors.extend(out.actors);
            events.extend(out.events);
        }
        status?;
        actors.sort_by_key(|(c, _)| *c);
        let trace = self.shared.trace.then(|| Trace::new(events));
        Ok((actors.into_iter().map(|(_, a)| a).collect(), trace))
    }
}

impl<A: Actor> Engine<A>
where
    A::Msg: Clone,
{
    /// Enqueues one copy of `msg` for every worker.
    pub fn broadcast(&mut self, msg: A::Msg) -> Result<(), EngineError> {
        if self.stopped {
            return Err(EngineError::Stopped);
        }
        self.mark_driver(msg.kind());
        for to in 0..self.shared.num_workers {
            self.shared.deliver(to, msg.clone())?;
        }
        Ok(())
    }
}

impl<A: Actor> Drop for Engine<A> {
    fn drop(&mut self) {
        let _ = self.stop();
        for handle in self.threads.drain(..) {
            let _ = handle.join();
        }
    }
}

fn run_unit<A: Actor>(
    shared: Arc<Shared<A::Msg>>,
    rx: Receiver<Envelope<A::Msg>>,
    mut actors: Vec<(usize, A)>,
    num_units: usize,
) -> UnitOutput<A> {
    let mut events = Vec::new();
    while let Ok(envelope) = rx.recv() {
        let (to, msg) = match envelope {
            Envelope::Deliver { to, msg } => (to, msg),
            Envelope::Stop => break,
        };
        shared.active.fetch_add(1, Ordering::SeqCst);
        if shared.trace {
            events.push(TraceEvent {
                ts_ns: shared.now_ns(),
                source: TraceSource::Worker(to),
                kind: msg.kind(),
            });
        }
        // workers on this unit are c = unit, unit + num_units, ...
        let (_, actor) = &mut actors[to / num_units];
        let ctx = Context {
            me: to,
            shared: &shared,
        };
        let outcome = catch_unwind(AssertUnwindSafe(|| actor.handle(msg, &ctx)));
        let failed = outcome.is_err();
        if let Err(panic) = outcome {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            shared.failure.lock().unwrap().get_or_insert((to, message));
        }
        shared.pending[to].fetch_sub(1, Ordering::SeqCst);
        shared.active.fetch_sub(1, Ordering::SeqCst);
        let processed = shared.processed.fetch_add(1, Ordering::SeqCst) + 1;
        if failed || processed == shared.sent.load(Ordering::SeqCst) {
            let _guard = shared.quiet_lock.lock().unwrap();
            shared.quiet.notify_all();
        }
    }
    UnitOutput { actors, events }
}
