use std::fmt;
use std::io::{self, Write};

/// Who produced a trace event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TraceSource {
    Driver,
    Worker(usize),
}

impl fmt::Display for TraceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceSource::Driver => f.write_str("driver"),
            TraceSource::Worker(w) => write!(f, "{w}"),
        }
    }
}

/// Worker events are stamped when a handler starts. Driver events mark
/// broadcasts (by message kind) and returns from quiescence (`Quiescent`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub ts_ns: u64,
    pub source: TraceSource,
    pub kind: &'static str,
}

/// Events from one engine lifetime, ordered by timestamp.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new(mut events: Vec<TraceEvent>) -> Self {
        events.sort_by_key(|e| (e.ts_ns, e.source));
        Self { events }
    }

    /// Writes `ts_ns,worker,kind` CSV; the driver's worker column is `driver`.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "ts_ns,worker,kind")?;
        for e in &self.events {
            writeln!(out, "{},{},{}", e.ts_ns, e.source, e.kind)?;
        }
        out.flush()
    }

    /// Checks that every worker event of a kind in `kinds` lies inside a
    /// window opened by a driver broadcast of `opener` and closed by the
    /// next `Quiescent` marker. Returns the first offending event.
    pub fn check_windows(&self, opener: &str, kinds: &[&str]) -> Result<(), TraceEvent> {
        let mut open = false;
        for e in &self.events {
            match e.source {
                TraceSource::Driver if e.kind == "Quiescent" => open = false,
                TraceSource::Driver if e.kind == opener => open = true,
                TraceSource::Driver => {}
                TraceSource::Worker(_) if kinds.contains(&e.kind) && !open => return Err(*e),
                TraceSource::Worker(_) => {}
            }
        }
        Ok(())
    }

    pub fn count(&self, kind: &str) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}
