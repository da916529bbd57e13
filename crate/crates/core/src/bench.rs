//! Timed runs, CSV records and the COST calculation.
//!
//! Only the computation is timed. Loading, symmetrizing, chunking and worker
//! start-up all happen before the clock starts; see [`time_run`].

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::graph::{generate_uniform, load_edge_list, EdgeFormat, Graph, GraphError};
use crate::serial::{labelprop_serial_counted, pagerank_serial, DEFAULT_ALPHA, DEFAULT_ITERATIONS};
use crate::variants::{Implementation, LabelPropRun, PageRankRun, RunOptions};

pub const CSV_HEADER: &str = "algorithm,variant,graph,workers,runtime_s,iterations_run,repetition,status";
pub const DEFAULT_REPETITIONS: usize = 3;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV row {row}: {message}")]
    Csv { row: u64, message: String },
    #[error("serial runtime must be positive and finite, got {0}")]
    BadSerial(f64),
    #[error("no parallel runtimes to compare against")]
    EmptyTable,
    #[error("no successful serial record for {algorithm} on {graph}")]
    NoSerial { algorithm: Algorithm, graph: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    PageRank,
    LabelProp,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::PageRank => "pagerank",
            Algorithm::LabelProp => "labelprop",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pagerank" => Ok(Algorithm::PageRank),
            "labelprop" => Ok(Algorithm::LabelProp),
            _ => Err(format!("unknown algorithm {s:?}; expected pagerank or labelprop")),
        }
    }
}

/// Outcome of one timed run. In CSV: `ok`, or `failed: <reason>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Status {
    Ok,
    Failed(String),
}

impl Status {
    pub fn is_ok(&self) -> bool {
        matches!(self, Status::Ok)
    }
}

impl From<Status> for String {
    fn from(s: Status) -> String {
        match s {
            Status::Ok => "ok".into(),
            Status::Failed(reason) => format!("failed: {reason}"),
        }
    }
}

impl TryFrom<String> for Status {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s == "ok" {
            Ok(Status::Ok)
        } else if let Some(reason) = s.strip_prefix("failed") {
            Ok(Status::Failed(reason.trim_start_matches(':').trim().to_string()))
        } else {
            Err(format!("status must be \"ok\" or \"failed: <reason>\", got {s:?}"))
        }
    }
}

/// One CSV row. `variant` is an implementation name, or any other tag for
/// externally measured systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub algorithm: Algorithm,
    pub variant: String,
    pub graph: String,
    pub workers: usize,
    pub runtime_s: f64,
    pub iterations_run: usize,
    pub repetition: usize,
    pub status: Status,
}

impl BenchRecord {
    pub fn is_serial(&self) -> bool {
        self.variant == "serial"
    }

    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        (self.algorithm, &self.graph, &self.variant, self.workers, self.repetition)
            .cmp(&(other.algorithm, &other.graph, &other.variant, other.workers, other.repetition))
            .then(self.runtime_s.total_cmp(&other.runtime_s))
            .then(self.iterations_run.cmp(&other.iterations_run))
            .then(self.status.cmp(&other.status))
    }
}

/// Somewhere a benchmark graph comes from. Loading is never timed.
pub trait GraphSource {
    fn name(&self) -> &str;
    fn load(&self) -> Result<Graph, GraphError>;
}

pub struct FileSource {
    pub path: PathBuf,
    pub format: EdgeFormat,
}

impl GraphSource for FileSource {
    fn name(&self) -> &str {
        self.path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("graph")
    }

    fn load(&self) -> Result<Graph, GraphError> {
        Ok(Graph::from_edge_list(&load_edge_list(&self.path, self.format)?))
    }
}

pub struct GeneratedSource {
    pub vertices: usize,
    pub edges: usize,
    pub seed: u64,
    name: String,
}

impl GeneratedSource {
    pub fn new(vertices: usize, edges: usize, seed: u64) -> Self {
        Self {
            vertices,
            edges,
            seed,
            name: format!("uniform-n{vertices}-m{edges}-s{seed}"),
        }
    }
}

impl GraphSource for GeneratedSource {
    fn name(&self) -> &str {
        &self.name
    }

    fn load(&self) -> Result<Graph, GraphError> {
        Ok(Graph::from_edge_list(&generate_uniform(self.vertices, self.edges, self.seed)))
    }
}

/// What to time; `workers` is ignored (recorded as 1) for the serial baseline.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub algorithm: Algorithm,
    pub implementation: Implementation,
    pub workers: usize,
    pub chunks: Option<usize>,
    pub alpha: f32,
    pub iterations: usize,
    pub repetitions: usize,
    pub apply_on_arrival: bool,
    pub timeout: Duration,
}

impl BenchConfig {
    pub fn new(algorithm: Algorithm, implementation: Implementation, workers: usize) -> Self {
        Self {
            algorithm,
            implementation,
            workers,
            chunks: None,
            alpha: DEFAULT_ALPHA,
            iterations: DEFAULT_ITERATIONS,
            repetitions: DEFAULT_REPETITIONS,
            apply_on_arrival: false,
            timeout: Duration::from_secs(60),
        }
    }

    fn run_options(&self) -> RunOptions {
        let mut o = RunOptions::new(self.workers);
        o.chunks = self.chunks;
        o.apply_on_arrival = self.apply_on_arrival;
        o.timeout = self.timeout;
        o
    }
}

/// Times `config.repetitions` runs on an already loaded graph. For label
/// propagation `g` must be symmetric. A run that errors or panics yields a
/// failed record instead of aborting the sweep.
pub fn time_prepared(g: &Graph, graph_name: &str, config: &BenchConfig) -> Vec<BenchRecord> {
    let workers = match config.implementation {
        Implementation::Serial => 1,
        Implementation::Parallel(_) => config.workers,
    };
    (0..config.repetitions.max(1))
        .map(|repetition| {
            let (elapsed, outcome) = timed_once(g, config);
            let (iterations_run, status) = match outcome {
                Ok(iterations) => (iterations, Status::Ok),
                Err(reason) => (0, Status::Failed(reason)),
            };
            BenchRecord {
                algorithm: config.algorithm,
                variant: config.implementation.name().to_string(),
                graph: graph_name.to_string(),
                workers,
                runtime_s: elapsed.as_secs_f64(),
                iterations_run,
                repetition,
                status,
            }
        })
        .collect()
}

/// Loads the graph (untimed), then behaves as [`time_prepared`].
pub fn time_run(source: &dyn GraphSource, config: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    let g = load_for(source, config.algorithm)?;
    Ok(time_prepared(&g, source.name(), config))
}

/// Loads a source and symmetrizes it when the algorithm needs that.
pub fn load_for(source: &dyn GraphSource, algorithm: Algorithm) -> Result<Graph, GraphError> {
    let g = source.load()?;
    Ok(match algorithm {
        Algorithm::PageRank => g,
        Algorithm::LabelProp => g.symmetrize(),
    })
}

fn timed_once(g: &Graph, config: &BenchConfig) -> (Duration, Result<usize, String>) {
    let outcome = catch_unwind(AssertUnwindSafe(|| -> Result<(Duration, usize), String> {
        let err = |e: crate::variants::RunError| e.to_string();
        match (config.algorithm, config.implementation) {
            (Algorithm::PageRank, Implementation::Serial) => {
                let start = Instant::now();
                let ranks = pagerank_serial(g, config.alpha, config.iterations);
                let elapsed = start.elapsed();
                std::hint::black_box(ranks);
                Ok((elapsed, config.iterations))
            }
            (Algorithm::LabelProp, Implementation::Serial) => {
                let start = Instant::now();
                let (labels, passes) = labelprop_serial_counted(g);
                let elapsed = start.elapsed();
                std::hint::black_box(labels);
                Ok((elapsed, passes))
            }
            (Algorithm::PageRank, Implementation::Parallel(v)) => {
                let run = PageRankRun::prepare(g, v, config.alpha, config.iterations, &config.run_options())
                    .map_err(err)?;
                let start = Instant::now();
                let out = run.execute().map_err(err)?;
                Ok((start.elapsed(), out.iterations))
            }
            (Algorithm::LabelProp, Implementation::Parallel(v)) => {
                let run = LabelPropRun::prepare(g, v, &config.run_options()).map_err(err)?;
                let start = Instant::now();
                let out = run.execute().map_err(err)?;
                Ok((start.elapsed(), out.iterations))
            }
        }
    }));
    let fallback = Instant::now();
    match outcome {
        Ok(Ok((elapsed, iterations))) => (elapsed, Ok(iterations)),
        Ok(Err(reason)) => (fallback.elapsed(), Err(reason)),
        Err(panic) => {
            let reason = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            (fallback.elapsed(), Err(format!("panic: {reason}")))
        }
    }
}

/// Serial once, then every listed implementation at every worker count.
pub fn sweep(
    source: &dyn GraphSource,
    template: &BenchConfig,
    implementations: &[Implementation],
    worker_counts: &[usize],
) -> Result<Vec<BenchRecord>, BenchError> {
    let g = load_for(source, template.algorithm)?;
    let mut records = Vec::new();
    for &implementation in implementations {
        let counts: &[usize] = match implementation {
            Implementation::Serial => &[1],
            Implementation::Parallel(_) => worker_counts,
        };
        for &workers in counts {
            let config = BenchConfig {
                implementation,
                workers,
                ..template.clone()
            };
            records.extend(time_prepared(&g, source.name(), &config));
        }
    }
    Ok(records)
}

/// For each worker count, the fastest successful parallel runtime across all
/// variants and repetitions. Serial records and failures are skipped.
pub fn best_per_scale(records: &[BenchRecord]) -> Vec<(usize, f64)> {
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status.is_ok() && !r.is_serial()) {
        best.entry(r.workers)
            .and_modify(|t| *t = t.min(r.runtime_s))
            .or_insert(r.runtime_s);
    }
    best.into_iter().collect()
}

/// Smallest configuration that beats the serial baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Cost {
    Finite(usize),
    Infinite,
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Finite(n) => write!(f, "{n}"),
            Cost::Infinite => f.write_str("∞"),
        }
    }
}

// JSON: an integer, or the string "inf"
impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cost::Finite(n) => s.serialize_u64(*n as u64),
            Cost::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Smallest worker count whose runtime is strictly below `serial_s`.
pub fn compute_cost(serial_s: f64, table: &[(usize, f64)]) -> Result<Cost, BenchError> {
    if !(serial_s > 0.0 && serial_s.is_finite()) {
        return Err(BenchError::BadSerial(serial_s));
    }
    if table.is_empty() {
        return Err(BenchError::EmptyTable);
    }
    Ok(table
        .iter()
        .filter(|&&(_, t)| t < serial_s)
        .map(|&(w, _)| w)
        .min()
        .map_or(Cost::Infinite, Cost::Finite))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalePoint {
    pub workers: usize,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub algorithm: Algorithm,
    pub graph: String,
    pub serial_s: f64,
    pub cost: Cost,
    pub table: Vec<ScalePoint>,
}

impl CostReport {
    pub fn new(
        algorithm: Algorithm,
        graph: impl Into<String>,
        serial_s: f64,
        table: &[(usize, f64)],
    ) -> Result<Self, BenchError> {
        let cost = compute_cost(serial_s, table)?;
        Ok(Self {
            algorithm,
            graph: graph.into(),
            serial_s,
            cost,
            table: table
                .iter()
                .map(|&(workers, runtime_s)| ScalePoint { workers, runtime_s })
                .collect(),
        })
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} on {}: serial {:.6} s", self.algorithm, self.graph, self.serial_s)?;
        writeln!(f, "  workers  best_s")?;
        for p in &self.table {
            let mark = if p.runtime_s < self.serial_s { " *" } else { "" };
            writeln!(f, "  {:>7}  {:.6}{mark}", p.workers, p.runtime_s)?;
        }
        write!(f, "  COST = {}", self.cost)
    }
}

/// One report per (algorithm, graph) pair present in `records`. The serial
/// time is the best successful serial record, unless `serial_override` is
/// given.
pub fn cost_reports(records: &[BenchRecord], serial_override: Option<f64>) -> Result<Vec<CostReport>, BenchError> {
    let mut groups: BTreeMap<(Algorithm, &str), Vec<BenchRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.algorithm, &r.graph)).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|((algorithm, graph), group)| {
            let serial_s = match serial_override {
                Some(s) => s,
                None => group
                    .iter()
                    .filter(|r| r.is_serial() && r.status.is_ok())
                    .map(|r| r.runtime_s)
                    .min_by(f64::total_cmp)
                    .ok_or_else(|| BenchError::NoSerial {
                        algorithm,
                        graph: graph.to_string(),
                    })?,
            };
            CostReport::new(algorithm, graph, serial_s, &best_per_scale(&group))
        })
        .collect()
}

/// Writes records with the fixed header, sorted so that equal record sets
/// produce identical bytes.
pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<(), csv::Error> {
    let mut sorted: Vec<&BenchRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.sort_key_cmp(b));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in sorted {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[BenchRecord], path: &Path) -> Result<(), BenchError> {
    let io = |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    write_csv(records, std::io::BufWriter::new(file)).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => io(source),
        other => BenchError::Csv {
            row: 0,
            message: format!("{other:?}"),
        },
    })
}

/// Parses a CSV with the exact [`CSV_HEADER`]. Errors carry the 1-based line
/// number (the header is line 1).
pub fn parse_csv<R: Read>(input: R) -> Result<Vec<BenchRecord>, BenchError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers().map_err(|e| csv_error(1, &e))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(BenchError::Csv {
            row: 1,
            message: format!("header must be {CSV_HEADER:?}"),
        });
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(line, &e)
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let record: BenchRecord = row.deserialize(Some(&header)).map_err(|e| csv_error(line, &e))?;
        if !(record.runtime_s >= 0.0 && record.runtime_s.is_finite()) {
            return Err(BenchError::Csv {
                row: line,
                message: format!("runtime_s must be a non-negative number, got {}", record.runtime_s),
            });
        }
        records.push(record);
    }
    Ok(records)
}

fn csv_error(row: u64, e: &csv::Error) -> BenchError {
    let message = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => match err.field() {
            Some(i) => format!(
                "column {}: {}",
                CSV_HEADER.split(',').nth(i as usize).unwrap_or("?"),
                err.kind()
            ),
            None => err.kind().to_string(),
        },
        _ => e.to_string(),
    };
    BenchError::Csv { row, message }
}

pub fn read_csv(path: &Path) -> Result<Vec<BenchRecord>, BenchError> {
    let file = std::fs::File::open(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(std::io::BufReader::new(file))
}

/// Repetition statistics for one configuration, over successful runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub algorithm: Algorithm,
    pub variant: String,
    pub graph: String,
    pub workers: usize,
    pub runs: usize,
    pub min_s: f64,
    pub mean_s: f64,
    /// Sample standard deviation; 0 for a single run.
    pub stddev_s: f64,
}

pub fn summarize(records: &[BenchRecord]) -> Vec<Summary> {
    let mut groups: BTreeMap<(Algorithm, &str, &str, usize), Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status.is_ok()) {
        groups
            .entry((r.algorithm, &r.graph, &r.variant, r.workers))
            .or_default()
            .push(r.runtime_s);
    }
    groups
        .into_iter()
        .map(|((algorithm, graph, variant, workers), times)| {
            let n = times.len() as f64;
            let mean = times.iter().sum::<f64>() / n;
            let var = if times.len() > 1 {
                times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            Summary {
                algorithm,
                variant: variant.to_string(),
                graph: graph.to_string(),
                workers,
                runs: times.len(),
                min_s: times.iter().copied().fold(f64::INFINITY, f64::min),
                mean_s: mean,
                stddev_s: var.sqrt(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variants::VariantId;

    fn rec(variant: &str, workers: usize, runtime_s: f64) -> BenchRecord {
        BenchRecord {
            algorithm: Algorithm::PageRank,
            variant: variant.into(),
            graph: "g".into(),
            workers,
            runtime_s,
            iterations_run: 20,
            repetition: 0,
            status: Status::Ok,
        }
    }

    #[test]
    fn best_per_scale_takes_min_over_variants() {
        let records = [rec("basic", 1, 2.5), rec("sortdest", 1, 2.33), rec("serial", 1, 0.1)];
        assert_eq!(best_per_scale(&records), vec![(1, 2.33)]);
        assert_eq!(best_per_scale(&records[..1]), vec![(1, 2.5)]);
        let mut failed = rec("pairs", 1, 0.01);
        failed.status = Status::Failed("timeout".into());
        assert_eq!(best_per_scale(&[records[0].clone(), failed]), vec![(1, 2.5)]);
    }

    #[test]
    fn cost_is_strict() {
        assert_eq!(compute_cost(10.0, &[(1, 10.0)]).unwrap(), Cost::Infinite);
        assert_eq!(compute_cost(10.0, &[(1, 10.0), (4, 9.99)]).unwrap(), Cost::Finite(4));
        assert!(matches!(compute_cost(1.0, &[]), Err(BenchError::EmptyTable)));
        assert!(matches!(compute_cost(0.0, &[(1, 1.0)]), Err(BenchError::BadSerial(_))));
    }

    #[test]
    fn status_round_trip() {
        for s in [Status::Ok, Status::Failed("timeout, after 60 s".into())] {
            assert_eq!(Status::try_from(String::from(s.clone())).unwrap(), s);
        }
        assert!(Status::try_from("maybe".to_string()).is_err());
    }

    #[test]
    fn csv_round_trip_and_order() {
        let mut a = rec("basic", 2, 1.5);
        a.status = Status::Failed("deadlock, sent 3".into());
        let records = vec![rec("serial", 1, 3.0), a, rec("basic", 1, 2.0)];
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&format!("{CSV_HEADER}\n")));
        assert_eq!(text.lines().count(), 4);
        let back = parse_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[0].variant, "basic");
        assert_eq!(back[0].workers, 1);
        let mut again = Vec::new();
        write_csv(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn csv_errors_name_the_row() {
        let text = format!("{CSV_HEADER}\npagerank,basic,g,1,0.5,20,0,ok\npagerank,basic,g,two,0.5,20,0,ok\n");
        match parse_csv(text.as_bytes()) {
            Err(BenchError::Csv { row, message }) => {
                assert_eq!(row, 3);
                assert!(message.contains("workers"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_csv("a,b\n".as_bytes()), Err(BenchError::Csv { row: 1, .. })));
    }

    #[test]
    fn summary_statistics() {
        let mut records = vec![rec("basic", 2, 1.0), rec("basic", 2, 2.0), rec("basic", 2, 3.0)];
        records.push(rec("basic", 4, 5.0));
        let s = summarize(&records);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].runs, s[0].min_s, s[0].mean_s, s[0].stddev_s), (3, 1.0, 2.0, 1.0));
        assert_eq!(s[1].stddev_s, 0.0);
    }

    #[test]
    fn time_run_records_each_repetition() {
        let src = GeneratedSource::new(200, 800, 1);
        let config = BenchConfig::new(
            Algorithm::PageRank,
            Implementation::Parallel(VariantId::Basic),
            4,
        );
        let records = time_run(&src, &config).unwrap();
        assert_eq!(records.len(), 3);
        for (i, r) in records.iter().enumerate() {
            assert_eq!((r.workers, r.repetition, r.iterations_run), (4, i, 20));
            assert!(r.status.is_ok() && r.runtime_s > 0.0);
        }
        let serial = BenchConfig::new(Algorithm::LabelProp, Implementation::Serial, 8);
        for r in time_run(&src, &serial).unwrap() {
            assert_eq!(r.workers, 1);
            assert!(r.iterations_run >= 1);
        }
    }
}
