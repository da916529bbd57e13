use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use actorgraph::bench::{
    cost_reports, emit_csv, read_csv, summarize, sweep, Algorithm, BenchConfig, FileSource, GeneratedSource,
    GraphSource,
};
use actorgraph::graph::{generate_uniform, load_edge_list, write_binary, write_text, EdgeFormat, Graph};
use actorgraph::serial::{labelprop_serial, pagerank_serial};
use actorgraph::variants::{
    check_phase_safety, Fault, Implementation, LabelPropRun, PageRankRun, RunOptions, VariantId,
};
use anyhow::{bail, Context, Result};
use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "actorgraph", version, about = "Actor-style PageRank and label propagation, with COST benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an edge list between text and binary formats
    Convert(ConvertArgs),
    /// Write a seeded uniform random graph
    Generate(GenerateArgs),
    /// Run one algorithm with one implementation and write the result
    Run(RunArgs),
    /// Check every variant against the serial baseline
    Verify(VerifyArgs),
    /// Time a sweep of implementations and worker counts into a CSV
    Bench(BenchArgs),
    /// Compute COST from a benchmark CSV
    Cost(CostArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Binary,
}

impl From<Format> for EdgeFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => EdgeFormat::Text,
            Format::Binary => EdgeFormat::Binary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Pagerank,
    Labelprop,
}

impl From<Algo> for Algorithm {
    fn from(a: Algo) -> Self {
        match a {
            Algo::Pagerank => Algorithm::PageRank,
            Algo::Labelprop => Algorithm::LabelProp,
        }
    }
}

/// Guesses the format from the extension: `.bin` is binary, anything else text.
fn format_for(path: &Path, explicit: Option<Format>) -> EdgeFormat {
    explicit.map(EdgeFormat::from).unwrap_or_else(|| {
        if path.extension().is_some_and(|e| e == "bin") {
            EdgeFormat::Binary
        } else {
            EdgeFormat::Text
        }
    })
}

fn implementation_parser() -> impl TypedValueParser<Value = Implementation> {
    PossibleValuesParser::new(Implementation::NAMES).map(|s| s.parse::<Implementation>().expect("listed name"))
}

fn parse_alpha(s: &str) -> Result<f32, String> {
    let alpha: f32 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&alpha) {
        Ok(alpha)
    } else {
        Err(format!("{alpha} is outside [0, 1]"))
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_seconds(s: &str) -> Result<f64, String> {
    let secs: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if secs > 0.0 && secs.is_finite() {
        Ok(secs)
    } else {
        Err("must be a positive number of seconds".into())
    }
}

#[derive(Args)]
struct GraphArgs {
    /// Edge-list file; without it a uniform random graph is generated
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Input format [default: binary for .bin files, text otherwise]
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Vertices of the generated graph
    #[arg(long, value_parser = parse_positive, default_value_t = 1000)]
    vertices: usize,
    /// Edges of the generated graph
    #[arg(long, default_value_t = 5000)]
    edges: usize,
    /// Seed of the generated graph
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl GraphArgs {
    fn source(&self) -> Box<dyn GraphSource> {
        match &self.graph {
            Some(path) => Box::new(FileSource {
                path: path.clone(),
                format: format_for(path, self.format),
            }),
            None => Box::new(GeneratedSource::new(self.vertices, self.edges, self.seed)),
        }
    }
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Input format [default: from the input extension]
    #[arg(long, value_enum)]
    from: Option<Format>,
    /// Output format [default: from the output extension]
    #[arg(long, value_enum)]
    to: Option<Format>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = parse_positive)]
    vertices: usize,
    #[arg(long)]
    edges: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// Output format [default: from the output extension]
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, value_enum, default_value = "pagerank")]
    algo: Algo,
    #[arg(long, value_parser = implementation_parser(), default_value = "basic")]
    variant: Implementation,
    /// Worker threads
    #[arg(long, env = "ACTORGRAPH_WORKERS", value_parser = parse_positive, default_value_t = 1)]
    workers: usize,
    /// Vertex chunks [default: one per worker]
    #[arg(long, value_parser = parse_positive)]
    chunks: Option<usize>,
    /// PageRank damping factor
    #[arg(long, value_parser = parse_alpha, default_value_t = 0.85)]
    alpha: f32,
    /// PageRank iterations
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    /// Record an event trace, check phase safety and write it as CSV
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Apply incoming batches as they arrive instead of in sender order
    #[arg(long)]
    apply_on_arrival: bool,
    /// Result file, one value per line in vertex order
    #[arg(long, default_value = "result.txt")]
    output: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, value_enum, default_value = "pagerank")]
    algo: Algo,
    /// Worker counts to check
    #[arg(long, value_delimiter = ',', value_parser = parse_positive, default_value = "1,2,4")]
    workers: Vec<usize>,
    /// Variants to check [default: all]
    #[arg(long, value_delimiter = ',')]
    variants: Vec<VariantName>,
    /// Largest accepted per-vertex relative error for ranks
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, value_parser = parse_alpha, default_value_t = 0.85)]
    alpha: f32,
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantName {
    Basic,
    Atomic,
    Pairs,
    Reduction,
    Sortdest,
}

impl From<VariantName> for VariantId {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Basic => VariantId::Basic,
            VariantName::Atomic => VariantId::Atomic,
            VariantName::Pairs => VariantId::Pairs,
            VariantName::Reduction => VariantId::Reduction,
            VariantName::Sortdest => VariantId::SortDest,
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, value_enum, default_value = "pagerank")]
    algo: Algo,
    /// Worker counts to sweep
    #[arg(long, value_delimiter = ',', value_parser = parse_positive, default_value = "1,2,4")]
    workers: Vec<usize>,
    /// Implementations to time [default: serial and all variants]
    #[arg(long, value_delimiter = ',', value_parser = implementation_parser())]
    variants: Vec<Implementation>,
    #[arg(long, value_parser = parse_positive, default_value_t = 3)]
    repetitions: usize,
    /// Per-phase quiescence timeout in seconds; a run that exceeds it is recorded as failed
    #[arg(long, value_parser = parse_seconds, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long, value_parser = parse_positive)]
    chunks: Option<usize>,
    #[arg(long, value_parser = parse_alpha, default_value_t = 0.85)]
    alpha: f32,
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    #[arg(long)]
    apply_on_arrival: bool,
    #[arg(long, default_value = "bench.csv")]
    output: PathBuf,
}

#[derive(Args)]
struct CostArgs {
    /// CSV written by `bench`, or by hand in the same format
    input: PathBuf,
    /// Serial runtime in seconds, overriding the CSV's serial rows
    #[arg(long, value_parser = parse_seconds)]
    serial: Option<f64>,
    /// Print one JSON object per report instead of text
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert(a) => convert(a),
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Verify(a) => verify(a),
        Command::Bench(a) => bench(a),
        Command::Cost(a) => cost(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("actorgraph: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn write_edges(list: &actorgraph::graph::EdgeList, path: &Path, format: EdgeFormat) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    match format {
        EdgeFormat::Text => write_text(list, &mut out),
        EdgeFormat::Binary => write_binary(list, &mut out),
    }
    .and_then(|()| out.flush())
    .with_context(|| format!("writing {}", path.display()))
}

fn convert(a: ConvertArgs) -> Result<()> {
    let list = load_edge_list(&a.input, format_for(&a.input, a.from))?;
    write_edges(&list, &a.output, format_for(&a.output, a.to))?;
    println!("wrote {} edges to {}", list.edges.len(), a.output.display());
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<()> {
    let list = generate_uniform(a.vertices, a.edges, a.seed);
    write_edges(&list, &a.output, format_for(&a.output, a.format))?;
    println!("wrote {} vertices, {} edges to {}", a.vertices, a.edges, a.output.display());
    Ok(())
}

fn load(graph: &GraphArgs, algo: Algo) -> Result<(Graph, String)> {
    let source = graph.source();
    let g = actorgraph::bench::load_for(source.as_ref(), algo.into())?;
    Ok((g, source.name().to_string()))
}

fn write_values<T: std::fmt::Display>(values: &[T], path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for v in values {
        writeln!(out, "{v}")?;
    }
    out.flush().with_context(|| format!("writing {}", path.display()))
}

fn run(a: RunArgs) -> Result<()> {
    let (g, _) = load(&a.graph, a.algo)?;
    let mut options = RunOptions::new(a.workers);
    options.chunks = a.chunks;
    options.trace = a.trace.is_some();
    options.apply_on_arrival = a.apply_on_arrival;

    let (elapsed, iterations, trace) = match (a.algo, a.variant) {
        (Algo::Pagerank, Implementation::Serial) => {
            let start = Instant::now();
            let ranks = pagerank_serial(&g, a.alpha, a.iterations);
            let elapsed = start.elapsed();
            write_values(&ranks, &a.output)?;
            (elapsed, a.iterations, None)
        }
        (Algo::Labelprop, Implementation::Serial) => {
            let start = Instant::now();
            let (labels, passes) = actorgraph::serial::labelprop_serial_counted(&g);
            let elapsed = start.elapsed();
            write_values(&labels, &a.output)?;
            (elapsed, passes, None)
        }
        (Algo::Pagerank, Implementation::Parallel(v)) => {
            let job = PageRankRun::prepare(&g, v, a.alpha, a.iterations, &options)?;
            let start = Instant::now();
            let out = job.execute()?;
            let elapsed = start.elapsed();
            write_values(&out.values, &a.output)?;
            (elapsed, out.iterations, out.trace)
        }
        (Algo::Labelprop, Implementation::Parallel(v)) => {
            let job = LabelPropRun::prepare(&g, v, &options)?;
            let start = Instant::now();
            let out = job.execute()?;
            let elapsed = start.elapsed();
            write_values(&out.values, &a.output)?;
            (elapsed, out.iterations, out.trace)
        }
    };
    println!("runtime_s: {:.6}", elapsed.as_secs_f64());
    println!("iterations: {iterations}");
    if let Some(path) = &a.trace {
        match trace {
            Some(trace) => {
                let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                trace.write_csv(BufWriter::new(file))?;
                if let Err(event) = check_phase_safety(&trace) {
                    bail!("phase violation in trace: {event:?}");
                }
            }
            None => eprintln!("actorgraph: the serial baseline has no trace; {} not written", path.display()),
        }
    }
    Ok(())
}

/// Relative error, or absolute error where the expected value is 0.
fn deviation(got: f32, want: f32) -> f64 {
    let (g, w) = (got as f64, want as f64);
    if w == 0.0 {
        (g - w).abs()
    } else {
        ((g - w) / w).abs()
    }
}

fn verify(a: VerifyArgs) -> Result<()> {
    let (g, name) = load(&a.graph, a.algo)?;
    let variants: Vec<VariantId> = if a.variants.is_empty() {
        VariantId::ALL.to_vec()
    } else {
        a.variants.iter().map(|&v| v.into()).collect()
    };
    let mut options = RunOptions::new(1);
    options.fault = a.inject_fault.then_some(Fault::DropFirstBatch);
    println!("verifying {} on {name} ({} vertices, {} edges)", Algorithm::from(a.algo), g.num_vertices(), g.num_edges());

    let mut mismatches = Vec::new();
    match a.algo {
        Algo::Pagerank => {
            let expected = pagerank_serial(&g, a.alpha, a.iterations);
            for &v in &variants {
                let mut worst = 0.0f64;
                for &w in &a.workers {
                    options.workers = w;
                    let got = PageRankRun::prepare(&g, v, a.alpha, a.iterations, &options)?.execute()?.values;
                    for (vertex, (&x, &e)) in got.iter().zip(&expected).enumerate() {
                        let d = deviation(x, e);
                        worst = worst.max(d);
                        if d > a.tolerance {
                            mismatches.push(format!(
                                "{v} at {w} workers: vertex {vertex}: expected {e}, got {x} (relative error {d:.3e})"
                            ));
                            break;
                        }
                    }
                }
                println!("{v:<10} max relative error {worst:.3e}");
            }
        }
        Algo::Labelprop => {
            let expected = labelprop_serial(&g);
            for &v in &variants {
                let mut differing = 0usize;
                for &w in &a.workers {
                    options.workers = w;
                    let got = LabelPropRun::prepare(&g, v, &options)?.execute()?.values;
                    let diff: Vec<usize> = (0..got.len()).filter(|&i| got[i] != expected[i]).collect();
                    differing = differing.max(diff.len());
                    if let Some(&vertex) = diff.first() {
                        mismatches.push(format!(
                            "{v} at {w} workers: vertex {vertex}: expected {}, got {}",
                            expected[vertex], got[vertex]
                        ));
                    }
                }
                println!("{v:<10} max differing labels {differing}");
            }
        }
    }
    if mismatches.is_empty() {
        println!("ok: all variants match the serial baseline");
        Ok(())
    } else {
        for m in &mismatches {
            eprintln!("mismatch: {m}");
        }
        bail!("{} variant/worker combinations disagree with the serial baseline", mismatches.len())
    }
}

fn bench(a: BenchArgs) -> Result<()> {
    let implementations: Vec<Implementation> = if a.variants.is_empty() {
        std::iter::once(Implementation::Serial)
            .chain(VariantId::ALL.map(Implementation::Parallel))
            .collect()
    } else {
        a.variants.clone()
    };
    let mut template = BenchConfig::new(a.algo.into(), Implementation::Serial, 1);
    template.chunks = a.chunks;
    template.alpha = a.alpha;
    template.iterations = a.iterations;
    template.repetitions = a.repetitions;
    template.apply_on_arrival = a.apply_on_arrival;
    template.timeout = Duration::from_secs_f64(a.timeout);

    let source = a.graph.source();
    let records = sweep(source.as_ref(), &template, &implementations, &a.workers)?;
    emit_csv(&records, &a.output)?;

    println!("{:<10} {:>7} {:>4} {:>10} {:>10} {:>10}", "variant", "workers", "runs", "min_s", "mean_s", "stddev_s");
    for s in summarize(&records) {
        println!(
            "{:<10} {:>7} {:>4} {:>10.6} {:>10.6} {:>10.6}",
            s.variant, s.workers, s.runs, s.min_s, s.mean_s, s.stddev_s
        );
    }
    let failed = records.iter().filter(|r| !r.status.is_ok()).count();
    if failed > 0 {
        eprintln!("actorgraph: {failed} runs failed; see the status column");
    }
    println!("wrote {} records to {}", records.len(), a.output.display());
    Ok(())
}

fn cost(a: CostArgs) -> Result<()> {
    let records = read_csv(&a.input)?;
    let reports = cost_reports(&records, a.serial)?;
    if reports.is_empty() {
        bail!("{} holds no records", a.input.display());
    }
    for report in reports {
        if a.json {
            println!("{}", serde_json::to_string(&report)?);
        } else {
            println!("{report}");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn numeric_parsers() {
        assert_eq!(parse_alpha("0"), Ok(0.0));
        assert_eq!(parse_alpha("1"), Ok(1.0));
        assert!(parse_alpha("1.01").is_err());
        assert!(parse_alpha("nan").is_err());
        assert!(parse_positive("0").is_err());
        assert_eq!(parse_positive("8"), Ok(8));
        assert!(parse_seconds("0").is_err());
        assert!(parse_seconds("inf").is_err());
    }

    #[test]
    fn format_follows_extension() {
        assert_eq!(format_for(Path::new("g.bin"), None), EdgeFormat::Binary);
        assert_eq!(format_for(Path::new("g.txt"), None), EdgeFormat::Text);
        assert_eq!(format_for(Path::new("g.bin"), Some(Format::Text)), EdgeFormat::Text);
    }

    #[test]
    fn deviation_handles_zero() {
        assert_eq!(deviation(0.0, 0.0), 0.0);
        assert_eq!(deviation(0.5, 0.0), 0.5);
        assert!((deviation(1.1, 1.0) - 0.1).abs() < 1e-6);
    }
}
