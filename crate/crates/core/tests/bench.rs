use std::time::{Duration, Instant};

use actorgraph::bench::{
    best_per_scale, compute_cost, cost_reports, emit_csv, read_csv, time_run, Algorithm, BenchConfig,
    BenchError, BenchRecord, Cost, CostReport, GraphSource, Status, CSV_HEADER,
};
use actorgraph::graph::{generate_uniform, Graph, GraphError};
use actorgraph::variants::{Implementation, VariantId};
use proptest::prelude::*;

const PES: [usize; 8] = [1, 2, 4, 8, 16, 32, 64, 128];

fn table(times: [f64; 8]) -> Vec<(usize, f64)> {
    PES.into_iter().zip(times).collect()
}

#[test]
fn pagerank_table_has_cost_one() {
    let columns = [
        ("soc-LJ1", 3.18, [2.33, 2.22, 1.90, 1.90, 1.35, 1.09, 1.13, 1.08]),
        ("twitter_rv", 180.69, [119.28, 73.93, 56.01, 52.84, 39.02, 28.55, 21.48, 25.00]),
        ("uk-2007-05", 83.62, [58.65, 47.83, 31.36, 19.94, 11.19, 8.61, 5.11, 4.56]),
    ];
    for (name, serial, times) in columns {
        assert_eq!(compute_cost(serial, &table(times)).unwrap(), Cost::Finite(1), "{name}");
    }
}

#[test]
fn labelprop_table_has_cost_one() {
    let columns = [
        ("soc-LJ1", 1.05, [0.67, 0.72, 0.80, 0.69, 0.45, 0.33, 0.45, 0.25]),
        ("twitter_rv", 71.85, [50.32, 31.07, 36.68, 26.69, 18.68, 12.97, 8.24, 8.66]),
        ("uk-2007-05", 83.59, [43.83, 33.45, 21.56, 13.81, 10.24, 7.15, 5.69, 6.11]),
    ];
    for (name, serial, times) in columns {
        assert_eq!(compute_cost(serial, &table(times)).unwrap(), Cost::Finite(1), "{name}");
    }
}

#[test]
fn graphx_never_beats_serial() {
    assert_eq!(compute_cost(3.18, &[(16, 130.0), (64, 36.4), (128, 27.9)]).unwrap(), Cost::Infinite);
    assert_eq!(compute_cost(1.05, &[(64, 16.31)]).unwrap(), Cost::Infinite);
}

#[test]
fn cost_report_json_shape() {
    let report = CostReport::new(Algorithm::PageRank, "soc-LJ1", 3.18, &[(1, 2.33), (2, 2.22)]).unwrap();
    let json: serde_json::Value = serde_json::to_value(&report).unwrap();
    assert_eq!(json["algorithm"], "pagerank");
    assert_eq!(json["graph"], "soc-LJ1");
    assert_eq!(json["serial_s"], 3.18);
    assert_eq!(json["cost"], 1);
    assert_eq!(json["table"][0]["workers"], 1);
    let inf = CostReport::new(Algorithm::LabelProp, "x", 1.05, &[(64, 16.31)]).unwrap();
    assert_eq!(serde_json::to_value(&inf).unwrap()["cost"], "inf");
    assert!(inf.to_string().contains("COST = ∞"));
}

proptest! {
    #[test]
    fn adding_a_faster_record_never_raises_cost(
        serial in 0.1f64..10.0,
        times in prop::collection::vec((1usize..256, 0.01f64..20.0), 1..12),
        extra in (1usize..256, 0.01f64..20.0),
    ) {
        let before = compute_cost(serial, &times).unwrap();
        let mut more = times.clone();
        more.push(extra);
        let after = compute_cost(serial, &more).unwrap();
        prop_assert!(after <= before);
    }
}

struct SlowSource {
    delay: Duration,
}

impl GraphSource for SlowSource {
    fn name(&self) -> &str {
        "slow"
    }

    fn load(&self) -> Result<Graph, GraphError> {
        std::thread::sleep(self.delay);
        Ok(Graph::from_edge_list(&generate_uniform(100, 400, 5)))
    }
}

#[test]
fn loader_time_is_not_measured() {
    let source = SlowSource {
        delay: Duration::from_millis(300),
    };
    for implementation in [Implementation::Serial, Implementation::Parallel(VariantId::Basic)] {
        let mut config = BenchConfig::new(Algorithm::PageRank, implementation, 2);
        config.repetitions = 1;
        let start = Instant::now();
        let records = time_run(&source, &config).unwrap();
        assert!(start.elapsed() >= Duration::from_millis(300));
        assert!(records[0].runtime_s < 0.3, "{implementation}: {}", records[0].runtime_s);
    }
}

#[test]
fn timeout_becomes_failed_record() {
    let source = actorgraph::bench::GeneratedSource::new(50_000, 400_000, 2);
    let mut config = BenchConfig::new(Algorithm::PageRank, Implementation::Parallel(VariantId::Basic), 2);
    config.repetitions = 1;
    config.timeout = Duration::from_nanos(1);
    let records = time_run(&source, &config).unwrap();
    match &records[0].status {
        Status::Failed(reason) => assert!(reason.contains("quiescence"), "{reason}"),
        Status::Ok => panic!("expected a timeout"),
    }
    // failures do not count towards COST
    assert!(best_per_scale(&records).is_empty());
}

#[test]
fn emitted_csv_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    emit_csv(&[], &empty).unwrap();
    assert_eq!(std::fs::read_to_string(&empty).unwrap(), format!("{CSV_HEADER}\n"));

    let source = actorgraph::bench::GeneratedSource::new(300, 1200, 8);
    let mut config = BenchConfig::new(Algorithm::LabelProp, Implementation::Parallel(VariantId::SortDest), 2);
    config.repetitions = 2;
    let mut records = time_run(&source, &config).unwrap();
    records.reverse();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    emit_csv(&records, &a).unwrap();
    records.reverse();
    emit_csv(&records, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read_to_string(&a).unwrap().lines().count(), 3);
    assert_eq!(read_csv(&a).unwrap().len(), 2);
}

#[test]
fn reports_from_records() {
    let rec = |variant: &str, workers, runtime_s| BenchRecord {
        algorithm: Algorithm::PageRank,
        variant: variant.into(),
        graph: "soc-LJ1".into(),
        workers,
        runtime_s,
        iterations_run: 20,
        repetition: 0,
        status: Status::Ok,
    };
    let mut records = vec![rec("serial", 1, 3.18)];
    for (w, t) in table([2.33, 2.22, 1.90, 1.90, 1.35, 1.09, 1.13, 1.08]) {
        records.push(rec("basic", w, t + 0.5));
        records.push(rec("sortdest", w, t));
    }
    let reports = cost_reports(&records, None).unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].cost, Cost::Finite(1));
    assert_eq!(reports[0].table[0].runtime_s, 2.33);
    assert!(matches!(
        cost_reports(&records[1..], None),
        Err(BenchError::NoSerial { .. })
    ));
    assert_eq!(cost_reports(&records[1..], Some(1.0)).unwrap()[0].cost, Cost::Infinite);
}
