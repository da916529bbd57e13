//! Replays the checked-in fuzz seeds through the parser entry points with the
//! same checks the fuzz targets make.

use std::path::PathBuf;

use actorgraph::bench::{parse_csv, write_csv};
use actorgraph::graph::{parse_binary, parse_text, write_binary, write_text};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            let bytes = std::fs::read(&path).unwrap();
            (path, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn text_seeds() {
    let mut parsed = 0;
    for (path, data) in seeds("parse_text") {
        if let Ok(list) = parse_text(&data) {
            parsed += 1;
            let mut out = Vec::new();
            write_text(&list, &mut out).unwrap();
            let again = parse_text(&out).unwrap();
            assert_eq!(again.edges, list.edges, "{}", path.display());
            assert_eq!(again.num_vertices(), list.num_vertices(), "{}", path.display());
        }
    }
    assert!(parsed > 0);
}

#[test]
fn binary_seeds() {
    for (path, data) in seeds("parse_binary") {
        if let Ok(list) = parse_binary(&data) {
            let mut out = Vec::new();
            write_binary(&list, &mut out).unwrap();
            assert_eq!(out, data, "{}", path.display());
        } else {
            assert_ne!(data.len() % 8, 0, "{}", path.display());
        }
    }
}

#[test]
fn bench_csv_seeds() {
    for (path, data) in seeds("parse_bench_csv") {
        if let Ok(records) = parse_csv(&data[..]) {
            let mut out = Vec::new();
            write_csv(&records, &mut out).unwrap();
            assert_eq!(parse_csv(&out[..]).unwrap().len(), records.len(), "{}", path.display());
        }
    }
}
