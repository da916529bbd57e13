#![no_main]

use actorgraph::graph::{parse_binary, write_binary};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(list) = parse_binary(data) {
        assert_eq!(data.len() % 8, 0);
        let mut out = Vec::new();
        write_binary(&list, &mut out).unwrap();
        assert_eq!(out, data);
    }
});
