#![no_main]

use actorgraph::bench::{parse_csv, write_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(records) = parse_csv(data) else { return };
    let mut out = Vec::new();
    write_csv(&records, &mut out).unwrap();
    let again = parse_csv(&out[..]).expect("written CSV reparses");
    assert_eq!(again.len(), records.len());
});
