#![no_main]

use actorgraph::graph::{parse_text, write_text, Graph};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(list) = parse_text(data) else { return };
    // keep CSR construction bounded
    if list.num_vertices() > 1 << 20 {
        return;
    }
    let g = Graph::from_edge_list(&list);
    assert_eq!(g.num_edges(), list.edges.len());
    let mut out = Vec::new();
    write_text(&list, &mut out).unwrap();
    let again = parse_text(&out).expect("written text reparses");
    assert_eq!(again.edges, list.edges);
    assert_eq!(again.num_vertices(), list.num_vertices());
});
