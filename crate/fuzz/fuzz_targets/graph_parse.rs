#![no_main]

use libfuzzer_sys::fuzz_target;
use quakecast::graph::BinGraph;

// Input: node table and edge list separated by a NUL byte.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Some((nodes, edges)) = text.split_once('\0') else { return };
    let Ok(graph) = BinGraph::parse(nodes, edges) else { return };
    let again = BinGraph::parse(&graph.node_table(), &graph.edge_list()).unwrap();
    assert_eq!(again, graph);
});
