#![no_main]

use libfuzzer_sys::fuzz_target;
use ndp::io::GraphFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = GraphFile::parse(text) else { return };
    let graph = file.to_graph().expect("parsed file builds a graph");
    let again = GraphFile::parse(&GraphFile::from_graph(&graph).unwrap().to_json()).expect("re-parse");
    assert_eq!(again.to_graph().unwrap(), graph);
});
