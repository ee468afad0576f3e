#![no_main]

use libfuzzer_sys::fuzz_target;
use ndp::io::PyramidFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = PyramidFile::parse(text) else { return };
    let selectors = file.selectors().expect("validated selectors");
    let graphs = file.graphs().expect("validated graphs");
    assert_eq!(selectors.len(), graphs.len());
    let again = PyramidFile::parse(&file.to_json()).expect("re-parse");
    assert_eq!(again.to_json(), file.to_json());
});
