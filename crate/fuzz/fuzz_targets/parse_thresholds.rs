#![no_main]

use iqtl::report::{parse_thresholds, thresholds_tsv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = parse_thresholds(text) {
        // Anything accepted must survive a serialize/re-parse round trip
        // exactly.
        let tsv = thresholds_tsv(&t);
        let reparsed = parse_thresholds(&tsv).expect("serialized thresholds must re-parse");
        assert_eq!(t, reparsed);
    }
});
