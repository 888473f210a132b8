#![no_main]

use iqtl::genmap::LinkageMap;
use iqtl::sim::TruthSpec;
use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;

fn reference_map() -> &'static LinkageMap {
    static MAP: OnceLock<LinkageMap> = OnceLock::new();
    MAP.get_or_init(|| {
        LinkageMap::parse("chrom\tmarker\tpos_cM\n1\tm1\t0\n1\tm2\t50\n2\tn1\t0\n2\tn2\t80\n")
            .unwrap()
    })
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(truth) = TruthSpec::parse(text) {
        // Validation and the matched null truth must never panic on anything
        // the parser accepts.
        let _ = truth.validate(reference_map());
        let null = truth.null_version();
        assert!(null.qtl.is_empty());
        assert_eq!(null.design.total_individuals(), truth.design.total_individuals());
    }
});
