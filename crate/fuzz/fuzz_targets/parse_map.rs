#![no_main]

use iqtl::genmap::LinkageMap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(map) = LinkageMap::parse(text) {
        // Accepted maps keep the documented shape: at least two markers per
        // chromosome, positions nondecreasing.
        assert!(!map.chromosomes().is_empty());
        for chrom in map.chromosomes() {
            assert!(chrom.markers.len() >= 2);
            assert!(chrom
                .markers
                .windows(2)
                .all(|w| w[0].position <= w[1].position));
            let (lo, hi) = chrom.span();
            assert!(lo <= hi);
        }
    }
});
