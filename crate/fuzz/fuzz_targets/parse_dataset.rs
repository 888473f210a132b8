#![no_main]

use iqtl::genmap::{FamilyDataset, LinkageMap};
use libfuzzer_sys::fuzz_target;

// Input carries three files separated by NUL bytes: map, genotypes,
// phenotypes. Accepted datasets must survive a serialize/re-parse round trip
// with byte-identical serialization.
fuzz_target!(|data: &[u8]| {
    let mut parts = data.splitn(3, |&b| b == 0);
    let (Some(m), Some(g), Some(p)) = (parts.next(), parts.next(), parts.next()) else {
        return;
    };
    let (Ok(m), Ok(g), Ok(p)) = (
        std::str::from_utf8(m),
        std::str::from_utf8(g),
        std::str::from_utf8(p),
    ) else {
        return;
    };
    let Ok(map) = LinkageMap::parse(m) else {
        return;
    };
    if let Ok(dataset) = FamilyDataset::parse(&map, g, p) {
        let genotypes = dataset.genotype_tsv(&map);
        let phenotypes = dataset.phenotype_tsv();
        let reparsed = FamilyDataset::parse(&map, &genotypes, &phenotypes)
            .expect("serialized dataset must re-parse");
        assert_eq!(genotypes, reparsed.genotype_tsv(&map));
        assert_eq!(phenotypes, reparsed.phenotype_tsv());
        assert_eq!(dataset.total_individuals(), reparsed.total_individuals());
    }
});
