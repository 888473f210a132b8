#![no_main]

use iqtl::genmap::LinkageMap;
use iqtl::sim::StudyPlan;
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
    if let Ok(plan) = StudyPlan::parse(text) {
        assert!(!plan.arms.is_empty());
        let mut names: Vec<&str> = plan.arms.iter().map(|(name, _)| name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), plan.arms.len(), "duplicate arm names accepted");
        let _ = plan.validate(reference_map());
    }
});
