//! Power and design-comparison harness: repeated simulate/scan/test cycles
//! per family layout, with a detection threshold calibrated from matched
//! no-QTL replicates of the same design.

use crate::error::{Error, Result};
use crate::genmap::{FamilyDataset, LinkageMap};
use crate::inference::{quantile_index, Thresholds};
use crate::scan::{call_peaks, multi_scan, single_scan, ScanMode, ScanOptions, ScanProfile};
use crate::sim::generate::{simulate, SIMULATED_TRAIT};
use crate::sim::truth::{StudyPlan, TruthSpec};
use crate::vc::VarianceComponents;
use rayon::prelude::*;

/// Knobs for one study run.
#[derive(Clone, Debug)]
pub struct StudyOptions {
    pub scan: ScanOptions,
    pub mode: ScanMode,
    /// Level used both for the calibrated detection threshold and for the
    /// imprinting call at detected peaks.
    pub alpha: f64,
    /// Replicates simulated under the truth, per design.
    pub n_rep: usize,
    /// No-QTL replicates used to calibrate each design's threshold.
    pub n_threshold: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            scan: ScanOptions::default(),
            mode: ScanMode::Single,
            alpha: 0.05,
            n_rep: 100,
            n_threshold: 200,
        }
    }
}

/// Aggregated outcome for one family layout.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignSummary {
    pub name: String,
    /// Genome-wide detection bar from the matched no-QTL replicates.
    pub threshold: f64,
    /// Calibration replicates lost to numerical failures.
    pub threshold_failures: usize,
    /// Truth replicates lost to numerical failures.
    pub failures: usize,
    /// Truth replicates whose scan cleared the threshold at a peak.
    pub detections: usize,
    /// Detections over completed truth replicates.
    pub detection_power: f64,
    /// Fraction of detections whose imprinting test rejected; absent
    /// without detections.
    pub imprinting_rate: Option<f64>,
    /// Root-mean-square distance from each detection's top peak to the
    /// nearest generating QTL on the same chromosome; absent when no
    /// detection landed on a chromosome carrying one.
    pub position_rmse_cm: Option<f64>,
    /// Variance estimates at the top peak, averaged over detections.
    pub mean_estimates: Option<VarianceComponents>,
}

/// Full study outcome across designs, under one scan mode.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyReport {
    pub alpha: f64,
    pub mode: ScanMode,
    pub n_rep: usize,
    pub seed: u64,
    pub designs: Vec<DesignSummary>,
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Collision-resistant two-level seed derivation, so every (design, phase,
/// replicate) triple gets an independent stream family.
fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

struct RepOutcome {
    detected: bool,
    p_imp: Option<f64>,
    pos_err: Option<f64>,
    omega: Option<VarianceComponents>,
}

/// Runs the full harness: per design, calibrate a genome-wide threshold from
/// no-QTL replicates, then simulate truth replicates, scan each, call peaks
/// against that threshold and rerun the imprinting workup at the top peak.
///
/// Numerical failures inside a replicate are counted and excluded, never
/// fatal; input errors propagate. Results are reproducible from `seed`
/// regardless of thread count.
pub fn run_study(
    map: &LinkageMap,
    plan: &StudyPlan,
    opts: &StudyOptions,
    seed: u64,
) -> Result<StudyReport> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::InvalidOptions(format!(
            "study level must lie strictly between 0 and 1, got {}",
            opts.alpha
        )));
    }
    if opts.n_rep == 0 || opts.n_threshold == 0 {
        return Err(Error::InvalidOptions(
            "study needs at least one truth replicate and one calibration replicate".into(),
        ));
    }
    opts.scan.validate()?;
    plan.validate(map)?;

    let designs = plan
        .arms
        .iter()
        .enumerate()
        .map(|(arm_idx, (name, truth))| run_design(map, name, truth, opts, seed, arm_idx))
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyReport {
        alpha: opts.alpha,
        mode: opts.mode,
        n_rep: opts.n_rep,
        seed,
        designs,
    })
}

fn run_design(
    map: &LinkageMap,
    name: &str,
    truth: &TruthSpec,
    opts: &StudyOptions,
    seed: u64,
    arm_idx: usize,
) -> Result<DesignSummary> {
    let scan = |ds: &FamilyDataset| -> Result<ScanProfile> {
        match opts.mode {
            ScanMode::Single => single_scan(ds, map, SIMULATED_TRAIT, &opts.scan),
            ScanMode::Multi => multi_scan(ds, map, SIMULATED_TRAIT, &opts.scan),
        }
    };

    let null = truth.null_version();
    let calibration: Vec<Result<f64>> = (0..opts.n_threshold)
        .into_par_iter()
        .map(|rep| {
            let s = mix(mix(seed, 2 * arm_idx as u64), rep as u64);
            let ds = simulate(map, &null, s)?;
            Ok(scan(&ds)?.genome_maximum())
        })
        .collect();
    let mut maxima = Vec::with_capacity(opts.n_threshold);
    let mut threshold_failures = 0usize;
    for r in calibration {
        match r {
            Ok(v) => maxima.push(v),
            Err(e) if e.is_numerical() => threshold_failures += 1,
            Err(e) => return Err(e),
        }
    }
    if maxima.is_empty() {
        return Err(Error::Numerical(format!(
            "design {name:?}: every calibration replicate failed"
        )));
    }
    maxima.sort_unstable_by(f64::total_cmp);
    let threshold = maxima[quantile_index(maxima.len(), opts.alpha) - 1];

    // Chromosome-level bars sit at infinity so only genome-wide peaks count
    // as detections.
    let bars = Thresholds {
        alpha: opts.alpha,
        n_perm: 0,
        seed,
        genome: threshold,
        per_chromosome: map
            .chromosomes()
            .iter()
            .map(|c| (c.name.clone(), f64::INFINITY))
            .collect(),
        quantile_resolved: true,
    };

    let replicates: Vec<Result<RepOutcome>> = (0..opts.n_rep)
        .into_par_iter()
        .map(|rep| {
            let s = mix(mix(seed, 2 * arm_idx as u64 + 1), rep as u64);
            let ds = simulate(map, truth, s)?;
            let profile = scan(&ds)?;
            let calls = call_peaks(&ds, map, &profile, &bars, opts.alpha, &opts.scan.fit)?;
            let best = calls.iter().max_by(|a, b| a.lr.total_cmp(&b.lr));
            Ok(match best {
                None => RepOutcome {
                    detected: false,
                    p_imp: None,
                    pos_err: None,
                    omega: None,
                },
                Some(call) => RepOutcome {
                    detected: true,
                    p_imp: call.battery.imprinting.p_value,
                    pos_err: truth
                        .qtl
                        .iter()
                        .filter(|q| q.chrom == call.chrom)
                        .map(|q| (q.position_cm - call.position_cm).abs())
                        .min_by(|a, b| a.total_cmp(b)),
                    omega: Some(call.omega),
                },
            })
        })
        .collect();

    let mut failures = 0usize;
    let mut outcomes = Vec::with_capacity(opts.n_rep);
    for r in replicates {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) if e.is_numerical() => failures += 1,
            Err(e) => return Err(e),
        }
    }

    let detections = outcomes.iter().filter(|o| o.detected).count();
    let n_ok = outcomes.len();
    let detection_power = if n_ok == 0 {
        0.0
    } else {
        detections as f64 / n_ok as f64
    };
    let imprinting_rate = (detections > 0).then(|| {
        let rejected = outcomes
            .iter()
            .filter(|o| matches!(o.p_imp, Some(p) if p < opts.alpha))
            .count();
        rejected as f64 / detections as f64
    });
    let errs: Vec<f64> = outcomes.iter().filter_map(|o| o.pos_err).collect();
    let position_rmse_cm = (!errs.is_empty())
        .then(|| (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt());
    let omegas: Vec<VarianceComponents> = outcomes.iter().filter_map(|o| o.omega).collect();
    let mean_estimates = (!omegas.is_empty()).then(|| mean_components(&omegas));

    Ok(DesignSummary {
        name: name.to_string(),
        threshold,
        threshold_failures,
        failures,
        detections,
        detection_power,
        imprinting_rate,
        position_rmse_cm,
        mean_estimates,
    })
}

fn mean_components(omegas: &[VarianceComponents]) -> VarianceComponents {
    let n = omegas.len() as f64;
    let mean = |get: fn(&VarianceComponents) -> f64| omegas.iter().map(get).sum::<f64>() / n;
    let mean_opt = |get: fn(&VarianceComponents) -> Option<f64>| {
        let present: Vec<f64> = omegas.iter().filter_map(get).collect();
        (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
    };
    VarianceComponents {
        sigma_m2: mean(|o| o.sigma_m2),
        sigma_f2: mean(|o| o.sigma_f2),
        sigma_mf2: mean(|o| o.sigma_mf2),
        sigma_g2: mean(|o| o.sigma_g2),
        sigma_e2: mean(|o| o.sigma_e2),
        sigma_l2: mean_opt(|o| o.sigma_l2),
        sigma_r2: mean_opt(|o| o.sigma_r2),
    }
}
