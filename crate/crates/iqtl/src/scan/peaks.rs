//! Peak extraction from scan profiles and the full per-peak workup:
//! significance against permutation thresholds plus the imprinting battery.

use super::{ScanMode, ScanPoint, ScanProfile};
use crate::error::{Error, Result};
use crate::genmap::{FamilyDataset, LinkageMap};
use crate::ibd::family_matrices;
use crate::inference::{run_battery, ImprintingBattery, Thresholds};
use crate::vc::{fit_reml_warm, FamilyData, FitOptions, FixedEffects, VarianceComponents};

/// Threshold tier a peak cleared.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Significance {
    GenomeWide,
    Suggestive,
}

impl Significance {
    pub fn label(self) -> &'static str {
        match self {
            Significance::GenomeWide => "genome",
            Significance::Suggestive => "suggestive",
        }
    }
}

/// A called QTL: a profile peak that cleared a threshold, with the
/// imprinting workup rerun at its position.
#[derive(Clone, Debug)]
pub struct QtlCall {
    pub chrom: String,
    pub position_cm: f64,
    pub nearest_marker: String,
    pub offset_cm: f64,
    pub lr: f64,
    /// From the profile point; absent in multi mode.
    pub p_value: Option<f64>,
    pub significance: Significance,
    pub battery: ImprintingBattery,
    pub omega: VarianceComponents,
    pub beta: FixedEffects,
    pub converged: bool,
}

/// Indices of profile peaks: maximal runs of equal statistic that fall away
/// on both existing sides. A run touching a chromosome end needs only its
/// inner side to fall; a run covering the whole chromosome localizes
/// nothing and is not a peak. Each run reports its leftmost index.
pub fn peak_indices(points: &[ScanPoint]) -> Vec<usize> {
    let n = points.len();
    let mut peaks = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && points[end].lr == points[start].lr {
            end += 1;
        }
        let whole = start == 0 && end == n;
        let left_ok = start == 0 || points[start - 1].lr < points[start].lr;
        let right_ok = end == n || points[end].lr < points[start].lr;
        if !whole && left_ok && right_ok {
            peaks.push(start);
        }
        start = end;
    }
    peaks
}

/// Walks the profile, keeps peaks that clear the genome-wide or their
/// chromosome's threshold, and reruns the model plus imprinting battery at
/// each kept peak. Thresholds must cover every profile chromosome.
pub fn call_peaks(
    dataset: &FamilyDataset,
    map: &LinkageMap,
    profile: &ScanProfile,
    thresholds: &Thresholds,
    imprinting_alpha: f64,
    opts: &FitOptions,
) -> Result<Vec<QtlCall>> {
    if !(imprinting_alpha > 0.0 && imprinting_alpha < 1.0) {
        return Err(Error::InvalidOptions(format!(
            "imprinting test level must lie strictly between 0 and 1, got {imprinting_alpha}"
        )));
    }
    let chrom_threshold = |name: &str| -> Result<f64> {
        thresholds
            .per_chromosome
            .iter()
            .find(|(c, _)| c == name)
            .map(|&(_, t)| t)
            .ok_or_else(|| {
                Error::InvalidThresholds(format!("no chromosome-level threshold for {name:?}"))
            })
    };
    for chrom in &profile.chromosomes {
        chrom_threshold(&chrom.chrom)?;
    }

    let ys = dataset.trait_vectors(&profile.trait_name)?;
    let mut calls = Vec::new();
    for chrom in &profile.chromosomes {
        let suggestive_at = chrom_threshold(&chrom.chrom)?;
        for idx in peak_indices(&chrom.points) {
            let point = &chrom.points[idx];
            let significance = if point.lr >= thresholds.genome {
                Significance::GenomeWide
            } else if point.lr >= suggestive_at {
                Significance::Suggestive
            } else {
                continue;
            };
            let battery = battery_at(dataset, &ys, map, profile, &chrom.chrom, point, opts,
                imprinting_alpha)?;
            calls.push(QtlCall {
                chrom: chrom.chrom.clone(),
                position_cm: point.position_cm,
                nearest_marker: point.nearest_marker.clone(),
                offset_cm: point.offset_cm,
                lr: point.lr,
                p_value: point.p_value,
                significance,
                battery,
                omega: point.omega,
                beta: point.beta,
                converged: point.converged,
            });
        }
    }
    Ok(calls)
}

/// Rebuilds the full model at a peak (warm-started from the profile's
/// estimates, so it lands on the same optimum) and runs the battery there.
#[allow(clippy::too_many_arguments)]
fn battery_at(
    dataset: &FamilyDataset,
    ys: &[nalgebra::DVector<f64>],
    map: &LinkageMap,
    profile: &ScanProfile,
    chrom_name: &str,
    point: &ScanPoint,
    opts: &FitOptions,
    alpha: f64,
) -> Result<ImprintingBattery> {
    let (chrom_idx, chrom) = map.chromosome(chrom_name)?;
    let data: Vec<FamilyData> = match profile.mode {
        ScanMode::Single => dataset
            .families
            .iter()
            .zip(ys)
            .map(|(family, y)| {
                FamilyData::new(
                    family.id.clone(),
                    family.cross.maternal_class(),
                    y.clone(),
                    family_matrices(family, map, chrom_idx, point.position_cm)?,
                )
            })
            .collect::<Result<_>>()?,
        ScanMode::Multi => {
            let n = chrom.markers.len();
            let interval = chrom
                .markers
                .partition_point(|m| m.position <= point.position_cm)
                .saturating_sub(1)
                .min(n - 2);
            let left = interval
                .checked_sub(1)
                .map(|i| chrom.markers[i].position);
            let right = chrom.markers.get(interval + 2).map(|m| m.position);
            dataset
                .families
                .iter()
                .zip(ys)
                .map(|(family, y)| {
                    let total_at = |pos: f64| -> Result<nalgebra::DMatrix<f64>> {
                        Ok(family_matrices(family, map, chrom_idx, pos)?.total())
                    };
                    FamilyData::new(
                        family.id.clone(),
                        family.cross.maternal_class(),
                        y.clone(),
                        family_matrices(family, map, chrom_idx, point.position_cm)?,
                    )?
                    .with_flank_matrices(
                        left.map(&total_at).transpose()?,
                        right.map(&total_at).transpose()?,
                    )
                })
                .collect::<Result<_>>()?
        }
    };
    let spec = match profile.mode {
        ScanMode::Single => crate::vc::ModelSpec::full(),
        ScanMode::Multi => crate::vc::ModelSpec::full().with_flanks(
            point.omega.sigma_l2.is_some(),
            point.omega.sigma_r2.is_some(),
        ),
    };
    let full = fit_reml_warm(&data, &spec, opts, &point.omega)?;
    run_battery(&data, &full, opts, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::scanner::tests::{toy_dataset, toy_map};
    use crate::scan::{single_scan, ScanOptions};

    fn flat_point(lr: f64) -> ScanPoint {
        ScanPoint {
            position_cm: 0.0,
            nearest_marker: "m".into(),
            offset_cm: 0.0,
            lr,
            p_value: None,
            omega: VarianceComponents::zero_genetic(1.0),
            beta: FixedEffects { mu: [None; 3] },
            converged: true,
            boundary: false,
        }
    }

    fn points(lrs: &[f64]) -> Vec<ScanPoint> {
        lrs.iter().map(|&lr| flat_point(lr)).collect()
    }

    #[test]
    fn peak_rules_handle_runs_ends_and_flats() {
        assert_eq!(peak_indices(&points(&[1.0, 3.0, 2.0])), vec![1]);
        assert_eq!(peak_indices(&points(&[1.0, 3.0, 3.0, 2.0])), vec![1]);
        assert_eq!(peak_indices(&points(&[1.0, 2.0, 3.0])), vec![2]);
        assert_eq!(peak_indices(&points(&[3.0, 2.0, 1.0])), vec![0]);
        assert_eq!(peak_indices(&points(&[2.0, 2.0, 2.0])), Vec::<usize>::new());
        assert_eq!(
            peak_indices(&points(&[0.0, 5.0, 1.0, 4.0, 0.0])),
            vec![1, 3]
        );
        assert_eq!(peak_indices(&points(&[5.0, 1.0, 5.0])), vec![0, 2]);
        assert_eq!(peak_indices(&[]), Vec::<usize>::new());
    }

    fn thresholds(genome: f64, chrom: f64) -> Thresholds {
        Thresholds {
            alpha: 0.05,
            n_perm: 20,
            seed: 0,
            genome,
            per_chromosome: vec![("1".to_string(), chrom)],
            quantile_resolved: true,
        }
    }

    #[test]
    fn profiles_below_threshold_produce_no_calls() {
        let ds = toy_dataset();
        let map = toy_map();
        let profile = single_scan(&ds, &map, "wt", &ScanOptions::default()).unwrap();
        let calls = call_peaks(
            &ds,
            &map,
            &profile,
            &thresholds(1e6, 1e6),
            0.05,
            &FitOptions::default(),
        )
        .unwrap();
        assert!(calls.is_empty());
    }

    #[test]
    fn cleared_peaks_are_called_with_battery_and_tier() {
        let ds = toy_dataset();
        let map = toy_map();
        let profile = single_scan(&ds, &map, "wt", &ScanOptions::default()).unwrap();
        let genome_at = profile.genome_maximum() - 0.5;
        let calls = call_peaks(
            &ds,
            &map,
            &profile,
            &thresholds(genome_at, genome_at / 2.0),
            0.05,
            &FitOptions::default(),
        )
        .unwrap();
        assert!(!calls.is_empty());
        let top = &calls[0];
        assert_eq!(top.significance, Significance::GenomeWide);
        assert!(top.lr >= genome_at);
        assert!(top.battery.imprinting.statistic >= 0.0);
        // Suggestive tier: genome bar raised above the whole profile,
        // chromosome bar left under the peak.
        let calls = call_peaks(
            &ds,
            &map,
            &profile,
            &thresholds(1e6, genome_at),
            0.05,
            &FitOptions::default(),
        )
        .unwrap();
        assert!(calls.iter().all(|c| c.significance == Significance::Suggestive));
        assert!(!calls.is_empty());
    }

    #[test]
    fn missing_chromosome_threshold_is_an_error() {
        let ds = toy_dataset();
        let map = toy_map();
        let profile = single_scan(&ds, &map, "wt", &ScanOptions::default()).unwrap();
        let bad = Thresholds {
            per_chromosome: vec![("nope".to_string(), 1.0)],
            ..thresholds(1.0, 1.0)
        };
        assert!(matches!(
            call_peaks(&ds, &map, &profile, &bad, 0.05, &FitOptions::default()),
            Err(Error::InvalidThresholds(_))
        ));
    }
}
