//! Scan drivers: per-position model fitting over the grid with warm-started
//! candidate ladders, organized so results do not depend on worker count.

use super::{ChromosomeProfile, ScanMode, ScanOptions, ScanPoint, ScanProfile};
use crate::error::{Error, Result};
use crate::genmap::{Chromosome, FamilyDataset, LinkageMap};
use crate::ibd::family_matrices;
use crate::inference::qtl_test;
use crate::vc::{
    fit_reml, fit_reml_warm, FamilyData, FitOptions, FixedEffects, ModelFit, ModelSpec,
    VarComponent, VarianceComponents,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Positions fitted sequentially per parallel unit; fixed so the
/// warm-start chain, and therefore the output, is scheduling-independent.
const WARM_CHUNK: usize = 16;

/// Single-QTL scan: every marker plus the step grid, each position's full
/// model tested against one genome-wide no-QTL null.
pub fn single_scan(
    dataset: &FamilyDataset,
    map: &LinkageMap,
    trait_name: &str,
    opts: &ScanOptions,
) -> Result<ScanProfile> {
    opts.validate()?;
    let ys = dataset.trait_vectors(trait_name)?;

    // The no-QTL covariance has no position dependence, so one null fit
    // serves the whole genome. Its data is assembled at an arbitrary
    // position; the null spec never reads the QTL IBD matrices.
    let null_anchor = map.chromosomes()[0].markers[0].position;
    let null_data = family_inputs(dataset, &ys, map, 0, null_anchor, None)?;
    let null_fit = robust_fit(&null_data, &ModelSpec::null(), &opts.fit, None, None)?;
    let anchor = seeded_from_null(&null_fit.omega);

    let full_spec = ModelSpec::full();
    let chromosomes = map
        .chromosomes()
        .iter()
        .enumerate()
        .map(|(chrom_idx, chrom)| {
            let grid = super::position_grid(chrom, opts.step_cm);
            let chunks: Vec<Vec<ScanPoint>> = grid
                .par_chunks(WARM_CHUNK)
                .map(|chunk| {
                    let mut warm: Option<VarianceComponents> = None;
                    let mut out = Vec::with_capacity(chunk.len());
                    for &pos in chunk {
                        let point = match family_inputs(dataset, &ys, map, chrom_idx, pos, None)
                            .and_then(|data| {
                                robust_fit(
                                    &data,
                                    &full_spec,
                                    &opts.fit,
                                    warm.as_ref(),
                                    Some(&anchor),
                                )
                            }) {
                            Ok(fit) => {
                                warm = Some(fit.omega);
                                let test = qtl_test(&fit, &null_fit);
                                let mut point =
                                    fitted_point(chrom, pos, &fit, test.statistic, test.p_value);
                                point.converged = fit.converged && null_fit.converged;
                                point
                            }
                            Err(_) => failed_point(chrom, pos),
                        };
                        out.push(point);
                    }
                    out
                })
                .collect();
            let points: Vec<ScanPoint> = chunks.into_iter().flatten().collect();
            ChromosomeProfile {
                chrom: chrom.name.clone(),
                points,
            }
        })
        .collect();

    Ok(ScanProfile {
        mode: ScanMode::Single,
        trait_name: trait_name.to_string(),
        step_cm: opts.step_cm,
        chromosomes,
    })
}

/// Multiple-QTL scan: within each marker interval the covariance gains
/// composite absorbers built from total IBD at the next-to-flanking markers
/// (dropped at chromosome ends), and the tested components are compared
/// against an interval-specific null that keeps those absorbers. Asymptotic
/// p-values are withheld; thresholds come from permutation.
pub fn multi_scan(
    dataset: &FamilyDataset,
    map: &LinkageMap,
    trait_name: &str,
    opts: &ScanOptions,
) -> Result<ScanProfile> {
    opts.validate()?;
    let ys = dataset.trait_vectors(trait_name)?;

    let chromosomes = map
        .chromosomes()
        .iter()
        .enumerate()
        .map(|(chrom_idx, chrom)| {
            let n = chrom.markers.len();
            let points: Vec<ScanPoint> = (0..n - 1)
                .into_par_iter()
                .map(|interval| {
                    interval_points(dataset, &ys, map, chrom_idx, chrom, interval, opts)
                })
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect();
            ChromosomeProfile {
                chrom: chrom.name.clone(),
                points,
            }
        })
        .collect();

    Ok(ScanProfile {
        mode: ScanMode::Multi,
        trait_name: trait_name.to_string(),
        step_cm: opts.step_cm,
        chromosomes,
    })
}

/// Grid positions belonging to one interval: left-closed, right-open, with
/// the final marker attached to the last interval.
fn interval_grid(chrom: &Chromosome, interval: usize, step: f64) -> Vec<f64> {
    let a = chrom.markers[interval].position;
    let b = chrom.markers[interval + 1].position;
    let mut grid = vec![a];
    let mut k = 1;
    loop {
        let p = a + k as f64 * step;
        if p >= b - 1e-9 {
            break;
        }
        grid.push(p);
        k += 1;
    }
    if interval + 2 == chrom.markers.len() {
        grid.push(b);
    }
    grid
}

fn interval_points(
    dataset: &FamilyDataset,
    ys: &[DVector<f64>],
    map: &LinkageMap,
    chrom_idx: usize,
    chrom: &Chromosome,
    interval: usize,
    opts: &ScanOptions,
) -> Vec<ScanPoint> {
    let grid = interval_grid(chrom, interval, opts.step_cm);
    let flanks = match flank_matrices(dataset, map, chrom_idx, chrom, interval) {
        Ok(f) => f,
        Err(_) => return grid.iter().map(|&p| failed_point(chrom, p)).collect(),
    };
    let has_left = flanks.iter().any(|(l, _)| l.is_some());
    let has_right = flanks.iter().any(|(_, r)| r.is_some());
    let full_spec = ModelSpec::full().with_flanks(has_left, has_right);
    let null_spec = full_spec
        .without(VarComponent::Maternal)
        .and_then(|s| s.without(VarComponent::Paternal))
        .and_then(|s| s.without(VarComponent::CrossParent))
        .expect("full spec carries the tested components");

    let assemble = |pos: f64| -> Result<Vec<FamilyData>> {
        family_inputs(dataset, ys, map, chrom_idx, pos, Some(&flanks))
    };
    let null_fit = match assemble(grid[0])
        .and_then(|data| robust_fit(&data, &null_spec, &opts.fit, None, None))
    {
        Ok(fit) => fit,
        Err(_) => return grid.iter().map(|&p| failed_point(chrom, p)).collect(),
    };
    let anchor = seeded_from_null(&null_fit.omega);

    let mut warm: Option<VarianceComponents> = None;
    grid.iter()
        .map(|&pos| {
            match assemble(pos).and_then(|data| {
                robust_fit(&data, &full_spec, &opts.fit, warm.as_ref(), Some(&anchor))
            }) {
                Ok(fit) => {
                    warm = Some(fit.omega);
                    let lr = (2.0 * (fit.reml_loglik - null_fit.reml_loglik)).max(0.0);
                    let converged = fit.converged && null_fit.converged;
                    let mut point = fitted_point(chrom, pos, &fit, lr, None);
                    point.converged = converged;
                    point
                }
                Err(_) => failed_point(chrom, pos),
            }
        })
        .collect()
}

/// Total expected IBD at the next-to-flanking markers of `interval`, per
/// family; `None` on sides where no such marker exists.
#[allow(clippy::type_complexity)]
fn flank_matrices(
    dataset: &FamilyDataset,
    map: &LinkageMap,
    chrom_idx: usize,
    chrom: &Chromosome,
    interval: usize,
) -> Result<Vec<(Option<DMatrix<f64>>, Option<DMatrix<f64>>)>> {
    let left_pos = interval.checked_sub(1).map(|i| chrom.markers[i].position);
    let right_pos = chrom.markers.get(interval + 2).map(|m| m.position);
    dataset
        .families
        .iter()
        .map(|family| {
            let total_at = |pos: f64| -> Result<DMatrix<f64>> {
                Ok(family_matrices(family, map, chrom_idx, pos)?.total())
            };
            Ok((
                left_pos.map(&total_at).transpose()?,
                right_pos.map(&total_at).transpose()?,
            ))
        })
        .collect()
}

/// Assembles the per-family fitting inputs at one position.
fn family_inputs(
    dataset: &FamilyDataset,
    ys: &[DVector<f64>],
    map: &LinkageMap,
    chrom_idx: usize,
    pos: f64,
    flanks: Option<&[(Option<DMatrix<f64>>, Option<DMatrix<f64>>)]>,
) -> Result<Vec<FamilyData>> {
    dataset
        .families
        .iter()
        .zip(ys)
        .enumerate()
        .map(|(idx, (family, y))| {
            let ibd = family_matrices(family, map, chrom_idx, pos)?;
            let data = FamilyData::new(
                family.id.clone(),
                family.cross.maternal_class(),
                y.clone(),
                ibd,
            )?;
            match flanks {
                Some(f) => data.with_flank_matrices(f[idx].0.clone(), f[idx].1.clone()),
                None => Ok(data),
            }
        })
        .collect()
}

/// Candidate ladder around the REML fitter: warm start from the neighboring
/// position, then a null-anchored start, then the default start. The first
/// converged candidate wins; otherwise the highest restricted likelihood
/// among the attempts. Purely input-determined, so scans stay reproducible.
fn robust_fit(
    data: &[FamilyData],
    spec: &ModelSpec,
    opts: &FitOptions,
    warm: Option<&VarianceComponents>,
    anchor: Option<&VarianceComponents>,
) -> Result<ModelFit> {
    let mut best: Option<ModelFit> = None;
    let mut last_err: Option<Error> = None;
    let take = |fit: ModelFit, best: &mut Option<ModelFit>| -> bool {
        let converged = fit.converged;
        if best
            .as_ref()
            .map_or(true, |b| fit.reml_loglik > b.reml_loglik)
        {
            *best = Some(fit);
        }
        converged
    };

    for init in [warm, anchor].into_iter().flatten() {
        match fit_reml_warm(data, spec, opts, init) {
            Ok(fit) => {
                if take(fit, &mut best) {
                    return Ok(best.expect("just stored"));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match fit_reml(data, spec, opts) {
        Ok(fit) => {
            take(fit, &mut best);
        }
        Err(e) => last_err = Some(e),
    }
    best.ok_or_else(|| last_err.expect("no fit and no error is impossible"))
}

/// Start for the full model sitting just off the no-QTL optimum: background
/// components from the null fit, tested components lifted slightly off zero.
fn seeded_from_null(null: &VarianceComponents) -> VarianceComponents {
    let total = null.sigma_g2 + null.sigma_e2;
    let seed = if total > 0.0 { 0.05 * total } else { 0.05 };
    VarianceComponents {
        sigma_m2: seed,
        sigma_f2: seed,
        sigma_mf2: 0.0,
        ..*null
    }
}

fn fitted_point(
    chrom: &Chromosome,
    pos: f64,
    fit: &ModelFit,
    lr: f64,
    p_value: Option<f64>,
) -> ScanPoint {
    let (nearest_marker, offset_cm) = super::nearest_marker(chrom, pos);
    let boundary = fit
        .spec
        .components()
        .iter()
        .zip(&fit.omega_raw)
        .any(|(c, &v)| *c != VarComponent::Residual && v <= c.lower_bound());
    ScanPoint {
        position_cm: pos,
        nearest_marker,
        offset_cm,
        lr,
        p_value,
        omega: fit.omega,
        beta: fit.beta,
        converged: fit.converged,
        boundary,
    }
}

/// Placeholder for a position whose fits all failed hard; flagged, never
/// fatal to the scan.
fn failed_point(chrom: &Chromosome, pos: f64) -> ScanPoint {
    let (nearest_marker, offset_cm) = super::nearest_marker(chrom, pos);
    ScanPoint {
        position_cm: pos,
        nearest_marker,
        offset_cm,
        lr: 0.0,
        p_value: None,
        omega: VarianceComponents::zero_genetic(0.0),
        beta: FixedEffects { mu: [None; 3] },
        converged: false,
        boundary: false,
    }
}
