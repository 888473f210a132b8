//! Genome scanning: likelihood-ratio profiles over a marker-anchored
//! position grid, in single-QTL mode and in multiple-QTL mode with
//! flanking-background absorbers, plus peak calling against permutation
//! thresholds.

mod peaks;
mod scanner;

pub use peaks::{call_peaks, QtlCall, Significance};
pub use scanner::{multi_scan, single_scan};

use crate::error::{Error, Result};
use crate::genmap::Chromosome;
use crate::vc::{FitOptions, FixedEffects, VarianceComponents};

/// Scan configuration shared by both modes.
#[derive(Clone, Debug)]
pub struct ScanOptions {
    /// Grid spacing between markers, in centimorgans.
    pub step_cm: f64,
    pub fit: FitOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            step_cm: 2.0,
            fit: FitOptions::default(),
        }
    }
}

impl ScanOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_cm > 0.0) || !self.step_cm.is_finite() {
            return Err(Error::InvalidOptions(format!(
                "scan step must be a positive number of centimorgans, got {}",
                self.step_cm
            )));
        }
        Ok(())
    }
}

/// Which covariance model the profile was scanned under.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanMode {
    /// One QTL at the test position.
    Single,
    /// Test position plus composite absorbers at the next-to-flanking
    /// markers of its interval.
    Multi,
}

impl ScanMode {
    pub fn label(self) -> &'static str {
        match self {
            ScanMode::Single => "single",
            ScanMode::Multi => "multi",
        }
    }
}

/// One evaluated grid position.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanPoint {
    pub position_cm: f64,
    /// Closest marker, ties resolved toward the smaller position.
    pub nearest_marker: String,
    /// Signed distance from the nearest marker (positive = rightward).
    pub offset_cm: f64,
    /// Likelihood ratio against the no-QTL null; clamped at zero.
    pub lr: f64,
    /// Mixture p-value; absent for unreliable fits and always absent in
    /// multi mode, whose null distribution is left to permutation.
    pub p_value: Option<f64>,
    pub omega: VarianceComponents,
    pub beta: FixedEffects,
    /// Both fits behind `lr` converged.
    pub converged: bool,
    /// Some fitted variance sits at its boundary.
    pub boundary: bool,
}

/// Profile of one chromosome, positions strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct ChromosomeProfile {
    pub chrom: String,
    pub points: Vec<ScanPoint>,
}

impl ChromosomeProfile {
    pub fn max_lr(&self) -> f64 {
        self.points.iter().map(|p| p.lr).fold(0.0, f64::max)
    }
}

/// Full genome scan output.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanProfile {
    pub mode: ScanMode,
    pub trait_name: String,
    pub step_cm: f64,
    pub chromosomes: Vec<ChromosomeProfile>,
}

impl ScanProfile {
    /// Per-chromosome maximum statistic, in map order; the shape consumed by
    /// the permutation-threshold machinery.
    pub fn chromosome_maxima(&self) -> Vec<(String, f64)> {
        self.chromosomes
            .iter()
            .map(|c| (c.chrom.clone(), c.max_lr()))
            .collect()
    }

    pub fn genome_maximum(&self) -> f64 {
        self.chromosomes.iter().map(|c| c.max_lr()).fold(0.0, f64::max)
    }
}

/// Marker positions plus a left-anchored grid at `step` spacing inside each
/// interval. Every marker appears exactly once; positions are strictly
/// increasing; halving the step refines the grid without moving old points.
pub fn position_grid(chrom: &Chromosome, step_cm: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    for pair in chrom.markers.windows(2) {
        let (a, b) = (pair[0].position, pair[1].position);
        grid.push(a);
        let mut k = 1;
        loop {
            let p = a + k as f64 * step_cm;
            if p >= b - 1e-9 {
                break;
            }
            grid.push(p);
            k += 1;
        }
    }
    grid.push(chrom.markers.last().expect("maps have markers").position);
    grid
}

/// Closest marker to `pos` and the signed offset from it; ties go to the
/// leftmost of the tied markers.
pub fn nearest_marker(chrom: &Chromosome, pos: f64) -> (String, f64) {
    let best = chrom
        .markers
        .iter()
        .min_by(|a, b| {
            (a.position - pos)
                .abs()
                .total_cmp(&(b.position - pos).abs())
                .then(a.position.total_cmp(&b.position))
        })
        .expect("maps have markers");
    (best.name.clone(), pos - best.position)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmap::MarkerLocus;

    fn chrom(positions: &[f64]) -> Chromosome {
        Chromosome {
            name: "1".into(),
            markers: positions
                .iter()
                .enumerate()
                .map(|(i, &position)| MarkerLocus {
                    name: format!("m{i}"),
                    position,
                })
                .collect(),
        }
    }

    #[test]
    fn grid_is_left_anchored_and_marker_complete() {
        let c = chrom(&[0.0, 10.0, 20.0]);
        assert_eq!(
            position_grid(&c, 3.0),
            vec![0.0, 3.0, 6.0, 9.0, 10.0, 13.0, 16.0, 19.0, 20.0]
        );
        // A step landing exactly on the next marker is not duplicated.
        assert_eq!(
            position_grid(&c, 5.0),
            vec![0.0, 5.0, 10.0, 15.0, 20.0]
        );
        // Oversized steps leave the markers alone.
        assert_eq!(position_grid(&c, 100.0), vec![0.0, 10.0, 20.0]);
        for g in [position_grid(&c, 3.0), position_grid(&c, 0.7)] {
            for w in g.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    #[test]
    fn halving_the_step_refines_the_grid() {
        let c = chrom(&[0.0, 7.0, 19.5]);
        let coarse = position_grid(&c, 4.0);
        let fine = position_grid(&c, 2.0);
        for p in &coarse {
            assert!(
                fine.iter().any(|q| q == p),
                "coarse point {p} missing from the refined grid"
            );
        }
    }

    #[test]
    fn nearest_marker_ties_go_left() {
        let c = chrom(&[0.0, 10.0]);
        assert_eq!(nearest_marker(&c, 6.0), ("m1".into(), -4.0));
        assert_eq!(nearest_marker(&c, 5.0), ("m0".into(), 5.0));
        assert_eq!(nearest_marker(&c, 0.0), ("m0".into(), 0.0));
    }
}
