//! Simulation truth descriptions: the generating QTL parameters, background
//! variances, class means and the family design, parsed from TOML.

use crate::error::{Error, Result};
use crate::genmap::LinkageMap;
use serde::Deserialize;

/// One generating QTL.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QtlTruth {
    pub chrom: String,
    pub position_cm: f64,
    #[serde(default)]
    pub sigma_m2: f64,
    #[serde(default)]
    pub sigma_f2: f64,
    #[serde(default)]
    pub sigma_mf2: f64,
}

/// Family layout: how many families of which crosses, and their size.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub families: usize,
    pub offspring: usize,
    /// Family counts per cross in QQxQq, QqxQQ, qqxQq, Qqxqq order;
    /// defaults to an even split with remainders going to the earlier
    /// crosses.
    #[serde(default)]
    pub allocation: Option<[usize; 4]>,
}

impl DesignSpec {
    /// Families per cross after applying the default even split.
    pub fn cross_counts(&self) -> [usize; 4] {
        self.allocation.unwrap_or_else(|| {
            let base = self.families / 4;
            let extra = self.families % 4;
            let mut counts = [base; 4];
            for slot in counts.iter_mut().take(extra) {
                *slot += 1;
            }
            counts
        })
    }

    pub fn total_individuals(&self) -> usize {
        // Saturating so unvalidated (e.g. freshly parsed) specs cannot panic;
        // `TruthSpec::validate` rejects sizes that overflow.
        self.families.saturating_mul(self.offspring)
    }
}

/// Complete generating model for one simulated study arm.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    /// Maternal-class means (AA, Aa, aa).
    pub means: [f64; 3],
    pub sigma_g2: f64,
    pub sigma_e2: f64,
    #[serde(default)]
    pub qtl: Vec<QtlTruth>,
    pub design: DesignSpec,
}

/// A shared truth fanned out over several family layouts, for design
/// comparisons at fixed total size.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyPlan {
    pub arms: Vec<(String, TruthSpec)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStudy {
    means: [f64; 3],
    sigma_g2: f64,
    sigma_e2: f64,
    #[serde(default)]
    qtl: Vec<QtlTruth>,
    design: Vec<NamedDesign>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedDesign {
    name: String,
    families: usize,
    offspring: usize,
    #[serde(default)]
    allocation: Option<[usize; 4]>,
}

impl TruthSpec {
    pub fn parse(text: &str) -> Result<TruthSpec> {
        let truth: TruthSpec = toml::from_str(text).map_err(Box::new)?;
        Ok(truth)
    }

    /// The same background with every QTL removed; the matched no-QTL
    /// hypothesis used for calibration.
    pub fn null_version(&self) -> TruthSpec {
        TruthSpec {
            qtl: Vec::new(),
            ..self.clone()
        }
    }

    /// Checks internal consistency and fit to the map. Variances must be
    /// nonnegative with positive residual; each QTL's cross-parent term is
    /// capped by the geometric mean of its parental variances, which is
    /// exactly the condition keeping the generating covariance positive
    /// semidefinite; positions must lie inside their chromosome's span.
    pub fn validate(&self, map: &LinkageMap) -> Result<()> {
        for m in self.means {
            if !m.is_finite() {
                return Err(Error::InvalidTruth("class means must be finite".into()));
            }
        }
        for (name, v) in [("sigma_g2", self.sigma_g2), ("sigma_e2", self.sigma_e2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidTruth(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.sigma_e2 <= 0.0 {
            return Err(Error::InvalidTruth(
                "sigma_e2 must be strictly positive".into(),
            ));
        }
        for (idx, qtl) in self.qtl.iter().enumerate() {
            for (name, v) in [
                ("sigma_m2", qtl.sigma_m2),
                ("sigma_f2", qtl.sigma_f2),
                ("sigma_mf2", qtl.sigma_mf2),
            ] {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidTruth(format!(
                        "qtl {idx}: {name} must be finite and nonnegative, got {v}"
                    )));
                }
            }
            if qtl.sigma_mf2 > (qtl.sigma_m2 * qtl.sigma_f2).sqrt() + 1e-12 {
                return Err(Error::InvalidTruth(format!(
                    "qtl {idx}: sigma_mf2 = {} exceeds sqrt(sigma_m2 * sigma_f2) = {}; the \
                     generating covariance would not be positive semidefinite",
                    qtl.sigma_mf2,
                    (qtl.sigma_m2 * qtl.sigma_f2).sqrt()
                )));
            }
            let (_, chrom) = map.chromosome(&qtl.chrom)?;
            if !qtl.position_cm.is_finite() || !chrom.contains(qtl.position_cm) {
                return Err(Error::PositionOutsideSpan {
                    chrom: qtl.chrom.clone(),
                    position: qtl.position_cm,
                });
            }
        }
        let d = &self.design;
        if d.families == 0 || d.offspring == 0 {
            return Err(Error::InvalidTruth(
                "design needs at least one family and one offspring per family".into(),
            ));
        }
        if d.families.checked_mul(d.offspring).is_none() {
            return Err(Error::InvalidTruth(format!(
                "design size {} families x {} offspring overflows",
                d.families, d.offspring
            )));
        }
        if let Some(allocation) = d.allocation {
            let total: u128 = allocation.iter().map(|&n| n as u128).sum();
            if total != d.families as u128 {
                return Err(Error::InvalidTruth(format!(
                    "allocation {allocation:?} sums to {total}, design declares {} families",
                    d.families
                )));
            }
        }
        Ok(())
    }
}

impl StudyPlan {
    /// Parses the multi-design form: shared truth fields plus one `[[design]]
    /// ` entry per arm.
    pub fn parse(text: &str) -> Result<StudyPlan> {
        let raw: RawStudy = toml::from_str(text).map_err(Box::new)?;
        if raw.design.is_empty() {
            return Err(Error::InvalidTruth(
                "study plan declares no designs".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        let arms = raw
            .design
            .into_iter()
            .map(|d| {
                if d.name.is_empty() || d.name.contains([',', '\t', '\n']) {
                    return Err(Error::InvalidTruth(format!(
                        "design name {:?} must be nonempty and free of commas, tabs and newlines",
                        d.name
                    )));
                }
                if !seen.insert(d.name.clone()) {
                    return Err(Error::InvalidTruth(format!(
                        "duplicate design name {:?}",
                        d.name
                    )));
                }
                Ok((
                    d.name,
                    TruthSpec {
                        means: raw.means,
                        sigma_g2: raw.sigma_g2,
                        sigma_e2: raw.sigma_e2,
                        qtl: raw.qtl.clone(),
                        design: DesignSpec {
                            families: d.families,
                            offspring: d.offspring,
                            allocation: d.allocation,
                        },
                    },
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StudyPlan { arms })
    }

    pub fn validate(&self, map: &LinkageMap) -> Result<()> {
        for (_, truth) in &self.arms {
            truth.validate(map)?;
        }
        Ok(())
    }
}
