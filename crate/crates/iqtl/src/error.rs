//! Crate-wide error type.

use crate::genmap::{CrossType, TriploidGenotype};
use thiserror::Error;

/// Any failure surfaced by this crate.
///
/// Variants split into input-validation failures (malformed files, impossible
/// requests) and numerical failures (factorization breakdowns, degenerate
/// statistics); [`Error::is_numerical`] distinguishes the two for exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent linkage-map input.
    #[error("invalid map: {0}")]
    InvalidMap(String),

    /// Malformed or inconsistent genotype/phenotype input.
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    /// Cross-type token that is not one of the four reciprocal backcrosses.
    #[error("unknown cross type {0:?} (expected QQxQq, QqxQQ, qqxQq or Qqxqq)")]
    UnknownCross(String),

    /// Genotype that the stated cross cannot produce.
    #[error("genotype {genotype} is not an offspring class of cross {cross}")]
    ForeignGenotype {
        cross: CrossType,
        genotype: TriploidGenotype,
    },

    /// Map distances must be nonnegative.
    #[error("negative map distance: {0} cM")]
    NegativeDistance(f64),

    /// Test position outside the chromosome's marker span.
    #[error("position {position} cM is outside the marker span of chromosome {chrom:?}")]
    PositionOutsideSpan { chrom: String, position: f64 },

    /// Chromosome name absent from the map.
    #[error("unknown chromosome {0:?}")]
    UnknownChromosome(String),

    /// Trait name absent from the dataset, or ambiguous when unspecified.
    #[error("trait selection failed: {0}")]
    UnknownTrait(String),

    /// Matrix or vector dimensions disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A family covariance could not be factorized.
    #[error("covariance for family {family:?} is singular or not positive definite")]
    SingularCovariance { family: String },

    /// A simulated covariance failed its positive-semidefiniteness check.
    #[error("covariance for family {family:?} is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { family: String, min_eig: f64 },

    /// Correlation matrix input that is not symmetric with a unit diagonal.
    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),

    /// Estimator correlation at |rho| = 1; mixture weights are undefined there.
    #[error("degenerate estimator correlation (|rho| = 1)")]
    DegenerateCorrelation,

    /// Invalid simulation truth or design description.
    #[error("invalid truth spec: {0}")]
    InvalidTruth(String),

    /// TOML syntax error in a truth/design file.
    #[error("truth file: {0}")]
    TruthSyntax(#[from] Box<toml::de::Error>),

    /// Malformed thresholds table.
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),

    /// Out-of-range or contradictory run options.
    #[error("invalid options: {0}")]
    InvalidOptions(String),

    /// A requested test cannot be formed from the data.
    #[error("test unavailable: {0}")]
    TestUnavailable(String),

    /// Any other numerical breakdown.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True when the failure indicates a numerical breakdown rather than bad
    /// input; command-line tools map this to a distinct exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularCovariance { .. }
                | Error::NotPsd { .. }
                | Error::DegenerateCorrelation
                | Error::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
