//! Variance-components mapping of imprinted quantitative trait loci (iQTL) in
//! triploid endosperm from reciprocal backcross families.
//!
//! The pipeline, module by module:
//!
//! * [`genmap`] parses the linkage map and the family genotype/phenotype data
//!   and defines the canonical encoding of backcross endosperm genotypes.
//! * [`ibd`] computes parent-specific identity-by-descent sharing: exact
//!   marker-level decompositions, conditional expectations at arbitrary scan
//!   positions, and the per-family component matrices.
//! * [`vc`] assembles the phenotypic covariance from those matrices and fits
//!   the variance components by restricted maximum likelihood (REML) with
//!   Fisher scoring under nonnegativity constraints.
//! * [`inference`] holds the hypothesis-test battery: the overall QTL test with
//!   its boundary mixture chi-square null, imprinting tests, the maternal-mean
//!   test, and permutation thresholds.
//! * [`scan`] runs single- and multiple-QTL genome scans and turns profiles
//!   into QTL calls.
//! * [`sim`] generates reciprocal backcross cohorts and phenotypes under a
//!   configurable truth and aggregates power studies.
//! * [`report`] defines the serialized output formats.

pub mod error;
pub mod genmap;
pub mod ibd;
pub mod inference;
pub mod report;
pub mod scan;
pub mod sim;
pub mod vc;

pub use error::{Error, Result};
