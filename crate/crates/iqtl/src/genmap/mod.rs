//! Genetic map and dataset model: parsing, validation, map-distance
//! arithmetic, and the canonical encoding of reciprocal backcross genotypes.

mod cross;
mod dataset;
mod map;

pub use cross::{CrossType, FounderLine, MarkerCode, MaternalClass, TriploidGenotype};
pub use dataset::{Family, FamilyDataset, Individual};
pub use map::{haldane_recomb, Chromosome, LinkageMap, MarkerLocus};
