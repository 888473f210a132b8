//! Simulation of reciprocal-backcross endosperm studies under a known
//! generating model, plus the power and design-comparison harness.

mod generate;
mod study;
mod truth;

pub use generate::{
    simulate, simulate_genotypes, simulate_phenotypes, SimulatedGenotypes, SIMULATED_TRAIT,
};
pub use study::{run_study, DesignSummary, StudyOptions, StudyReport};
pub use truth::{DesignSpec, QtlTruth, StudyPlan, TruthSpec};
