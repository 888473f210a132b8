//! Hypothesis tests over fitted variance models: the overall QTL test with
//! its mixture chi-square null, imprinting tests, the maternal-effect test
//! and permutation-based thresholds.

mod battery;
mod mixture;
mod permute;

pub use battery::{
    classify_imprinting, complete_imprinting_test, imprinting_test, maternal_effect_test,
    qtl_test, run_battery, ImprintingBattery, ImprintingCall, ParentOrigin,
};
pub use mixture::{estimator_correlations, mixture_pvalue, mixture_weights, MixtureWeights};
pub use permute::{
    permutation_thresholds, permuted_dataset, quantile_index, replicate_rng, Thresholds,
};

/// Null distribution attached to a test statistic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NullKind {
    /// Mixture of chi-squares with 0..3 degrees of freedom (overall QTL
    /// test at a variance boundary).
    Mixture3,
    /// Plain 1-df chi-square (imprinting test).
    ChiSquare1,
    /// Half point mass at zero, half 1-df chi-square (one component pinned
    /// at its boundary).
    HalfHalf,
    /// Plain chi-square for a fixed-effect contrast with the given degrees
    /// of freedom.
    FixedEffects { df: usize },
}

/// Outcome of one likelihood-ratio (or fixed-effect contrast) test.
#[derive(Clone, Copy, Debug)]
pub struct TestResult {
    /// Nonnegative test statistic (likelihood ratios are clamped at zero).
    pub statistic: f64,
    /// Omitted when the underlying fits are unreliable.
    pub p_value: Option<f64>,
    pub null_kind: NullKind,
    /// Mixture weights used, for `NullKind::Mixture3` only.
    pub weights: Option<MixtureWeights>,
    /// Both contributing fits converged and the null could be evaluated.
    pub reliable: bool,
    /// A parental variance sits at the zero boundary, where the stated
    /// asymptotics of the imprinting test are doubtful.
    pub boundary_adjacent: bool,
}
