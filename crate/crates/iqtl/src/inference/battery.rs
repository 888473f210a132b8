//! Likelihood-ratio tests layered over fitted variance models: the overall
//! QTL test, the parental-asymmetry (imprinting) tests and the maternal
//! mean-effect test, plus the combined battery run at a called peak.

use super::mixture::{chi_sf, estimator_correlations, mixture_pvalue, mixture_weights};
use super::{NullKind, TestResult};
use crate::error::{Error, Result};
use crate::vc::{
    fit_reml_warm, gls_quadratic, FamilyData, FitOptions, MeanStructure, ModelFit, VarComponent,
};

/// Which parental variance a complete-imprinting null pins at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParentOrigin {
    Maternal,
    Paternal,
}

impl ParentOrigin {
    pub fn component(self) -> VarComponent {
        match self {
            ParentOrigin::Maternal => VarComponent::Maternal,
            ParentOrigin::Paternal => VarComponent::Paternal,
        }
    }
}

/// Imprinting category assigned to a significant QTL.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImprintingCall {
    NotImprinted,
    CompleteMaternal,
    CompletePaternal,
    Partial,
}

impl ImprintingCall {
    pub fn label(self) -> &'static str {
        match self {
            ImprintingCall::NotImprinted => "none",
            ImprintingCall::CompleteMaternal => "complete_maternal",
            ImprintingCall::CompletePaternal => "complete_paternal",
            ImprintingCall::Partial => "partial",
        }
    }
}

/// All imprinting-related results at one position, with the combined call.
#[derive(Clone, Debug)]
pub struct ImprintingBattery {
    /// Parental variances equal vs free.
    pub imprinting: TestResult,
    /// Maternal variance pinned at zero; run only when `imprinting` rejects.
    pub maternal_zero: Option<TestResult>,
    /// Paternal variance pinned at zero; run only when `imprinting` rejects.
    pub paternal_zero: Option<TestResult>,
    /// Maternal-class mean differences; absent with fewer than two observed
    /// classes.
    pub mean_effect: Option<TestResult>,
    pub call: ImprintingCall,
}

fn lr_stat(full: &ModelFit, null: &ModelFit) -> f64 {
    (2.0 * (full.reml_loglik - null.reml_loglik)).max(0.0)
}

/// Overall QTL test: all three parent-specific variances zero under the
/// null. The boundary null is the mixture chi-square with weights from the
/// full fit's estimator correlations.
pub fn qtl_test(full: &ModelFit, null: &ModelFit) -> TestResult {
    let statistic = lr_stat(full, null);
    let weights = estimator_correlations(full)
        .and_then(|corr| mixture_weights(&corr))
        .ok();
    let reliable = full.converged && null.converged && weights.is_some();
    let p_value = match (reliable, &weights) {
        (true, Some(w)) => Some(mixture_pvalue(statistic, w)),
        _ => None,
    };
    TestResult {
        statistic,
        p_value,
        null_kind: NullKind::Mixture3,
        weights,
        reliable,
        boundary_adjacent: false,
    }
}

/// Imprinting test: maternal and paternal variances tied equal under the
/// null, referred to a 1-df chi-square. The interior-parameter asymptotics
/// are doubtful when either parental estimate sits at zero, so such results
/// are flagged boundary-adjacent.
pub fn imprinting_test(full: &ModelFit, equal: &ModelFit) -> TestResult {
    debug_assert!(equal.spec.index_of(VarComponent::ParentShared).is_some());
    let statistic = lr_stat(full, equal);
    let reliable = full.converged && equal.converged;
    let p_value = reliable.then(|| chi_sf(1.0, statistic));
    TestResult {
        statistic,
        p_value,
        null_kind: NullKind::ChiSquare1,
        weights: None,
        reliable,
        boundary_adjacent: full.omega.sigma_m2 <= 0.0 || full.omega.sigma_f2 <= 0.0,
    }
}

/// Complete-imprinting test: one parental variance pinned at zero under the
/// null. The pinned parameter sits on the boundary, so the null is the
/// half-half mixture of a point mass and a 1-df chi-square.
pub fn complete_imprinting_test(
    full: &ModelFit,
    pinned: &ModelFit,
    which: ParentOrigin,
) -> TestResult {
    debug_assert!(full.spec.index_of(which.component()).is_some());
    debug_assert!(pinned.spec.index_of(which.component()).is_none());
    let statistic = lr_stat(full, pinned);
    let reliable = full.converged && pinned.converged;
    let p_value = reliable.then(|| {
        if statistic <= 0.0 {
            1.0
        } else {
            0.5 * chi_sf(1.0, statistic)
        }
    });
    TestResult {
        statistic,
        p_value,
        null_kind: NullKind::HalfHalf,
        weights: None,
        reliable,
        boundary_adjacent: false,
    }
}

/// Maternal-effect test: equal class means against free class means. The
/// statistic is the drop in the GLS residual quadratic under the full fit's
/// covariance, referred to a chi-square with (observed classes - 1) degrees
/// of freedom. Restricted likelihoods with different mean designs are not
/// comparable, which rules out a plain REML likelihood ratio here.
pub fn maternal_effect_test(
    data: &[FamilyData],
    full: &ModelFit,
    equal_means: &ModelFit,
) -> Result<TestResult> {
    debug_assert_eq!(equal_means.spec.mean, MeanStructure::CommonMean);
    let classes = full.occupied.len();
    if classes < 2 {
        return Err(Error::TestUnavailable(
            "maternal-effect test needs at least two observed maternal classes".into(),
        ));
    }
    let q_equal = gls_quadratic(data, &full.spec, &full.omega_raw, MeanStructure::CommonMean)?;
    let q_class = gls_quadratic(data, &full.spec, &full.omega_raw, MeanStructure::ClassMeans)?;
    let statistic = (q_equal - q_class).max(0.0);
    let df = classes - 1;
    let reliable = full.converged && equal_means.converged;
    let p_value = reliable.then(|| chi_sf(df as f64, statistic));
    Ok(TestResult {
        statistic,
        p_value,
        null_kind: NullKind::FixedEffects { df },
        weights: None,
        reliable,
        boundary_adjacent: false,
    })
}

/// Combines the imprinting evidence into a category. Follow-up tests only
/// speak when the asymmetry test rejects; the smaller parental estimate
/// picks which complete-imprinting hypothesis is entertained, and failing
/// to reject it upgrades partial to complete.
pub fn classify_imprinting(
    sigma_m2: f64,
    sigma_f2: f64,
    p_imprinting: Option<f64>,
    p_maternal_zero: Option<f64>,
    p_paternal_zero: Option<f64>,
    alpha: f64,
) -> ImprintingCall {
    match p_imprinting {
        Some(p) if p < alpha => {}
        _ => return ImprintingCall::NotImprinted,
    }
    if sigma_m2 <= sigma_f2 {
        match p_maternal_zero {
            Some(p) if p >= alpha => ImprintingCall::CompleteMaternal,
            _ => ImprintingCall::Partial,
        }
    } else {
        match p_paternal_zero {
            Some(p) if p >= alpha => ImprintingCall::CompletePaternal,
            _ => ImprintingCall::Partial,
        }
    }
}

/// Runs the imprinting battery around an already-fitted full model. Nested
/// nulls are refitted warm-started from the full optimum; the complete
/// -imprinting follow-ups run only when the asymmetry test rejects at
/// `alpha`.
pub fn run_battery(
    data: &[FamilyData],
    full: &ModelFit,
    opts: &FitOptions,
    alpha: f64,
) -> Result<ImprintingBattery> {
    let warm = &full.omega;
    let equal = fit_reml_warm(data, &full.spec.tie_parents()?, opts, warm)?;
    let imprinting = imprinting_test(full, &equal);
    let follow_up = imprinting.p_value.is_some_and(|p| p < alpha);

    let mut maternal_zero = None;
    let mut paternal_zero = None;
    if follow_up {
        let no_m = fit_reml_warm(data, &full.spec.without(VarComponent::Maternal)?, opts, warm)?;
        maternal_zero = Some(complete_imprinting_test(full, &no_m, ParentOrigin::Maternal));
        let no_f = fit_reml_warm(data, &full.spec.without(VarComponent::Paternal)?, opts, warm)?;
        paternal_zero = Some(complete_imprinting_test(full, &no_f, ParentOrigin::Paternal));
    }

    let equal_means_spec = full.spec.clone().with_mean(MeanStructure::CommonMean);
    let equal_means = fit_reml_warm(data, &equal_means_spec, opts, warm)?;
    let mean_effect = match maternal_effect_test(data, full, &equal_means) {
        Ok(t) => Some(t),
        Err(Error::TestUnavailable(_)) => None,
        Err(e) => return Err(e),
    };

    let call = classify_imprinting(
        full.omega.sigma_m2,
        full.omega.sigma_f2,
        imprinting.p_value,
        maternal_zero.as_ref().and_then(|t| t.p_value),
        paternal_zero.as_ref().and_then(|t| t.p_value),
        alpha,
    );
    Ok(ImprintingBattery {
        imprinting,
        maternal_zero,
        paternal_zero,
        mean_effect,
        call,
    })
}
