//! Mixture chi-square null for the overall QTL test.
//!
//! With three variance components tested against the boundary of the
//! nonnegative orthant, the likelihood ratio is asymptotically a mixture of
//! chi-squares with 0 to 3 degrees of freedom. The mixture weights are
//! orthant probabilities of the trivariate normal with the estimators'
//! correlation matrix, which reduce to closed forms in arccosines of the
//! plain and partial correlations.

use crate::error::{Error, Result};
use crate::vc::{ModelFit, VarComponent};
use nalgebra::{DMatrix, Matrix3};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::PI;

/// Clip correlations this far inside ±1 before arccosines; keeps weights
/// finite at near-singular information matrices.
const RHO_CLIP: f64 = 1.0 - 1e-8;

/// Mixture proportions for the chi-square components with 0..3 degrees of
/// freedom. Satisfies w1 + w3 = w0 + w2 = 1/2 by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureWeights {
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

pub(crate) fn chi_sf(df: f64, x: f64) -> f64 {
    ChiSquared::new(df).expect("positive degrees of freedom").sf(x)
}

/// Mixture weights from the 3x3 correlation matrix of the tested variance
/// estimators.
pub fn mixture_weights(corr: &Matrix3<f64>) -> Result<MixtureWeights> {
    for a in 0..3 {
        if (corr[(a, a)] - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidCorrelation(format!(
                "diagonal entry {} is {}, expected 1",
                a,
                corr[(a, a)]
            )));
        }
        for b in (a + 1)..3 {
            if (corr[(a, b)] - corr[(b, a)]).abs() > 1e-9 {
                return Err(Error::InvalidCorrelation("matrix not symmetric".into()));
            }
            if corr[(a, b)].abs() > 1.0 + 1e-12 {
                return Err(Error::InvalidCorrelation(format!(
                    "entry ({a},{b}) = {} outside [-1, 1]",
                    corr[(a, b)]
                )));
            }
        }
    }
    let min_eig = corr
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &e| m.min(e));
    if min_eig < -1e-9 {
        return Err(Error::InvalidCorrelation(format!(
            "matrix not positive semidefinite (min eigenvalue {min_eig:e})"
        )));
    }

    // Each unordered pair once, with the excluded index for the partial.
    let pairs = [(0, 1, 2), (0, 2, 1), (1, 2, 0)];
    let mut acos_plain = 0.0;
    let mut acos_partial = 0.0;
    for (a, b, c) in pairs {
        let rab = corr[(a, b)].clamp(-1.0, 1.0);
        let rac = corr[(a, c)].clamp(-1.0, 1.0);
        let rbc = corr[(b, c)].clamp(-1.0, 1.0);
        acos_plain += rab.acos();
        let da = 1.0 - rac * rac;
        let db = 1.0 - rbc * rbc;
        if da <= 0.0 || db <= 0.0 {
            return Err(Error::DegenerateCorrelation);
        }
        let partial = ((rab - rac * rbc) / (da * db).sqrt()).clamp(-1.0, 1.0);
        acos_partial += partial.acos();
    }
    // The complementary pairs are defined through each other so their sums
    // are exactly 1/2; clamping keeps all weights in [0, 1/2] when the input
    // is barely PSD.
    let w1 = (acos_plain / (4.0 * PI)).clamp(0.0, 0.5);
    let w2 = ((3.0 * PI - acos_partial) / (4.0 * PI)).clamp(0.0, 0.5);
    Ok(MixtureWeights {
        w0: 0.5 - w2,
        w1,
        w2,
        w3: 0.5 - w1,
    })
}

/// Upper-tail probability of the mixture at `lr`; the zero-df mass
/// contributes only at lr = 0.
pub fn mixture_pvalue(lr: f64, w: &MixtureWeights) -> f64 {
    if lr <= 0.0 {
        return 1.0;
    }
    let p = w.w1 * chi_sf(1.0, lr) + w.w2 * chi_sf(2.0, lr) + w.w3 * chi_sf(3.0, lr);
    p.clamp(0.0, 1.0)
}

/// Correlation matrix of the (maternal, paternal, cross-parent) variance
/// estimators: the matching block of the inverse Fisher information of the
/// full fit, normalized to correlations and clipped inside ±1.
pub fn estimator_correlations(fit: &ModelFit) -> Result<Matrix3<f64>> {
    let needed = [
        VarComponent::Maternal,
        VarComponent::Paternal,
        VarComponent::CrossParent,
    ];
    let mut idx = [0usize; 3];
    for (slot, c) in idx.iter_mut().zip(needed) {
        *slot = fit.spec.index_of(c).ok_or_else(|| {
            Error::TestUnavailable(format!(
                "mixture null needs component {c:?} in the fitted model"
            ))
        })?;
    }
    let inv = invert_information(&fit.fisher_info)?;
    let mut corr = Matrix3::zeros();
    for (r, &a) in idx.iter().enumerate() {
        let va = inv[(a, a)];
        if !(va > 0.0) {
            return Err(Error::Numerical(format!(
                "nonpositive estimator variance for component {r}"
            )));
        }
        for (c, &b) in idx.iter().enumerate() {
            corr[(r, c)] = inv[(a, b)];
        }
    }
    for a in 0..3 {
        for b in 0..3 {
            if a != b {
                let rho = corr[(a, b)] / (corr[(a, a)] * corr[(b, b)]).sqrt();
                corr[(a, b)] = rho.clamp(-RHO_CLIP, RHO_CLIP);
            }
        }
    }
    for a in 0..3 {
        corr[(a, a)] = 1.0;
        for b in (a + 1)..3 {
            let rho = 0.5 * (corr[(a, b)] + corr[(b, a)]);
            corr[(a, b)] = rho;
            corr[(b, a)] = rho;
        }
    }
    Ok(corr)
}

/// Inverts the (symmetric PSD) information matrix, tolerating boundary
/// singularity with an escalating ridge.
fn invert_information(info: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = nalgebra::Cholesky::new(info.clone()) {
        return Ok(ch.inverse());
    }
    let scale = 1.0 + info.diagonal().amax();
    let mut ridge = 1e-12 * scale;
    for _ in 0..10 {
        let mut damped = info.clone();
        for d in 0..damped.nrows() {
            damped[(d, d)] += ridge;
        }
        if let Some(ch) = nalgebra::Cholesky::new(damped) {
            return Ok(ch.inverse());
        }
        ridge *= 10.0;
    }
    Err(Error::Numerical(
        "information matrix could not be inverted".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform_corr(rho: f64) -> Matrix3<f64> {
        Matrix3::from_fn(|a, b| if a == b { 1.0 } else { rho })
    }

    #[test]
    fn independent_estimators_give_binomial_weights() {
        let w = mixture_weights(&uniform_corr(0.0)).unwrap();
        assert_relative_eq!(w.w0, 0.125, max_relative = 1e-12);
        assert_relative_eq!(w.w1, 0.375, max_relative = 1e-12);
        assert_relative_eq!(w.w2, 0.375, max_relative = 1e-12);
        assert_relative_eq!(w.w3, 0.125, max_relative = 1e-12);
    }

    #[test]
    fn equicorrelated_estimators_match_the_closed_form() {
        let w = mixture_weights(&uniform_corr(0.5)).unwrap();
        assert_relative_eq!(w.w1, 0.25, max_relative = 1e-12);
        assert_relative_eq!(w.w3, 0.25, max_relative = 1e-12);
        // Partial correlations are exactly 1/3 here.
        assert_relative_eq!(w.w2, 0.45613008597704455, max_relative = 1e-12);
        assert_relative_eq!(w.w0, 0.04386991402295545, max_relative = 1e-10);
    }

    #[test]
    fn complementary_weights_sum_to_half_exactly() {
        for rho in [-0.45, -0.2, 0.0, 0.3, 0.7, 0.95] {
            let w = mixture_weights(&uniform_corr(rho)).unwrap();
            assert_eq!(w.w1 + w.w3, 0.5);
            assert_eq!(w.w0 + w.w2, 0.5);
            for v in [w.w0, w.w1, w.w2, w.w3] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        // Not symmetric.
        let mut m = uniform_corr(0.2);
        m[(0, 1)] = 0.3;
        assert!(mixture_weights(&m).is_err());
        // Not PSD: pairwise correlations that cannot coexist.
        assert!(mixture_weights(&uniform_corr(-0.9)).is_err());
        // Unit correlation degenerates a partial denominator.
        let mut m = Matrix3::identity();
        m[(0, 1)] = 1.0;
        m[(1, 0)] = 1.0;
        assert!(matches!(
            mixture_weights(&m),
            Err(Error::DegenerateCorrelation)
        ));
    }

    #[test]
    fn pvalue_tracks_the_mixture_tail() {
        let w = mixture_weights(&uniform_corr(0.0)).unwrap();
        assert_eq!(mixture_pvalue(0.0, &w), 1.0);
        assert_eq!(mixture_pvalue(-3.0, &w), 1.0);
        assert_relative_eq!(
            mixture_pvalue(7.045, &w),
            0.022862481379493881,
            max_relative = 1e-12
        );
        assert!(mixture_pvalue(5.0, &w) > mixture_pvalue(6.0, &w));
        assert!(mixture_pvalue(80.0, &w) < 1e-12);
    }
}
