//! Variance-component model over family blocks: covariance assembly from the
//! IBD matrices, restricted-likelihood evaluation and the Fisher-scoring
//! fitter.

mod reml;

pub use reml::{
    fit_reml, fit_reml_warm, gls_quadratic, reml_loglik, score_and_information, FitOptions,
    ModelFit,
};

use crate::error::{Error, Result};
use crate::genmap::MaternalClass;
use crate::ibd::IbdMatrices;
use nalgebra::{DMatrix, DVector};

/// One variance source in the mixed model. Each maps to a per-family
/// coefficient matrix; the model covariance is the omega-weighted sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarComponent {
    /// Maternal QTL allele variance (coefficient Pi_m).
    Maternal,
    /// Paternal QTL allele variance (coefficient Pi_f).
    Paternal,
    /// Cross-parent QTL sharing variance (coefficient Pi_mf).
    CrossParent,
    /// Maternal and paternal variances tied equal (coefficient Pi_m + Pi_f);
    /// used by no-imprinting null models.
    ParentShared,
    /// Polygenic background variance (coefficient Phi).
    Polygenic,
    /// Background QTL absorbed at the marker next to the left flank
    /// (coefficient: total expected IBD there).
    LeftFlank,
    /// As `LeftFlank`, on the right side.
    RightFlank,
    /// Residual variance (coefficient I).
    Residual,
}

impl VarComponent {
    /// Smallest admissible value: residual variance is kept off zero so the
    /// covariance stays invertible.
    pub fn lower_bound(self) -> f64 {
        match self {
            VarComponent::Residual => 1e-10,
            _ => 0.0,
        }
    }
}

/// Fixed-effect structure of the family means.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeanStructure {
    /// One mean per occupied maternal genotype class.
    ClassMeans,
    /// A single grand mean; the no-maternal-effect null.
    CommonMean,
}

/// A variance model: which components are free, plus the mean structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSpec {
    components: Vec<VarComponent>,
    pub mean: MeanStructure,
}

impl ModelSpec {
    /// Builds a spec, rejecting duplicates and specs without a residual term.
    pub fn new(components: Vec<VarComponent>, mean: MeanStructure) -> Result<ModelSpec> {
        for (i, c) in components.iter().enumerate() {
            if components[..i].contains(c) {
                return Err(Error::DimensionMismatch(format!(
                    "variance component {c:?} listed twice"
                )));
            }
        }
        if !components.contains(&VarComponent::Residual) {
            return Err(Error::DimensionMismatch(
                "model must include a residual component".into(),
            ));
        }
        let shared = components.contains(&VarComponent::ParentShared);
        if shared
            && (components.contains(&VarComponent::Maternal)
                || components.contains(&VarComponent::Paternal))
        {
            return Err(Error::DimensionMismatch(
                "tied parental component excludes separate parental components".into(),
            ));
        }
        Ok(ModelSpec { components, mean })
    }

    /// Full QTL model: three parent-specific components plus background.
    pub fn full() -> ModelSpec {
        ModelSpec::new(
            vec![
                VarComponent::Maternal,
                VarComponent::Paternal,
                VarComponent::CrossParent,
                VarComponent::Polygenic,
                VarComponent::Residual,
            ],
            MeanStructure::ClassMeans,
        )
        .expect("valid by construction")
    }

    /// No-QTL null: background only.
    pub fn null() -> ModelSpec {
        ModelSpec::new(
            vec![VarComponent::Polygenic, VarComponent::Residual],
            MeanStructure::ClassMeans,
        )
        .expect("valid by construction")
    }

    /// Adds the flanking-QTL absorbers present at a scan interval.
    pub fn with_flanks(mut self, left: bool, right: bool) -> ModelSpec {
        let at = self
            .components
            .iter()
            .position(|c| *c == VarComponent::Residual)
            .expect("specs always carry a residual");
        if right {
            self.components.insert(at, VarComponent::RightFlank);
        }
        if left {
            self.components.insert(at, VarComponent::LeftFlank);
        }
        self
    }

    /// Drops one component, e.g. to form a nested null.
    pub fn without(&self, component: VarComponent) -> Result<ModelSpec> {
        let components: Vec<VarComponent> = self
            .components
            .iter()
            .copied()
            .filter(|c| *c != component)
            .collect();
        if components.len() == self.components.len() {
            return Err(Error::TestUnavailable(format!(
                "component {component:?} not in the model"
            )));
        }
        ModelSpec::new(components, self.mean)
    }

    /// Replaces the separate parental components with the tied component.
    pub fn tie_parents(&self) -> Result<ModelSpec> {
        if self.index_of(VarComponent::Maternal).is_none()
            || self.index_of(VarComponent::Paternal).is_none()
        {
            return Err(Error::TestUnavailable(
                "tying parental variances requires both separate components".into(),
            ));
        }
        let mut components = Vec::with_capacity(self.components.len() - 1);
        for &c in &self.components {
            match c {
                VarComponent::Maternal => components.push(VarComponent::ParentShared),
                VarComponent::Paternal => {}
                other => components.push(other),
            }
        }
        ModelSpec::new(components, self.mean)
    }

    pub fn with_mean(mut self, mean: MeanStructure) -> ModelSpec {
        self.mean = mean;
        self
    }

    pub fn components(&self) -> &[VarComponent] {
        &self.components
    }

    pub fn index_of(&self, component: VarComponent) -> Option<usize> {
        self.components.iter().position(|c| *c == component)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Per-component values from named components, in spec order.
    pub fn omega_from_named(&self, vc: &VarianceComponents) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| match c {
                VarComponent::Maternal => vc.sigma_m2,
                VarComponent::Paternal => vc.sigma_f2,
                VarComponent::CrossParent => vc.sigma_mf2,
                VarComponent::ParentShared => 0.5 * (vc.sigma_m2 + vc.sigma_f2),
                VarComponent::Polygenic => vc.sigma_g2,
                VarComponent::LeftFlank => vc.sigma_l2.unwrap_or(0.0),
                VarComponent::RightFlank => vc.sigma_r2.unwrap_or(0.0),
                VarComponent::Residual => vc.sigma_e2,
            })
            .collect()
    }

    /// Named components from per-component values; absent components read 0,
    /// flank components read `None` when not in the model.
    pub fn named_from_omega(&self, omega: &[f64]) -> VarianceComponents {
        let get = |c| self.index_of(c).map(|i| omega[i]);
        let shared = get(VarComponent::ParentShared);
        VarianceComponents {
            sigma_m2: shared.or(get(VarComponent::Maternal)).unwrap_or(0.0),
            sigma_f2: shared.or(get(VarComponent::Paternal)).unwrap_or(0.0),
            sigma_mf2: get(VarComponent::CrossParent).unwrap_or(0.0),
            sigma_g2: get(VarComponent::Polygenic).unwrap_or(0.0),
            sigma_e2: get(VarComponent::Residual).unwrap_or(0.0),
            sigma_l2: get(VarComponent::LeftFlank),
            sigma_r2: get(VarComponent::RightFlank),
        }
    }
}

/// Named variance components on the trait scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceComponents {
    pub sigma_m2: f64,
    pub sigma_f2: f64,
    pub sigma_mf2: f64,
    pub sigma_g2: f64,
    pub sigma_e2: f64,
    /// Flanking-QTL absorber variances, present only in multi-QTL fits.
    pub sigma_l2: Option<f64>,
    pub sigma_r2: Option<f64>,
}

impl VarianceComponents {
    pub fn zero_genetic(sigma_e2: f64) -> VarianceComponents {
        VarianceComponents {
            sigma_m2: 0.0,
            sigma_f2: 0.0,
            sigma_mf2: 0.0,
            sigma_g2: 0.0,
            sigma_e2,
            sigma_l2: None,
            sigma_r2: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("sigma_m2", self.sigma_m2),
            ("sigma_f2", self.sigma_f2),
            ("sigma_mf2", self.sigma_mf2),
            ("sigma_g2", self.sigma_g2),
            ("sigma_e2", self.sigma_e2),
            ("sigma_L2", self.sigma_l2.unwrap_or(0.0)),
            ("sigma_R2", self.sigma_r2.unwrap_or(0.0)),
        ];
        for (name, value) in named {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidTruth(format!(
                    "{name} must be finite and nonnegative, got {value}"
                )));
            }
        }
        if self.sigma_e2 <= 0.0 {
            return Err(Error::InvalidTruth(
                "sigma_e2 must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Fitted maternal-class means; `None` for classes with no observations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedEffects {
    pub mu: [Option<f64>; 3],
}

impl FixedEffects {
    pub fn get(&self, class: MaternalClass) -> Option<f64> {
        self.mu[class.index()]
    }
}

/// Per-family inputs to a fit at one test position: phenotypes plus the
/// coefficient matrices of every possible component.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyData {
    pub id: String,
    pub class: MaternalClass,
    pub y: DVector<f64>,
    pub ibd: IbdMatrices,
    /// Total expected IBD at the marker next to the scan interval's left
    /// flank; absent at chromosome-end intervals.
    pub left: Option<DMatrix<f64>>,
    pub right: Option<DMatrix<f64>>,
}

impl FamilyData {
    pub fn new(
        id: String,
        class: MaternalClass,
        y: DVector<f64>,
        ibd: IbdMatrices,
    ) -> Result<FamilyData> {
        let n = y.len();
        for m in [&ibd.pi_m, &ibd.pi_mf, &ibd.pi_f, &ibd.phi] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "family {id:?}: IBD matrix is {}x{} for {n} phenotypes",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(FamilyData {
            id,
            class,
            y,
            ibd,
            left: None,
            right: None,
        })
    }

    pub fn with_flank_matrices(
        mut self,
        left: Option<DMatrix<f64>>,
        right: Option<DMatrix<f64>>,
    ) -> Result<FamilyData> {
        let n = self.y.len();
        for m in [&left, &right].into_iter().flatten() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "family {:?}: flank matrix is {}x{} for {n} phenotypes",
                    self.id,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        self.left = left;
        self.right = right;
        Ok(self)
    }

    pub fn size(&self) -> usize {
        self.y.len()
    }

    /// Coefficient matrix of one component for this family.
    pub fn component_matrix(&self, component: VarComponent) -> Result<DMatrix<f64>> {
        let n = self.size();
        Ok(match component {
            VarComponent::Maternal => self.ibd.pi_m.clone(),
            VarComponent::Paternal => self.ibd.pi_f.clone(),
            VarComponent::CrossParent => self.ibd.pi_mf.clone(),
            VarComponent::ParentShared => &self.ibd.pi_m + &self.ibd.pi_f,
            VarComponent::Polygenic => self.ibd.phi.clone(),
            VarComponent::Residual => DMatrix::identity(n, n),
            VarComponent::LeftFlank => self
                .left
                .clone()
                .ok_or_else(|| flank_missing(&self.id, "left"))?,
            VarComponent::RightFlank => self
                .right
                .clone()
                .ok_or_else(|| flank_missing(&self.id, "right"))?,
        })
    }
}

fn flank_missing(id: &str, side: &str) -> Error {
    Error::TestUnavailable(format!(
        "model includes the {side}-flank component but family {id:?} carries no {side}-flank \
         matrix"
    ))
}

/// Family phenotypic covariance for named components: the omega-weighted sum
/// of the coefficient matrices.
pub fn assemble_sigma(data: &FamilyData, omega: &VarianceComponents) -> Result<DMatrix<f64>> {
    let n = data.size();
    let mut sigma = DMatrix::identity(n, n) * omega.sigma_e2;
    sigma += &data.ibd.pi_m * omega.sigma_m2;
    sigma += &data.ibd.pi_mf * omega.sigma_mf2;
    sigma += &data.ibd.pi_f * omega.sigma_f2;
    sigma += &data.ibd.phi * omega.sigma_g2;
    for (value, side) in [(omega.sigma_l2, "left"), (omega.sigma_r2, "right")] {
        if let Some(v) = value {
            let m = match side {
                "left" => data.left.as_ref(),
                _ => data.right.as_ref(),
            };
            sigma += m.ok_or_else(|| flank_missing(&data.id, side))? * v;
        }
    }
    Ok(sigma)
}
