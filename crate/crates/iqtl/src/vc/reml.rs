//! Restricted-likelihood evaluation and the boundary-respecting
//! Fisher-scoring fitter.

use crate::error::{Error, Result};
use crate::genmap::MaternalClass;
use crate::vc::{
    FamilyData, FixedEffects, MeanStructure, ModelSpec, VarComponent, VarianceComponents,
};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use std::collections::BTreeSet;

/// Fisher-scoring controls. `tol` bounds the score sup-norm over free
/// components on the internal standardized scale.
#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

/// One restricted-likelihood fit.
#[derive(Clone, Debug)]
pub struct ModelFit {
    pub spec: ModelSpec,
    pub omega: VarianceComponents,
    /// Component estimates in `spec` order, trait scale.
    pub omega_raw: Vec<f64>,
    pub beta: FixedEffects,
    /// Maternal classes with observations, in class order; columns of the
    /// design correspond to these under class means.
    pub occupied: Vec<MaternalClass>,
    pub beta_raw: DVector<f64>,
    /// Restricted log-likelihood. The additive constant −(n−p)/2·ln(2π) is
    /// omitted; it cancels in every likelihood-ratio statistic.
    pub reml_loglik: f64,
    /// Expected information over the components in `spec` order, trait scale.
    pub fisher_info: DMatrix<f64>,
    /// Score sup-norm over free components at exit, standardized scale.
    pub score_norm_at_exit: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Set when a singular information matrix forced a ridge or gradient
    /// step at some iteration.
    pub ridge_used: bool,
}

/// Restricted log-likelihood of independent family blocks:
/// −½[Σ log|Σ_k| + log|ΣXᵀΣ⁻¹X| + yᵀPy], constant term omitted as above.
pub fn reml_loglik(
    ys: &[DVector<f64>],
    xs: &[DMatrix<f64>],
    sigmas: &[DMatrix<f64>],
) -> Result<f64> {
    let ids = index_ids(ys.len());
    check_block_shapes(ys, xs, sigmas.len())?;
    eval_core(&ids, ys, xs, sigmas.to_vec()).map(|c| c.loglik)
}

/// REML score and expected information over the variance components whose
/// per-family coefficient matrices are `vs[family][component]`.
pub fn score_and_information(
    ys: &[DVector<f64>],
    xs: &[DMatrix<f64>],
    sigmas: &[DMatrix<f64>],
    vs: &[Vec<DMatrix<f64>>],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let ids = index_ids(ys.len());
    check_block_shapes(ys, xs, sigmas.len())?;
    if vs.len() != ys.len() {
        return Err(Error::DimensionMismatch(
            "one coefficient-matrix list per family required".into(),
        ));
    }
    let m = vs.first().map_or(0, Vec::len);
    if vs.iter().any(|v| v.len() != m) {
        return Err(Error::DimensionMismatch(
            "families disagree on the number of variance components".into(),
        ));
    }
    let core = eval_core(&ids, ys, xs, sigmas.to_vec())?;
    Ok(eval_derivs(&core, &core.sx, vs))
}

/// Smallest achievable residual GLS quadratic Σ_k (y−Xβ)ᵀΣ_k⁻¹(y−Xβ) for a
/// fixed covariance (spec and per-component values) under the given mean
/// structure. Used to compare mean structures without refitting variances.
pub fn gls_quadratic(
    data: &[FamilyData],
    spec: &ModelSpec,
    omega_raw: &[f64],
    mean: MeanStructure,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::DimensionMismatch("no families".into()));
    }
    if omega_raw.len() != spec.len() {
        return Err(Error::DimensionMismatch(
            "one value per model component required".into(),
        ));
    }
    let ids: Vec<String> = data.iter().map(|d| d.id.clone()).collect();
    let ys: Vec<DVector<f64>> = data.iter().map(|d| d.y.clone()).collect();
    let occupied = occupied_classes(data);
    let xs = designs(data, &occupied, mean);
    let vs = coefficient_matrices(data, spec)?;
    let sigmas = assemble_all(&vs, omega_raw);
    eval_core(&ids, &ys, &xs, sigmas).map(|c| c.ypy)
}

/// Fits the model by Fisher scoring from the default starting point.
pub fn fit_reml(data: &[FamilyData], spec: &ModelSpec, opts: &FitOptions) -> Result<ModelFit> {
    fit_impl(data, spec, opts, None)
}

/// As [`fit_reml`], warm-started from named component values (trait scale).
pub fn fit_reml_warm(
    data: &[FamilyData],
    spec: &ModelSpec,
    opts: &FitOptions,
    init: &VarianceComponents,
) -> Result<ModelFit> {
    fit_impl(data, spec, opts, Some(spec.omega_from_named(init)))
}

fn index_ids(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("#{k}")).collect()
}

fn check_block_shapes(ys: &[DVector<f64>], xs: &[DMatrix<f64>], n_sigma: usize) -> Result<()> {
    if ys.is_empty() || ys.len() != xs.len() || ys.len() != n_sigma {
        return Err(Error::DimensionMismatch(
            "phenotype, design and covariance block counts must match and be nonzero".into(),
        ));
    }
    let p = xs[0].ncols();
    for (y, x) in ys.iter().zip(xs) {
        if x.nrows() != y.len() || x.ncols() != p {
            return Err(Error::DimensionMismatch(
                "design rows must match phenotypes and agree on columns".into(),
            ));
        }
    }
    Ok(())
}

/// Shared per-point state: factorizations, GLS solution and likelihood.
struct Core {
    loglik: f64,
    ypy: f64,
    chols: Vec<Cholesky<f64, Dyn>>,
    sres: Vec<DVector<f64>>,
    sx: Vec<DMatrix<f64>>,
    w_inv: DMatrix<f64>,
    beta: DVector<f64>,
}

fn eval_core(
    ids: &[String],
    ys: &[DVector<f64>],
    xs: &[DMatrix<f64>],
    sigmas: Vec<DMatrix<f64>>,
) -> Result<Core> {
    let p = xs[0].ncols();
    let mut logdet = 0.0;
    let mut w = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    let mut chols = Vec::with_capacity(ys.len());
    let mut sx_all = Vec::with_capacity(ys.len());
    for (k, sigma) in sigmas.into_iter().enumerate() {
        if sigma.nrows() != ys[k].len() || !sigma.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "covariance block for family {:?} is {}x{} for {} phenotypes",
                ids[k],
                sigma.nrows(),
                sigma.ncols(),
                ys[k].len()
            )));
        }
        let chol = Cholesky::new(sigma).ok_or_else(|| Error::SingularCovariance {
            family: ids[k].clone(),
        })?;
        logdet += chol
            .l()
            .diagonal()
            .iter()
            .map(|d| 2.0 * d.ln())
            .sum::<f64>();
        let sx = chol.solve(&xs[k]);
        let sy = chol.solve(&ys[k]);
        w += xs[k].transpose() * &sx;
        rhs += xs[k].transpose() * &sy;
        chols.push(chol);
        sx_all.push(sx);
    }
    let (beta, w_inv, logdet_w) = if p == 0 {
        (DVector::zeros(0), DMatrix::zeros(0, 0), 0.0)
    } else {
        let w_chol = Cholesky::new(w)
            .ok_or_else(|| Error::Numerical("singular generalized-least-squares system".into()))?;
        let logdet_w = w_chol
            .l()
            .diagonal()
            .iter()
            .map(|d| 2.0 * d.ln())
            .sum::<f64>();
        (w_chol.solve(&rhs), w_chol.inverse(), logdet_w)
    };
    let mut ypy = 0.0;
    let mut sres = Vec::with_capacity(ys.len());
    for (k, y) in ys.iter().enumerate() {
        let r = y - &xs[k] * &beta;
        let sr = chols[k].solve(&r);
        ypy += r.dot(&sr);
        sres.push(sr);
    }
    Ok(Core {
        loglik: -0.5 * (logdet + logdet_w + ypy),
        ypy,
        chols,
        sres,
        sx: sx_all,
        w_inv,
        beta,
    })
}

/// Score s_a = −½[tr(P V_a) − yᵀP V_a P y] and expected information
/// I_ab = ½ tr(P V_a P V_b), expanded into per-family block algebra so the
/// projected inverse P is never formed.
fn eval_derivs(
    core: &Core,
    sx_all: &[DMatrix<f64>],
    vs: &[Vec<DMatrix<f64>>],
) -> (DVector<f64>, DMatrix<f64>) {
    let m = vs.first().map_or(0, Vec::len);
    let p = core.beta.len();
    let mut tr_sv = vec![0.0; m];
    let mut quad = vec![0.0; m];
    let mut g = vec![DMatrix::zeros(p, p); m];
    let mut t1 = DMatrix::<f64>::zeros(m, m);
    let mut mab = vec![vec![DMatrix::<f64>::zeros(p, p); m]; m];
    for k in 0..vs.len() {
        let chol = &core.chols[k];
        let sx = &sx_all[k];
        let sres = &core.sres[k];
        let sv: Vec<DMatrix<f64>> = vs[k].iter().map(|v| chol.solve(v)).collect();
        let svt: Vec<DMatrix<f64>> = sv.iter().map(DMatrix::transpose).collect();
        let vsx: Vec<DMatrix<f64>> = vs[k].iter().map(|v| v * sx).collect();
        let wsx: Vec<DMatrix<f64>> = vsx.iter().map(|u| chol.solve(u)).collect();
        for a in 0..m {
            tr_sv[a] += sv[a].trace();
            quad[a] += sres.dot(&(&vs[k][a] * sres));
            g[a] += vsx[a].transpose() * sx;
            for b in 0..m {
                t1[(a, b)] += sv[a].dot(&svt[b]);
                mab[a][b] += vsx[a].transpose() * &wsx[b];
            }
        }
    }
    let c = &core.w_inv;
    let cg: Vec<DMatrix<f64>> = g.iter().map(|ga| c * ga).collect();
    let mut score = DVector::zeros(m);
    let mut info = DMatrix::zeros(m, m);
    for a in 0..m {
        let tr_pva = tr_sv[a] - cg[a].trace();
        score[a] = -0.5 * (tr_pva - quad[a]);
        for b in 0..m {
            let tr = t1[(a, b)] - (c * &mab[a][b]).trace() - (c * &mab[b][a]).trace()
                + (&cg[a] * &cg[b]).trace();
            info[(a, b)] = 0.5 * tr;
        }
    }
    let info = 0.5 * (&info + info.transpose());
    (score, info)
}

fn occupied_classes(data: &[FamilyData]) -> Vec<MaternalClass> {
    let present: BTreeSet<usize> = data.iter().map(|d| d.class.index()).collect();
    present
        .into_iter()
        .map(|i| MaternalClass::ALL[i])
        .collect()
}

fn designs(
    data: &[FamilyData],
    occupied: &[MaternalClass],
    mean: MeanStructure,
) -> Vec<DMatrix<f64>> {
    data.iter()
        .map(|d| {
            let n = d.size();
            match mean {
                MeanStructure::CommonMean => DMatrix::from_element(n, 1, 1.0),
                MeanStructure::ClassMeans => {
                    let col = occupied
                        .iter()
                        .position(|c| *c == d.class)
                        .expect("occupied classes cover all families");
                    DMatrix::from_fn(n, occupied.len(), |_, j| (j == col) as u8 as f64)
                }
            }
        })
        .collect()
}

fn coefficient_matrices(data: &[FamilyData], spec: &ModelSpec) -> Result<Vec<Vec<DMatrix<f64>>>> {
    data.iter()
        .map(|d| {
            spec.components()
                .iter()
                .map(|c| d.component_matrix(*c))
                .collect()
        })
        .collect()
}

fn assemble_all(vs: &[Vec<DMatrix<f64>>], omega: &[f64]) -> Vec<DMatrix<f64>> {
    vs.iter()
        .map(|family_vs| {
            let n = family_vs[0].nrows();
            let mut sigma = DMatrix::zeros(n, n);
            for (v, &w) in family_vs.iter().zip(omega) {
                if w != 0.0 {
                    sigma += v * w;
                }
            }
            sigma
        })
        .collect()
}

/// Pooled within-class phenotype variance; the internal standardization
/// scale. Falls back to 1 when degenerate so fitting still proceeds.
fn pooled_within_class_variance(data: &[FamilyData]) -> f64 {
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    for d in data {
        sums[d.class.index()] += d.y.sum();
        counts[d.class.index()] += d.size();
    }
    let mut ss = 0.0;
    let mut df = 0isize;
    for d in data {
        let c = d.class.index();
        let mean = sums[c] / counts[c] as f64;
        ss += d.y.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>();
    }
    let n: usize = counts.iter().sum();
    df += n as isize - counts.iter().filter(|&&c| c > 0).count() as isize;
    let s2 = ss / df.max(1) as f64;
    if df > 0 && s2.is_finite() && s2 > 0.0 {
        s2
    } else {
        1.0
    }
}

fn sup_free(omega: &[f64], bounds: &[f64], score: &DVector<f64>) -> f64 {
    let mut sup = 0.0f64;
    for a in 0..omega.len() {
        let at_bound = omega[a] <= bounds[a];
        if !at_bound || score[a] > 0.0 {
            sup = sup.max(score[a].abs());
        }
    }
    sup
}

fn solve_direction(info_ff: &DMatrix<f64>, score_f: &DVector<f64>) -> (DVector<f64>, bool) {
    if let Some(ch) = Cholesky::new(info_ff.clone()) {
        let d = ch.solve(score_f);
        if d.iter().all(|v| v.is_finite()) {
            return (d, false);
        }
    }
    let mean_diag = info_ff.diagonal().mean();
    let mut ridge = 1e-8
        * (1.0
            + if mean_diag.is_finite() {
                mean_diag.abs()
            } else {
                0.0
            });
    for _ in 0..10 {
        let mut damped = info_ff.clone();
        for d in 0..damped.nrows() {
            damped[(d, d)] += ridge;
        }
        if let Some(ch) = Cholesky::new(damped) {
            let d = ch.solve(score_f);
            if d.iter().all(|v| v.is_finite()) {
                return (d, true);
            }
        }
        ridge *= 10.0;
    }
    // Last resort: a scaled gradient step; the line search controls length.
    let scale = 1.0 / (1.0 + info_ff.diagonal().amax());
    (score_f * scale, true)
}

fn fit_impl(
    data: &[FamilyData],
    spec: &ModelSpec,
    opts: &FitOptions,
    warm: Option<Vec<f64>>,
) -> Result<ModelFit> {
    if data.is_empty() {
        return Err(Error::DimensionMismatch("no families to fit".into()));
    }
    let ids: Vec<String> = data.iter().map(|d| d.id.clone()).collect();
    let occupied = occupied_classes(data);
    let xs = designs(data, &occupied, spec.mean);
    let vs = coefficient_matrices(data, spec)?;
    let m = spec.len();
    let bounds: Vec<f64> = spec.components().iter().map(|c| c.lower_bound()).collect();

    // Standardize phenotypes so tolerances are scale-free; undone on output.
    let s2 = pooled_within_class_variance(data);
    let s = s2.sqrt();
    let ys: Vec<DVector<f64>> = data.iter().map(|d| &d.y / s).collect();
    let n: usize = data.iter().map(FamilyData::size).sum();
    let p = xs[0].ncols();

    // Starting points, most informed first; the all-diagonal fallback always
    // factorizes.
    let project = |mut omega: Vec<f64>| {
        for (w, b) in omega.iter_mut().zip(&bounds) {
            *w = w.max(*b);
        }
        omega
    };
    let default_init = {
        let mut omega = vec![0.5 / (m.max(2) - 1) as f64; m];
        omega[spec.index_of(VarComponent::Residual).expect("residual present")] = 0.5;
        omega
    };
    let diagonal_init = {
        let mut omega = vec![0.0; m];
        omega[spec.index_of(VarComponent::Residual).expect("residual present")] = 1.0;
        omega
    };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = warm {
        starts.push(project(w.iter().map(|v| v / s2).collect()));
    }
    starts.push(project(default_init));
    starts.push(diagonal_init);

    let mut chosen = None;
    let mut last_err = None;
    for omega in starts {
        match eval_core(&ids, &ys, &xs, assemble_all(&vs, &omega)) {
            Ok(core) if core.loglik.is_finite() => {
                chosen = Some((omega, core));
                break;
            }
            Ok(_) => last_err = Some(Error::Numerical("non-finite restricted likelihood".into())),
            Err(e) => last_err = Some(e),
        }
    }
    let (mut omega, mut core) =
        chosen.ok_or_else(|| last_err.expect("at least one start attempted"))?;
    let (mut score, mut info) = eval_derivs(&core, &core.sx, &vs);

    let mut converged = false;
    let mut iterations = 0;
    let mut ridge_used = false;
    let mut sup = sup_free(&omega, &bounds, &score);
    for it in 0..opts.max_iter {
        if sup < opts.tol {
            converged = true;
            iterations = it;
            break;
        }
        let free: Vec<usize> = (0..m)
            .filter(|&a| omega[a] > bounds[a] || score[a] > 0.0)
            .collect();
        let info_ff = DMatrix::from_fn(free.len(), free.len(), |r, c| info[(free[r], free[c])]);
        let score_f = DVector::from_fn(free.len(), |r, _| score[free[r]]);
        let (delta, ridged) = solve_direction(&info_ff, &score_f);
        ridge_used |= ridged;

        let mut accepted = None;
        for h in 0..=30 {
            let step = 0.5f64.powi(h);
            let mut cand = omega.clone();
            for (pos, &a) in free.iter().enumerate() {
                cand[a] = (omega[a] + step * delta[pos]).max(bounds[a]);
            }
            if cand == omega {
                break;
            }
            if let Ok(c) = eval_core(&ids, &ys, &xs, assemble_all(&vs, &cand)) {
                if c.loglik.is_finite()
                    && c.loglik >= core.loglik - 1e-12 * (1.0 + core.loglik.abs())
                {
                    accepted = Some((cand, c));
                    break;
                }
            }
        }
        let Some((new_omega, new_core)) = accepted else {
            iterations = it;
            break;
        };
        omega = new_omega;
        core = new_core;
        (score, info) = eval_derivs(&core, &core.sx, &vs);
        sup = sup_free(&omega, &bounds, &score);
        iterations = it + 1;
    }
    if !converged && sup < opts.tol {
        converged = true;
    }

    // Undo the standardization: variances scale by s², means by s, the
    // restricted likelihood shifts by its Jacobian term, information by s⁴.
    let omega_raw: Vec<f64> = omega.iter().map(|v| v * s2).collect();
    let beta_raw = &core.beta * s;
    let reml = core.loglik - 0.5 * (n as f64 - p as f64) * s2.ln();
    let fisher_info = &info / (s2 * s2);
    let mut mu = [None; 3];
    match spec.mean {
        MeanStructure::ClassMeans => {
            for (j, class) in occupied.iter().enumerate() {
                mu[class.index()] = Some(beta_raw[j]);
            }
        }
        MeanStructure::CommonMean => {
            for class in &occupied {
                mu[class.index()] = Some(beta_raw[0]);
            }
        }
    }
    Ok(ModelFit {
        spec: spec.clone(),
        omega: spec.named_from_omega(&omega_raw),
        omega_raw,
        beta: FixedEffects { mu },
        occupied,
        beta_raw,
        reml_loglik: reml,
        fisher_info,
        score_norm_at_exit: sup,
        converged,
        iterations,
        ridge_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmap::CrossType;
    use crate::ibd::matrices_from_probs;
    use approx::assert_relative_eq;

    fn family(id: &str, cross: CrossType, probs: &[f64], y: Vec<f64>) -> FamilyData {
        FamilyData::new(
            id.into(),
            cross.maternal_class(),
            DVector::from_vec(y),
            matrices_from_probs(cross, probs),
        )
        .unwrap()
    }

    fn three_class_data() -> Vec<FamilyData> {
        vec![
            family(
                "f1",
                CrossType::QQxQq,
                &[0.0, 1.0, 0.3, 0.9],
                vec![1.0, 2.0, 3.0, 6.0],
            ),
            family("f2", CrossType::QqxQQ, &[0.2, 0.8], vec![0.0, 4.0]),
            family("f3", CrossType::qqxQq, &[1.0], vec![5.0]),
        ]
    }

    #[test]
    fn loglik_matches_the_closed_form() {
        let ys = vec![DVector::from_vec(vec![0.0, 0.0])];
        let xs = vec![DMatrix::from_element(2, 1, 1.0)];
        let sigmas = vec![DMatrix::identity(2, 2)];
        let ll = reml_loglik(&ys, &xs, &sigmas).unwrap();
        assert_relative_eq!(ll, -0.34657359027997265, max_relative = 1e-15);
    }

    #[test]
    fn loglik_is_shift_invariant() {
        let ys = vec![
            DVector::from_vec(vec![1.0, -2.0, 0.5]),
            DVector::from_vec(vec![3.0, 1.0]),
        ];
        let xs = vec![
            DMatrix::from_element(3, 1, 1.0),
            DMatrix::from_element(2, 1, 1.0),
        ];
        let sigmas = vec![
            DMatrix::identity(3, 3) * 2.0 + DMatrix::from_element(3, 3, 0.5),
            DMatrix::identity(2, 2) * 1.5,
        ];
        let base = reml_loglik(&ys, &xs, &sigmas).unwrap();
        let shifted: Vec<DVector<f64>> = ys.iter().map(|y| y.add_scalar(7.25)).collect();
        let moved = reml_loglik(&shifted, &xs, &sigmas).unwrap();
        assert_relative_eq!(base, moved, max_relative = 1e-12);
    }

    #[test]
    fn exact_mean_fit_zeroes_the_quadratic() {
        // y in the design column space: only the determinant terms remain.
        let ys = vec![DVector::from_vec(vec![3.0, 3.0])];
        let xs = vec![DMatrix::from_element(2, 1, 1.0)];
        let sigmas = vec![DMatrix::identity(2, 2)];
        let ll = reml_loglik(&ys, &xs, &sigmas).unwrap();
        assert_relative_eq!(ll, -0.5 * 2.0f64.ln(), max_relative = 1e-15);
    }

    #[test]
    fn score_matches_finite_differences() {
        let data = three_class_data();
        let spec = ModelSpec::full();
        let occupied = occupied_classes(&data);
        let xs = designs(&data, &occupied, spec.mean);
        let ys: Vec<DVector<f64>> = data.iter().map(|d| d.y.clone()).collect();
        let vs = coefficient_matrices(&data, &spec).unwrap();
        let omega = vec![0.4, 0.3, 0.2, 0.5, 1.1];
        let sigmas = assemble_all(&vs, &omega);
        let (score, info) = score_and_information(&ys, &xs, &sigmas, &vs).unwrap();

        let h = 1e-5;
        for a in 0..omega.len() {
            let mut up = omega.clone();
            let mut dn = omega.clone();
            up[a] += h;
            dn[a] -= h;
            let lu = reml_loglik(&ys, &xs, &assemble_all(&vs, &up)).unwrap();
            let ld = reml_loglik(&ys, &xs, &assemble_all(&vs, &dn)).unwrap();
            let fd = (lu - ld) / (2.0 * h);
            assert_relative_eq!(score[a], fd, max_relative = 1e-5, epsilon = 1e-7);
        }
        // Expected information is symmetric PSD.
        assert_relative_eq!(info[(0, 1)], info[(1, 0)], max_relative = 1e-12);
        let eigs = info.clone().symmetric_eigen().eigenvalues;
        assert!(eigs.iter().all(|&e| e > -1e-8));
    }

    #[test]
    fn residual_only_fit_recovers_the_pooled_variance() {
        let data = three_class_data();
        let spec = ModelSpec::new(vec![VarComponent::Residual], MeanStructure::ClassMeans).unwrap();
        let fit = fit_reml(&data, &spec, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        // Within-class SSE 22 over 7 − 3 degrees of freedom.
        assert_relative_eq!(fit.omega.sigma_e2, 5.5, max_relative = 1e-8);
        assert_relative_eq!(fit.beta.mu[0].unwrap(), 3.0, max_relative = 1e-8);
        assert_relative_eq!(fit.beta.mu[1].unwrap(), 2.0, max_relative = 1e-8);
        assert_relative_eq!(fit.beta.mu[2].unwrap(), 5.0, max_relative = 1e-8);
        assert_eq!(fit.omega.sigma_m2, 0.0);
        assert!(fit.omega.sigma_l2.is_none());
    }

    #[test]
    fn refit_from_the_optimum_takes_no_iterations() {
        let data = three_class_data();
        let spec = ModelSpec::full();
        let fit = fit_reml(&data, &spec, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let again = fit_reml_warm(&data, &spec, &FitOptions::default(), &fit.omega).unwrap();
        assert!(again.converged);
        assert_eq!(again.iterations, 0);
        assert_relative_eq!(again.reml_loglik, fit.reml_loglik, max_relative = 1e-12);
    }

    #[test]
    fn scaling_phenotypes_scales_components_quadratically() {
        let data = three_class_data();
        let spec = ModelSpec::full();
        let fit = fit_reml(&data, &spec, &FitOptions::default()).unwrap();
        let scaled: Vec<FamilyData> = data
            .iter()
            .map(|d| {
                let mut d = d.clone();
                d.y *= 3.0;
                d
            })
            .collect();
        let fit3 = fit_reml(&scaled, &spec, &FitOptions::default()).unwrap();
        assert!(fit.converged && fit3.converged);
        assert_eq!(fit.iterations, fit3.iterations);
        assert_relative_eq!(fit3.omega.sigma_e2, 9.0 * fit.omega.sigma_e2, max_relative = 1e-6);
        assert_relative_eq!(
            fit3.beta.mu[0].unwrap(),
            3.0 * fit.beta.mu[0].unwrap(),
            max_relative = 1e-6
        );
    }

    #[test]
    fn family_order_does_not_change_the_fit() {
        let data = three_class_data();
        let mut reordered = data.clone();
        reordered.rotate_left(1);
        // The over-parameterized full model only pins the likelihood value on
        // data this small; an identifiable model pins the components too.
        let spec = ModelSpec::full();
        let fit = fit_reml(&data, &spec, &FitOptions::default()).unwrap();
        let fit2 = fit_reml(&reordered, &spec, &FitOptions::default()).unwrap();
        assert_relative_eq!(fit.reml_loglik, fit2.reml_loglik, max_relative = 1e-10);
        let spec = ModelSpec::new(vec![VarComponent::Residual], MeanStructure::ClassMeans).unwrap();
        let fit = fit_reml(&data, &spec, &FitOptions::default()).unwrap();
        let fit2 = fit_reml(&reordered, &spec, &FitOptions::default()).unwrap();
        assert_relative_eq!(fit.omega.sigma_e2, fit2.omega.sigma_e2, max_relative = 1e-10);
    }

    #[test]
    fn common_mean_quadratic_dominates_class_means() {
        let data = three_class_data();
        let spec = ModelSpec::full();
        let omega = vec![0.1, 0.1, 0.05, 0.2, 1.0];
        let tight = gls_quadratic(&data, &spec, &omega, MeanStructure::ClassMeans).unwrap();
        let loose = gls_quadratic(&data, &spec, &omega, MeanStructure::CommonMean).unwrap();
        assert!(loose >= tight);
    }

    #[test]
    fn nested_fits_order_their_likelihoods() {
        let data = three_class_data();
        let opts = FitOptions::default();
        let full = fit_reml(&data, &ModelSpec::full(), &opts).unwrap();
        let null = fit_reml(&data, &ModelSpec::null(), &opts).unwrap();
        assert!(full.reml_loglik >= null.reml_loglik - 1e-8);
    }
}
