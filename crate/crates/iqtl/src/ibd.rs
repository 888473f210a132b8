//! Parent-specific allelic IBD sharing between triploid endosperm sibs.
//!
//! A backcross endosperm carries two identical maternal copies and one
//! paternal copy, so allelic identity between two sibs splits into a
//! maternal-pair share, a cross-parent share and a paternal-pair share.
//! Marker-exact values are rational; at an arbitrary chromosome position the
//! shares are mixed over the conditional distribution of the F1-transmitted
//! allele given each individual's nearest informative flanking markers.

use crate::error::{Error, Result};
use crate::genmap::{
    haldane_recomb, CrossType, Family, FounderLine, LinkageMap, MarkerCode, TriploidGenotype,
};
use nalgebra::DMatrix;
use num_rational::Rational64;
use num_traits::ToPrimitive;

/// Parent-of-origin decomposition of allelic IBD sharing for one genotype
/// pair. Components are exact; their sum is triple the ordered-pair kinship.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IbdDecomposition {
    /// Share from maternal-maternal allele pairs, in [0, 4/3].
    pub pi_mm: Rational64,
    /// Share from maternal-paternal pairs across the two sibs, in [0, 4/3].
    pub pi_mf_cross: Rational64,
    /// Share from paternal-paternal pairs, in [0, 1/3].
    pub pi_ff: Rational64,
}

impl IbdDecomposition {
    pub fn total(&self) -> Rational64 {
        self.pi_mm + self.pi_mf_cross + self.pi_ff
    }

    pub fn to_f64(&self) -> ExpectedIbd {
        ExpectedIbd {
            pi_mm: rat_f64(self.pi_mm),
            pi_mf_cross: rat_f64(self.pi_mf_cross),
            pi_ff: rat_f64(self.pi_ff),
        }
    }
}

/// The same decomposition after averaging over uncertain QTL genotypes, where
/// exact rationals are no longer available.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpectedIbd {
    pub pi_mm: f64,
    pub pi_mf_cross: f64,
    pub pi_ff: f64,
}

impl ExpectedIbd {
    pub fn total(&self) -> f64 {
        self.pi_mm + self.pi_mf_cross + self.pi_ff
    }
}

fn rat_f64(r: Rational64) -> f64 {
    r.to_f64().expect("small rational fits f64")
}

/// Marker-exact IBD decomposition for an ordered pair of offspring genotypes,
/// including the self pair `g_i == g_j`.
///
/// Alleles are IBD exactly when they descend from the same inbred founder
/// line. With two identical maternal copies and one paternal copy per sample,
/// the ordered-pair kinship is (1/9)(4·mm + 2·mf + ff) over line matches, and
/// each share below is three times its kinship term.
pub fn pair_ibd(
    cross: CrossType,
    g_i: TriploidGenotype,
    g_j: TriploidGenotype,
) -> Result<IbdDecomposition> {
    for g in [g_i, g_j] {
        if !g.producible_by(cross) {
            return Err(Error::ForeignGenotype { cross, genotype: g });
        }
    }
    let same = |a: FounderLine, b: FounderLine| Rational64::from_integer((a == b) as i64);
    Ok(IbdDecomposition {
        pi_mm: Rational64::new(4, 3) * same(g_i.maternal, g_j.maternal),
        pi_mf_cross: Rational64::new(2, 3)
            * (same(g_i.maternal, g_j.paternal) + same(g_i.paternal, g_j.maternal)),
        pi_ff: Rational64::new(1, 3) * same(g_i.paternal, g_j.paternal),
    })
}

/// Probability that the F1-transmitted allele at the test position came from
/// `Line2`, given the transmitted-allele codes at the flanking markers and
/// the recombination fractions `r1` (left) and `r2` (right).
///
/// A missing flank conditions on the observed one alone; both missing gives
/// the segregation marginal 1/2. Requires `0 <= r1, r2 < 0.5`.
pub fn qtl_origin_prob(code_left: MarkerCode, code_right: MarkerCode, r1: f64, r2: f64) -> f64 {
    debug_assert!((0.0..0.5).contains(&r1) && (0.0..0.5).contains(&r2));
    // P(QTL allele is Line2 | one flank): stay with the flank's line unless a
    // recombination intervenes.
    let towards = |code: FounderLine, r: f64| {
        if code == FounderLine::Line2 {
            1.0 - r
        } else {
            r
        }
    };
    match (code_left, code_right) {
        (None, None) => 0.5,
        (Some(c), None) => towards(c, r1),
        (None, Some(c)) => towards(c, r2),
        (Some(cl), Some(cr)) => {
            let t1 = towards(cl, r1);
            let t2 = towards(cr, r2);
            let den = t1 * t2 + (1.0 - t1) * (1.0 - t2);
            if den == 0.0 {
                // Conflicting zero-recombination flanks cannot arise from a
                // map with strictly increasing positions; keep the function
                // total with the symmetric value.
                return 0.5;
            }
            t1 * t2 / den
        }
    }
}

/// Expected IBD decomposition for two sibs whose transmitted alleles are
/// `Line2` with probabilities `p_i` and `p_j`. With `same_individual` the
/// pair is one sample with itself, mixed over a single genotype draw (`p_j`
/// is redundant then and conventionally equals `p_i`).
pub fn expected_pair_ibd(
    cross: CrossType,
    p_i: f64,
    p_j: f64,
    same_individual: bool,
) -> ExpectedIbd {
    debug_assert!((0.0..=1.0).contains(&p_i) && (0.0..=1.0).contains(&p_j));
    let table = class_table(cross);
    let mut out = ExpectedIbd {
        pi_mm: 0.0,
        pi_mf_cross: 0.0,
        pi_ff: 0.0,
    };
    let weight = |p: f64, a: usize| if a == 1 { p } else { 1.0 - p };
    for a in 0..2 {
        for b in 0..2 {
            let w = if same_individual {
                if a != b {
                    continue;
                }
                weight(p_i, a)
            } else {
                weight(p_i, a) * weight(p_j, b)
            };
            let cell = table[a][b];
            out.pi_mm += w * cell.pi_mm;
            out.pi_mf_cross += w * cell.pi_mf_cross;
            out.pi_ff += w * cell.pi_ff;
        }
    }
    out
}

/// The 2x2 table of marker-exact decompositions over offspring classes,
/// indexed by transmitted code.
fn class_table(cross: CrossType) -> [[ExpectedIbd; 2]; 2] {
    let classes = cross.offspring_classes();
    let cell = |a: usize, b: usize| {
        pair_ibd(cross, classes[a], classes[b])
            .expect("offspring classes are producible")
            .to_f64()
    };
    [[cell(0, 0), cell(0, 1)], [cell(1, 0), cell(1, 1)]]
}

/// Genome-average expected total IBD under a cross, as exact rationals:
/// `(off_diagonal, diagonal)` for distinct sibs and self pairs.
pub fn polygenic_phi(cross: CrossType) -> (Rational64, Rational64) {
    let classes = cross.offspring_classes();
    let total = |a, b| {
        pair_ibd(cross, a, b)
            .expect("offspring classes are producible")
            .total()
    };
    let half = Rational64::new(1, 2);
    let mut off = Rational64::from_integer(0);
    let mut diag = Rational64::from_integer(0);
    for &g_a in &classes {
        diag += half * total(g_a, g_a);
        for &g_b in &classes {
            off += half * half * total(g_a, g_b);
        }
    }
    (off, diag)
}

/// Per-family expected IBD component matrices at one test position, plus the
/// polygenic expected-IBD matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct IbdMatrices {
    pub pi_m: DMatrix<f64>,
    pub pi_mf: DMatrix<f64>,
    pub pi_f: DMatrix<f64>,
    pub phi: DMatrix<f64>,
}

impl IbdMatrices {
    /// Total expected IBD at the test position.
    pub fn total(&self) -> DMatrix<f64> {
        &self.pi_m + &self.pi_mf + &self.pi_f
    }
}

/// Builds the component matrices from per-individual `Line2` transmission
/// probabilities.
pub fn matrices_from_probs(cross: CrossType, probs: &[f64]) -> IbdMatrices {
    let n = probs.len();
    let mut pi_m = DMatrix::zeros(n, n);
    let mut pi_mf = DMatrix::zeros(n, n);
    let mut pi_f = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let e = expected_pair_ibd(cross, probs[i], probs[j], i == j);
            pi_m[(i, j)] = e.pi_mm;
            pi_mf[(i, j)] = e.pi_mf_cross;
            pi_f[(i, j)] = e.pi_ff;
            pi_m[(j, i)] = e.pi_mm;
            pi_mf[(j, i)] = e.pi_mf_cross;
            pi_f[(j, i)] = e.pi_ff;
        }
    }
    let (off, diag) = polygenic_phi(cross);
    let (off, diag) = (rat_f64(off), rat_f64(diag));
    let phi = DMatrix::from_fn(n, n, |i, j| if i == j { diag } else { off });
    IbdMatrices {
        pi_m,
        pi_mf,
        pi_f,
        phi,
    }
}

/// Per-individual probability that the F1 transmitted its `Line2` allele at
/// `position_cm`, conditioning on each individual's nearest informative
/// flanking markers on chromosome `chrom_idx`.
pub fn origin_probabilities(
    family: &Family,
    map: &LinkageMap,
    chrom_idx: usize,
    position_cm: f64,
) -> Result<Vec<f64>> {
    let chrom = &map.chromosomes()[chrom_idx];
    if !chrom.contains(position_cm) {
        return Err(Error::PositionOutsideSpan {
            chrom: chrom.name.clone(),
            position: position_cm,
        });
    }
    let offset = map.marker_offset(chrom_idx);
    let m = chrom.markers.len();
    // Markers at or left of the position count as left flanks, so a test
    // position sitting exactly on an informative marker is decided by it.
    let split = chrom
        .markers
        .partition_point(|locus| locus.position <= position_cm);
    family
        .individuals
        .iter()
        .map(|ind| {
            let codes = &ind.codes[offset..offset + m];
            let left = codes[..split]
                .iter()
                .enumerate()
                .rev()
                .find_map(|(i, c)| c.map(|code| (i, code)));
            let right = codes[split..]
                .iter()
                .enumerate()
                .find_map(|(i, c)| c.map(|code| (split + i, code)));
            let flank = |f: Option<(usize, FounderLine)>| -> Result<(MarkerCode, f64)> {
                match f {
                    None => Ok((None, 0.0)),
                    Some((i, code)) => {
                        let d = (position_cm - chrom.markers[i].position).abs();
                        Ok((Some(code), haldane_recomb(d)?))
                    }
                }
            };
            let (cl, r1) = flank(left)?;
            let (cr, r2) = flank(right)?;
            Ok(qtl_origin_prob(cl, cr, r1, r2))
        })
        .collect()
}

/// Expected IBD matrices for one family at one test position.
pub fn family_matrices(
    family: &Family,
    map: &LinkageMap,
    chrom_idx: usize,
    position_cm: f64,
) -> Result<IbdMatrices> {
    let probs = origin_probabilities(family, map, chrom_idx, position_cm)?;
    Ok(matrices_from_probs(family.cross, &probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmap::FamilyDataset;
    use approx::assert_relative_eq;

    fn rat(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn genotype(token: &str) -> TriploidGenotype {
        let m = match token.as_bytes()[0] {
            b'Q' => FounderLine::Line1,
            _ => FounderLine::Line2,
        };
        let p = match token.as_bytes()[2] {
            b'Q' => FounderLine::Line1,
            _ => FounderLine::Line2,
        };
        TriploidGenotype {
            maternal: m,
            paternal: p,
        }
    }

    #[test]
    fn marker_exact_decompositions_are_rational() {
        let d = pair_ibd(CrossType::QQxQq, genotype("QQQ"), genotype("QQq")).unwrap();
        assert_eq!((d.pi_mm, d.pi_mf_cross, d.pi_ff), (rat(4, 3), rat(2, 3), rat(0, 1)));
        assert_eq!(d.total(), rat(2, 1));

        let d = pair_ibd(CrossType::QqxQQ, genotype("QQQ"), genotype("qqQ")).unwrap();
        assert_eq!((d.pi_mm, d.pi_mf_cross, d.pi_ff), (rat(0, 1), rat(2, 3), rat(1, 3)));
        assert_eq!(d.total(), rat(1, 1));

        let d = pair_ibd(CrossType::qqxQq, genotype("qqq"), genotype("qqq")).unwrap();
        assert_eq!((d.pi_mm, d.pi_mf_cross, d.pi_ff), (rat(4, 3), rat(4, 3), rat(1, 3)));
        assert_eq!(d.total(), rat(3, 1));
    }

    #[test]
    fn foreign_genotypes_are_rejected() {
        // QQxQq offspring always inherit maternal Q; qqQ is impossible.
        let err = pair_ibd(CrossType::QQxQq, genotype("qqQ"), genotype("QQQ")).unwrap_err();
        assert!(matches!(err, Error::ForeignGenotype { .. }));
    }

    #[test]
    fn origin_prob_matches_enumeration() {
        let one = Some(FounderLine::Line2);
        let zero = Some(FounderLine::Line1);
        assert_eq!(qtl_origin_prob(one, None, 0.0, 0.0), 1.0);
        assert_eq!(qtl_origin_prob(None, None, 0.3, 0.0), 0.5);
        assert_relative_eq!(qtl_origin_prob(one, zero, 0.1, 0.1), 0.5, max_relative = 1e-15);
        // (1-r1)r2 / ((1-r1)r2 + r1(1-r2)) = 0.095/0.140
        assert_relative_eq!(
            qtl_origin_prob(one, zero, 0.05, 0.1),
            0.6785714285714286,
            max_relative = 1e-15
        );
        // Agreeing certain flanks: (1-r1)(1-r2)/(1-r).
        let (r1, r2) = (0.12, 0.3);
        let r = r1 + r2 - 2.0 * r1 * r2;
        assert_relative_eq!(
            qtl_origin_prob(one, one, r1, r2),
            (1.0 - r1) * (1.0 - r2) / (1.0 - r),
            max_relative = 1e-15
        );
    }

    #[test]
    fn expected_ibd_interpolates_the_exact_table() {
        // Degenerate probabilities reproduce the exact entries.
        let e = expected_pair_ibd(CrossType::QQxQq, 0.0, 1.0, false);
        assert_eq!((e.pi_mm, e.pi_mf_cross, e.pi_ff), (4.0 / 3.0, 2.0 / 3.0, 0.0));
        // Unlinked mixture over distinct sibs.
        let e = expected_pair_ibd(CrossType::QQxQq, 0.5, 0.5, false);
        assert_relative_eq!(e.pi_mm, 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(e.pi_mf_cross, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(e.pi_ff, 1.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(e.total(), 13.0 / 6.0, max_relative = 1e-15);
        // Self mixture.
        let e = expected_pair_ibd(CrossType::QQxQq, 0.5, 0.5, true);
        assert_relative_eq!(e.total(), 7.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn polygenic_phi_is_exact() {
        assert_eq!(polygenic_phi(CrossType::QQxQq), (rat(13, 6), rat(7, 3)));
        assert_eq!(polygenic_phi(CrossType::qqxQq), (rat(13, 6), rat(7, 3)));
        assert_eq!(polygenic_phi(CrossType::QqxQQ), (rat(5, 3), rat(7, 3)));
        assert_eq!(polygenic_phi(CrossType::Qqxqq), (rat(5, 3), rat(7, 3)));
        assert_eq!(rat_f64(rat(13, 6)), 13.0 / 6.0);
    }

    fn two_sib_dataset() -> (LinkageMap, FamilyDataset) {
        let map =
            LinkageMap::parse("chrom\tmarker\tpos_cM\n1\tm1\t0\n1\tm2\t20\n1\tm3\t40\n").unwrap();
        let geno = "family\tcross\tindividual\tm1\tm2\tm3\n\
                    f1\tQQxQq\ti1\t1\tNA\t1\n\
                    f1\tQQxQq\ti2\t0\t0\tNA\n";
        let ds = FamilyDataset::parse(&map, geno, "family\tindividual\ttraits\n").unwrap();
        (map, ds)
    }

    #[test]
    fn family_matrices_at_a_marker_are_table_exact() {
        let (map, ds) = two_sib_dataset();
        let m = family_matrices(&ds.families[0], &map, 0, 0.0).unwrap();
        // i1 transmitted Line2, i2 Line1: classes QQq and QQQ under QQxQq.
        assert_eq!(m.pi_m[(0, 0)], 4.0 / 3.0);
        assert_eq!(m.pi_mf[(0, 0)], 0.0);
        let total = m.total();
        assert_relative_eq!(total[(0, 0)], 5.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(total[(1, 1)], 3.0, max_relative = 1e-15);
        assert_eq!(total[(0, 1)], 2.0);
        assert_eq!(m.phi[(0, 1)], 13.0 / 6.0);
        assert_eq!(m.phi[(0, 0)], 7.0 / 3.0);
    }

    #[test]
    fn missing_codes_fall_back_to_informative_neighbours() {
        let (map, ds) = two_sib_dataset();
        // At m2 (20 cM): i1 is NA there, flanked by informative m1 and m3.
        let probs = origin_probabilities(&ds.families[0], &map, 0, 20.0).unwrap();
        let r = haldane_recomb(20.0).unwrap();
        let both = (1.0 - r) * (1.0 - r) / ((1.0 - r) * (1.0 - r) + r * r);
        assert_relative_eq!(probs[0], both, max_relative = 1e-15);
        // i2 has no informative right flank beyond m2; the marker itself
        // decides.
        assert_eq!(probs[1], 0.0);
    }

    #[test]
    fn positions_and_matrices_stay_consistent() {
        let (map, ds) = two_sib_dataset();
        assert!(matches!(
            family_matrices(&ds.families[0], &map, 0, 41.0),
            Err(Error::PositionOutsideSpan { .. })
        ));
        let m = family_matrices(&ds.families[0], &map, 0, 13.0).unwrap();
        for mat in [&m.pi_m, &m.pi_mf, &m.pi_f] {
            assert_eq!(mat[(0, 1)], mat[(1, 0)]);
        }
        let total = m.total();
        assert!(total[(0, 0)] >= 5.0 / 3.0 && total[(0, 0)] <= 3.0);
    }

    #[test]
    fn all_missing_equals_the_unlinked_mixture() {
        let map =
            LinkageMap::parse("chrom\tmarker\tpos_cM\n1\tm1\t0\n1\tm2\t20\n").unwrap();
        let geno = "family\tcross\tindividual\tm1\tm2\n\
                    f1\tQqxQQ\ti1\tNA\tNA\n\
                    f1\tQqxQQ\ti2\tNA\tNA\n";
        let ds = FamilyDataset::parse(&map, geno, "family\tindividual\ttraits\n").unwrap();
        let m = family_matrices(&ds.families[0], &map, 0, 10.0).unwrap();
        let e = expected_pair_ibd(CrossType::QqxQQ, 0.5, 0.5, false);
        assert_eq!(m.pi_m[(0, 1)], e.pi_mm);
        assert_eq!(m.pi_mf[(0, 1)], e.pi_mf_cross);
        assert_eq!(m.pi_f[(0, 1)], e.pi_ff);
    }
}
