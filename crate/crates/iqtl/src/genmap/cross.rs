//! Cross types, founder alleles, and the triploid endosperm genotype encoding.
//!
//! Every family descends from two inbred founder lines: line 1 fixed for the
//! upper-case allele Q, line 2 fixed for the lower-case allele q. A backcross
//! mates the F1 hybrid with one of the founders, so exactly one parent
//! segregates; a single transmitted-allele code per marker therefore fixes the
//! whole endosperm genotype.

use crate::error::{Error, Result};
use std::fmt;

/// Inbred founder line an allele descends from. Alleles from the same line are
/// mutually identical by descent; alleles from different lines never are.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FounderLine {
    /// The line fixed for allele Q; transmitted-allele code 0.
    Line1,
    /// The line fixed for allele q; transmitted-allele code 1.
    Line2,
}

impl FounderLine {
    /// Code used in genotype files: 0 for line 1, 1 for line 2.
    pub fn code(self) -> u8 {
        match self {
            FounderLine::Line1 => 0,
            FounderLine::Line2 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<FounderLine> {
        match code {
            0 => Some(FounderLine::Line1),
            1 => Some(FounderLine::Line2),
            _ => None,
        }
    }

    pub fn other(self) -> FounderLine {
        match self {
            FounderLine::Line1 => FounderLine::Line2,
            FounderLine::Line2 => FounderLine::Line1,
        }
    }
}

/// Observed transmitted-allele code at one marker; `None` is a missing call.
pub type MarkerCode = Option<FounderLine>;

/// The four reciprocal backcrosses, maternal parent written first.
///
/// Exactly one parent of each cross is the segregating F1 hybrid (Qq); the
/// other is a homozygous founder whose contribution is deterministic.
#[allow(non_camel_case_types)] // variants keep the maternal-first cross notation
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CrossType {
    /// Mother QQ (line 1), father F1.
    QQxQq,
    /// Mother F1, father QQ (line 1).
    QqxQQ,
    /// Mother qq (line 2), father F1.
    qqxQq,
    /// Mother F1, father qq (line 2).
    Qqxqq,
}

impl CrossType {
    pub const ALL: [CrossType; 4] = [
        CrossType::QQxQq,
        CrossType::QqxQQ,
        CrossType::qqxQq,
        CrossType::Qqxqq,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CrossType::QQxQq => "QQxQq",
            CrossType::QqxQQ => "QqxQQ",
            CrossType::qqxQq => "qqxQq",
            CrossType::Qqxqq => "Qqxqq",
        }
    }

    /// Parses the exact cross token used in genotype files.
    pub fn parse(token: &str) -> Result<CrossType> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == token)
            .ok_or_else(|| Error::UnknownCross(token.to_string()))
    }

    /// Nuclear genotype class of the mother. Families of the same class share
    /// one phenotypic mean, so only three candidate means exist.
    pub fn maternal_class(self) -> MaternalClass {
        match self {
            CrossType::QQxQq => MaternalClass::AA,
            CrossType::QqxQQ | CrossType::Qqxqq => MaternalClass::Aa,
            CrossType::qqxQq => MaternalClass::aa,
        }
    }

    /// Whether the segregating F1 parent is the mother.
    pub fn f1_is_mother(self) -> bool {
        matches!(self, CrossType::QqxQQ | CrossType::Qqxqq)
    }

    /// Founder line contributed by the homozygous (non-F1) parent.
    pub fn homozygous_contribution(self) -> FounderLine {
        match self {
            CrossType::QQxQq | CrossType::QqxQQ => FounderLine::Line1,
            CrossType::qqxQq | CrossType::Qqxqq => FounderLine::Line2,
        }
    }

    /// Offspring endosperm genotype given the allele the F1 parent transmitted.
    pub fn offspring(self, transmitted: FounderLine) -> TriploidGenotype {
        let fixed = self.homozygous_contribution();
        if self.f1_is_mother() {
            TriploidGenotype {
                maternal: transmitted,
                paternal: fixed,
            }
        } else {
            TriploidGenotype {
                maternal: fixed,
                paternal: transmitted,
            }
        }
    }

    /// The two offspring genotype classes, indexed by transmitted code 0, 1.
    pub fn offspring_classes(self) -> [TriploidGenotype; 2] {
        [
            self.offspring(FounderLine::Line1),
            self.offspring(FounderLine::Line2),
        ]
    }
}

impl fmt::Display for CrossType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Endosperm genotype: two identical copies of the maternal allele plus one
/// paternal allele, each recorded by founder line of origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TriploidGenotype {
    pub maternal: FounderLine,
    pub paternal: FounderLine,
}

impl TriploidGenotype {
    /// True when `cross` can produce this genotype: the homozygous parent's
    /// slot must carry that parent's fixed founder line.
    pub fn producible_by(self, cross: CrossType) -> bool {
        let fixed = cross.homozygous_contribution();
        if cross.f1_is_mother() {
            self.paternal == fixed
        } else {
            self.maternal == fixed
        }
    }
}

impl fmt::Display for TriploidGenotype {
    /// Three-letter form, maternal copies first: `QQq` is Q-maternal (doubled)
    /// with q-paternal.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = |a: FounderLine| match a {
            FounderLine::Line1 => 'Q',
            FounderLine::Line2 => 'q',
        };
        let m = letter(self.maternal);
        write!(f, "{m}{m}{}", letter(self.paternal))
    }
}

/// Maternal nuclear genotype class; indexes the three candidate family means.
#[allow(non_camel_case_types)] // keeps the AA/Aa/aa genetics notation
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MaternalClass {
    AA,
    Aa,
    aa,
}

impl MaternalClass {
    pub const ALL: [MaternalClass; 3] = [MaternalClass::AA, MaternalClass::Aa, MaternalClass::aa];

    /// Index of this class's mean among (mu1, mu2, mu3).
    pub fn index(self) -> usize {
        match self {
            MaternalClass::AA => 0,
            MaternalClass::Aa => 1,
            MaternalClass::aa => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MaternalClass::AA => "AA",
            MaternalClass::Aa => "Aa",
            MaternalClass::aa => "aa",
        }
    }
}

impl fmt::Display for MaternalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use FounderLine::{Line1, Line2};

    #[test]
    fn offspring_follows_the_transmitted_allele() {
        // Father is the F1: the maternal slot is fixed by the mother's line.
        let g = CrossType::QQxQq.offspring(Line1);
        assert_eq!((g.maternal, g.paternal), (Line1, Line1));
        let g = CrossType::QQxQq.offspring(Line2);
        assert_eq!((g.maternal, g.paternal), (Line1, Line2));
        let g = CrossType::qqxQq.offspring(Line2);
        assert_eq!((g.maternal, g.paternal), (Line2, Line2));
        // Mother is the F1: her transmitted allele appears twice.
        let g = CrossType::QqxQQ.offspring(Line2);
        assert_eq!((g.maternal, g.paternal), (Line2, Line1));
        let g = CrossType::Qqxqq.offspring(Line1);
        assert_eq!((g.maternal, g.paternal), (Line1, Line2));
    }

    #[test]
    fn each_cross_has_exactly_two_offspring_classes() {
        for cross in CrossType::ALL {
            let [a, b] = cross.offspring_classes();
            assert_ne!(a, b);
            assert!(a.producible_by(cross) && b.producible_by(cross));
            // The class missing the homozygous parent's contribution is foreign.
            let foreign = TriploidGenotype {
                maternal: a.maternal.other(),
                paternal: a.paternal.other(),
            };
            assert!(!foreign.producible_by(cross) || foreign == b);
        }
    }

    #[test]
    fn maternal_classes_cover_all_three_means() {
        use MaternalClass::*;
        let classes: Vec<_> = CrossType::ALL.iter().map(|c| c.maternal_class()).collect();
        assert_eq!(classes, vec![AA, Aa, aa, Aa]);
    }

    #[test]
    fn cross_tokens_round_trip() {
        for cross in CrossType::ALL {
            assert_eq!(CrossType::parse(cross.as_str()).unwrap(), cross);
        }
        assert!(matches!(
            CrossType::parse("F2"),
            Err(Error::UnknownCross(t)) if t == "F2"
        ));
    }

    #[test]
    fn genotype_display_doubles_the_maternal_copy() {
        let g = CrossType::QqxQQ.offspring(Line2);
        assert_eq!(g.to_string(), "qqQ");
        assert_eq!(CrossType::QQxQq.offspring(Line2).to_string(), "QQq");
    }
}
