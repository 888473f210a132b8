//! Family genotype/phenotype container and its TSV round trip.

use crate::error::{Error, Result};
use crate::genmap::{CrossType, FounderLine, LinkageMap, MarkerCode};
use crate::report::fmt_f64;
use nalgebra::DVector;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

/// One genotyped (and possibly phenotyped) endosperm sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub id: String,
    /// Transmitted-allele codes in the map's global marker order.
    pub codes: Vec<MarkerCode>,
    /// Trait name to measured value.
    pub traits: BTreeMap<String, f64>,
}

/// One backcross family: all offspring share the cross, hence the maternal
/// genotype class and the segregation pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct Family {
    pub id: String,
    pub cross: CrossType,
    pub individuals: Vec<Individual>,
}

impl Family {
    pub fn size(&self) -> usize {
        self.individuals.len()
    }
}

/// A validated collection of backcross families tied to one linkage map.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FamilyDataset {
    pub families: Vec<Family>,
}

impl FamilyDataset {
    /// Parses the genotype and phenotype tables against `map`.
    ///
    /// Genotype rows are `family\tcross\tindividual\tcode...` with one code
    /// column per map marker (header names must match the map's marker order);
    /// codes are `0`, `1` or `NA`. Phenotype rows are
    /// `family\tindividual\ttrait=value...`; every phenotype row must match
    /// exactly one genotype row.
    pub fn parse(map: &LinkageMap, genotypes: &str, phenotypes: &str) -> Result<FamilyDataset> {
        let mut dataset = parse_genotypes(map, genotypes)?;
        attach_phenotypes(&mut dataset, phenotypes)?;
        Ok(dataset)
    }

    /// Serializes genotypes back to the parsed format.
    pub fn genotype_tsv(&self, map: &LinkageMap) -> String {
        let mut out = String::from("family\tcross\tindividual");
        for name in map.marker_names() {
            out.push('\t');
            out.push_str(name);
        }
        out.push('\n');
        for family in &self.families {
            for ind in &family.individuals {
                write!(out, "{}\t{}\t{}", family.id, family.cross, ind.id).unwrap();
                for code in &ind.codes {
                    out.push('\t');
                    out.push_str(match code {
                        Some(FounderLine::Line1) => "0",
                        Some(FounderLine::Line2) => "1",
                        None => "NA",
                    });
                }
                out.push('\n');
            }
        }
        out
    }

    /// Serializes phenotypes; individuals without measurements emit no row.
    pub fn phenotype_tsv(&self) -> String {
        let mut out = String::from("family\tindividual\ttraits\n");
        for family in &self.families {
            for ind in &family.individuals {
                if ind.traits.is_empty() {
                    continue;
                }
                write!(out, "{}\t{}", family.id, ind.id).unwrap();
                for (name, value) in &ind.traits {
                    write!(out, "\t{name}={}", fmt_f64(*value)).unwrap();
                }
                out.push('\n');
            }
        }
        out
    }

    /// All trait names present anywhere in the dataset.
    pub fn trait_names(&self) -> BTreeSet<String> {
        self.families
            .iter()
            .flat_map(|f| f.individuals.iter())
            .flat_map(|i| i.traits.keys().cloned())
            .collect()
    }

    /// Per-family phenotype vectors for one trait, in family and individual
    /// order. Every individual must carry the trait.
    pub fn trait_vectors(&self, name: &str) -> Result<Vec<DVector<f64>>> {
        if !self
            .families
            .iter()
            .flat_map(|f| &f.individuals)
            .any(|ind| ind.traits.contains_key(name))
        {
            return Err(Error::UnknownTrait(format!(
                "no individual carries trait {name:?}"
            )));
        }
        self.families
            .iter()
            .map(|family| {
                let values: Result<Vec<f64>> = family
                    .individuals
                    .iter()
                    .map(|ind| {
                        ind.traits.get(name).copied().ok_or_else(|| {
                            Error::InvalidDataset(format!(
                                "individual {:?} in family {:?} has no value for trait {name:?}",
                                ind.id, family.id
                            ))
                        })
                    })
                    .collect();
                Ok(DVector::from_vec(values?))
            })
            .collect()
    }

    pub fn total_individuals(&self) -> usize {
        self.families.iter().map(Family::size).sum()
    }
}

fn parse_genotypes(map: &LinkageMap, text: &str) -> Result<FamilyDataset> {
    let n_markers = map.total_markers();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidDataset("empty genotype file".into()))?;
    let fields: Vec<&str> = header.split('\t').map(str::trim).collect();
    if fields.len() != 3 + n_markers
        || fields[0] != "family"
        || fields[1] != "cross"
        || fields[2] != "individual"
    {
        return Err(Error::InvalidDataset(format!(
            "genotype header must be `family\\tcross\\tindividual` followed by {n_markers} \
             marker name(s)"
        )));
    }
    for (name, expected) in fields[3..].iter().zip(map.marker_names()) {
        if *name != expected {
            return Err(Error::InvalidDataset(format!(
                "genotype column {name:?} does not match map marker {expected:?} \
                 (columns must follow map order)"
            )));
        }
    }

    let mut families: Vec<Family> = Vec::new();
    let mut family_index: HashMap<String, usize> = HashMap::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 + n_markers {
            return Err(Error::InvalidDataset(format!(
                "genotype line {}: expected {} fields, found {}",
                idx + 1,
                3 + n_markers,
                fields.len()
            )));
        }
        let cross = CrossType::parse(fields[1])?;
        let codes: Result<Vec<MarkerCode>> = fields[3..]
            .iter()
            .map(|tok| match *tok {
                "0" => Ok(Some(FounderLine::Line1)),
                "1" => Ok(Some(FounderLine::Line2)),
                "NA" => Ok(None),
                other => Err(Error::InvalidDataset(format!(
                    "genotype line {}: marker code {other:?} is not 0, 1 or NA",
                    idx + 1
                ))),
            })
            .collect();
        let individual = Individual {
            id: fields[2].to_string(),
            codes: codes?,
            traits: BTreeMap::new(),
        };

        let fam_id = fields[0].to_string();
        let fam_pos = *family_index.entry(fam_id.clone()).or_insert_with(|| {
            families.push(Family {
                id: fam_id.clone(),
                cross,
                individuals: Vec::new(),
            });
            families.len() - 1
        });
        let family = &mut families[fam_pos];
        if family.cross != cross {
            return Err(Error::InvalidDataset(format!(
                "genotype line {}: family {fam_id:?} listed with conflicting cross types \
                 ({} vs {})",
                idx + 1,
                family.cross,
                cross
            )));
        }
        if family.individuals.iter().any(|i| i.id == individual.id) {
            return Err(Error::InvalidDataset(format!(
                "genotype line {}: duplicate individual {:?} in family {fam_id:?}",
                idx + 1,
                individual.id
            )));
        }
        family.individuals.push(individual);
    }
    if families.is_empty() {
        return Err(Error::InvalidDataset("genotype file has no data rows".into()));
    }
    Ok(FamilyDataset { families })
}

fn attach_phenotypes(dataset: &mut FamilyDataset, text: &str) -> Result<()> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidDataset("empty phenotype file".into()))?;
    let fields: Vec<&str> = header.split('\t').map(str::trim).collect();
    if fields.len() < 2 || fields[0] != "family" || fields[1] != "individual" {
        return Err(Error::InvalidDataset(
            "phenotype header must start with `family\\tindividual`".into(),
        ));
    }

    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(Error::InvalidDataset(format!(
                "phenotype line {}: expected at least one trait=value column",
                idx + 1
            )));
        }
        let (fam_id, ind_id) = (fields[0], fields[1]);
        if !seen.insert((fam_id.to_string(), ind_id.to_string())) {
            return Err(Error::InvalidDataset(format!(
                "phenotype line {}: duplicate row for family {fam_id:?} individual {ind_id:?}",
                idx + 1
            )));
        }
        let individual = dataset
            .families
            .iter_mut()
            .find(|f| f.id == fam_id)
            .and_then(|f| f.individuals.iter_mut().find(|i| i.id == ind_id))
            .ok_or_else(|| {
                Error::InvalidDataset(format!(
                    "phenotype line {}: no genotype row for family {fam_id:?} \
                     individual {ind_id:?}",
                    idx + 1
                ))
            })?;
        for pair in &fields[2..] {
            let (name, value) = pair.split_once('=').ok_or_else(|| {
                Error::InvalidDataset(format!(
                    "phenotype line {}: column {pair:?} is not of the form trait=value",
                    idx + 1
                ))
            })?;
            let value: f64 = value.parse().map_err(|_| {
                Error::InvalidDataset(format!(
                    "phenotype line {}: value {value:?} for trait {name:?} is not numeric",
                    idx + 1
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::InvalidDataset(format!(
                    "phenotype line {}: value for trait {name:?} is not finite",
                    idx + 1
                )));
            }
            if individual.traits.insert(name.to_string(), value).is_some() {
                return Err(Error::InvalidDataset(format!(
                    "phenotype line {}: trait {name:?} repeated within the row",
                    idx + 1
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_map() -> LinkageMap {
        LinkageMap::parse("chrom\tmarker\tpos_cM\n1\tm1\t0\n1\tm2\t10\n").unwrap()
    }

    const GENO: &str = "family\tcross\tindividual\tm1\tm2\n\
                        f1\tQQxQq\ti1\t0\t1\n\
                        f1\tQQxQq\ti2\tNA\t0\n\
                        f2\tQqx37\ti1\t1\t1\n";

    #[test]
    fn codes_resolve_to_genotypes_per_cross() {
        let geno = "family\tcross\tindividual\tm1\tm2\nf1\tQQxQq\ti1\t0\t1\n";
        let pheno = "family\tindividual\ttraits\nf1\ti1\ty=1.5\n";
        let ds = FamilyDataset::parse(&tiny_map(), geno, pheno).unwrap();
        let fam = &ds.families[0];
        // Code 1 under QQxQq is the Q-maternal, q-paternal class.
        let g = fam.cross.offspring(fam.individuals[0].codes[1].unwrap());
        assert_eq!(g.to_string(), "QQq");
        assert_eq!(fam.individuals[0].traits["y"], 1.5);
    }

    #[test]
    fn unknown_cross_tokens_fail() {
        let err = FamilyDataset::parse(&tiny_map(), GENO, "family\tindividual\tt\n").unwrap_err();
        assert!(matches!(err, Error::UnknownCross(t) if t == "Qqx37"));
    }

    #[test]
    fn orphan_phenotype_rows_fail() {
        let geno = "family\tcross\tindividual\tm1\tm2\nf1\tQQxQq\ti1\t0\t1\n";
        let pheno = "family\tindividual\ttraits\nf1\tmissing\ty=1\n";
        let err = FamilyDataset::parse(&tiny_map(), geno, pheno).unwrap_err();
        assert!(matches!(err, Error::InvalidDataset(msg) if msg.contains("no genotype row")));
    }

    #[test]
    fn marker_columns_must_match_the_map() {
        let geno = "family\tcross\tindividual\tm2\tm1\nf1\tQQxQq\ti1\t0\t1\n";
        let err = FamilyDataset::parse(&tiny_map(), geno, "family\tindividual\tt\n").unwrap_err();
        assert!(matches!(err, Error::InvalidDataset(msg) if msg.contains("map order")));
    }

    #[test]
    fn bad_codes_fail() {
        let geno = "family\tcross\tindividual\tm1\tm2\nf1\tQQxQq\ti1\t0\t2\n";
        let err = FamilyDataset::parse(&tiny_map(), geno, "family\tindividual\tt\n").unwrap_err();
        assert!(matches!(err, Error::InvalidDataset(msg) if msg.contains("marker code")));
    }

    #[test]
    fn round_trip_preserves_the_dataset() {
        let map = tiny_map();
        let geno = "family\tcross\tindividual\tm1\tm2\n\
                    f1\tQQxQq\ti1\t0\t1\n\
                    f1\tQQxQq\ti2\tNA\t0\n\
                    f2\tQqxqq\ti1\t1\t1\n";
        let pheno = "family\tindividual\ttraits\n\
                     f1\ti1\tkw=12.25\toil=4.5\n\
                     f2\ti1\tkw=-3.0625\n";
        let ds = FamilyDataset::parse(&map, geno, pheno).unwrap();
        let again =
            FamilyDataset::parse(&map, &ds.genotype_tsv(&map), &ds.phenotype_tsv()).unwrap();
        assert_eq!(ds, again);
        assert_eq!(ds.total_individuals(), 3);
        assert_eq!(
            ds.trait_names().into_iter().collect::<Vec<_>>(),
            ["kw", "oil"]
        );
    }

    #[test]
    fn trait_vectors_require_complete_measurements() {
        let map = tiny_map();
        let geno = "family\tcross\tindividual\tm1\tm2\n\
                    f1\tQQxQq\ti1\t0\t1\n\
                    f1\tQQxQq\ti2\t1\t0\n";
        let pheno = "family\tindividual\ttraits\nf1\ti1\ty=1\n";
        let ds = FamilyDataset::parse(&map, geno, pheno).unwrap();
        assert!(ds.trait_vectors("y").is_err());
    }
}
