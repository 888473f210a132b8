//! Linkage map: ordered marker positions per chromosome, the TSV round trip,
//! and the Haldane map function.

use crate::error::{Error, Result};
use crate::report::fmt_f64;
use std::collections::HashSet;
use std::fmt::Write as _;

/// One mapped marker.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkerLocus {
    pub name: String,
    /// Map position in centimorgans.
    pub position: f64,
}

/// One linkage group; positions are strictly increasing after validation.
#[derive(Clone, Debug, PartialEq)]
pub struct Chromosome {
    pub name: String,
    pub markers: Vec<MarkerLocus>,
}

impl Chromosome {
    /// First and last marker positions.
    pub fn span(&self) -> (f64, f64) {
        (
            self.markers.first().map(|m| m.position).unwrap_or(0.0),
            self.markers.last().map(|m| m.position).unwrap_or(0.0),
        )
    }

    /// True when `pos` lies inside the marker span (inclusive).
    pub fn contains(&self, pos: f64) -> bool {
        let (lo, hi) = self.span();
        pos >= lo && pos <= hi
    }
}

/// Validated genetic map. Construct through [`LinkageMap::new`] or
/// [`LinkageMap::parse`]; both enforce the invariants: unique marker names,
/// strictly increasing positions, and at least two markers per chromosome
/// (interval scanning needs a bracketing pair).
#[derive(Clone, Debug, PartialEq)]
pub struct LinkageMap {
    chromosomes: Vec<Chromosome>,
    /// Cumulative marker counts; `offsets[i]` is the global index of
    /// chromosome i's first marker in a per-individual code vector.
    offsets: Vec<usize>,
}

impl LinkageMap {
    pub fn new(chromosomes: Vec<Chromosome>) -> Result<LinkageMap> {
        if chromosomes.is_empty() {
            return Err(Error::InvalidMap("map has no chromosomes".into()));
        }
        let mut seen = HashSet::new();
        for chrom in &chromosomes {
            if chrom.markers.len() < 2 {
                return Err(Error::InvalidMap(format!(
                    "chromosome {:?} has {} marker(s); at least 2 are required",
                    chrom.name,
                    chrom.markers.len()
                )));
            }
            for marker in &chrom.markers {
                if !marker.position.is_finite() {
                    return Err(Error::InvalidMap(format!(
                        "marker {:?} has non-finite position",
                        marker.name
                    )));
                }
                if !seen.insert(marker.name.clone()) {
                    return Err(Error::InvalidMap(format!(
                        "duplicate marker name {:?}",
                        marker.name
                    )));
                }
            }
            for pair in chrom.markers.windows(2) {
                if pair[1].position <= pair[0].position {
                    return Err(Error::InvalidMap(format!(
                        "chromosome {:?}: markers {:?} and {:?} are not at strictly \
                         increasing positions",
                        chrom.name, pair[0].name, pair[1].name
                    )));
                }
            }
        }
        let mut offsets = Vec::with_capacity(chromosomes.len());
        let mut total = 0;
        for chrom in &chromosomes {
            offsets.push(total);
            total += chrom.markers.len();
        }
        Ok(LinkageMap {
            chromosomes,
            offsets,
        })
    }

    /// Parses the tab-separated map format: a `chrom\tmarker\tpos_cM` header
    /// followed by one row per marker. Rows may arrive unsorted; they are
    /// sorted by position within each chromosome. Chromosomes keep their order
    /// of first appearance.
    pub fn parse(text: &str) -> Result<LinkageMap> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::InvalidMap("empty map file".into()))?;
        let fields: Vec<&str> = header.split('\t').map(str::trim).collect();
        if fields.len() < 3 || fields[0] != "chrom" || fields[1] != "marker" || fields[2] != "pos_cM"
        {
            return Err(Error::InvalidMap(
                "header must be `chrom\\tmarker\\tpos_cM`".into(),
            ));
        }

        let mut order: Vec<String> = Vec::new();
        let mut rows: Vec<(String, MarkerLocus)> = Vec::new();
        for (idx, line) in lines {
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::InvalidMap(format!(
                    "line {}: expected 3 tab-separated fields, found {}",
                    idx + 1,
                    fields.len()
                )));
            }
            let position: f64 = fields[2].parse().map_err(|_| {
                Error::InvalidMap(format!(
                    "line {}: position {:?} is not numeric",
                    idx + 1,
                    fields[2]
                ))
            })?;
            if !position.is_finite() {
                return Err(Error::InvalidMap(format!(
                    "line {}: position {:?} is not finite",
                    idx + 1,
                    fields[2]
                )));
            }
            let chrom = fields[0].to_string();
            if !order.contains(&chrom) {
                order.push(chrom.clone());
            }
            rows.push((
                chrom,
                MarkerLocus {
                    name: fields[1].to_string(),
                    position,
                },
            ));
        }

        let chromosomes = order
            .into_iter()
            .map(|name| {
                let mut markers: Vec<MarkerLocus> = rows
                    .iter()
                    .filter(|(c, _)| *c == name)
                    .map(|(_, m)| m.clone())
                    .collect();
                // Positions are finite here, so the comparison is total.
                markers.sort_by(|a, b| a.position.partial_cmp(&b.position).unwrap());
                Chromosome { name, markers }
            })
            .collect();
        LinkageMap::new(chromosomes)
    }

    /// Serializes back to the parsed format (lossless float round trip).
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("chrom\tmarker\tpos_cM\n");
        for chrom in &self.chromosomes {
            for marker in &chrom.markers {
                writeln!(
                    out,
                    "{}\t{}\t{}",
                    chrom.name,
                    marker.name,
                    fmt_f64(marker.position)
                )
                .unwrap();
            }
        }
        out
    }

    pub fn chromosomes(&self) -> &[Chromosome] {
        &self.chromosomes
    }

    /// Chromosome by name, with its index.
    pub fn chromosome(&self, name: &str) -> Result<(usize, &Chromosome)> {
        self.chromosomes
            .iter()
            .enumerate()
            .find(|(_, c)| c.name == name)
            .ok_or_else(|| Error::UnknownChromosome(name.to_string()))
    }

    pub fn total_markers(&self) -> usize {
        self.offsets.last().unwrap() + self.chromosomes.last().unwrap().markers.len()
    }

    /// Global index of `chrom_idx`'s first marker in a per-individual code
    /// vector (chromosomes are laid out in map order).
    pub fn marker_offset(&self, chrom_idx: usize) -> usize {
        self.offsets[chrom_idx]
    }

    /// Marker names in global (code-vector) order.
    pub fn marker_names(&self) -> impl Iterator<Item = &str> {
        self.chromosomes
            .iter()
            .flat_map(|c| c.markers.iter().map(|m| m.name.as_str()))
    }
}

/// Haldane map function: expected recombination fraction over `d` centimorgans
/// assuming no crossover interference. Strictly increasing, bounded by 1/2.
pub fn haldane_recomb(d: f64) -> Result<f64> {
    if !(d >= 0.0) {
        // Also rejects NaN.
        return Err(Error::NegativeDistance(d));
    }
    Ok((1.0 - (-2.0 * d / 100.0).exp()) / 2.0)
}
