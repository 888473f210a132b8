//! Serialized output formats and shared numeric formatting.
//!
//! Every floating value is written with 17 significant digits so that parsing
//! the output reproduces the original bits; `NA` marks missing values.

use crate::error::{Error, Result};
use crate::inference::Thresholds;
use crate::scan::{QtlCall, ScanProfile};
use crate::sim::StudyReport;
use std::fmt::Write as _;

/// Lossless float formatting: 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `NA` for missing values, lossless formatting otherwise.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_else(|| "NA".to_string())
}

pub const PROFILE_HEADER: &str =
    "chrom,pos_cM,LR,p,sigma_m2,sigma_f2,sigma_mf2,sigma_g2,sigma_e2,mu1,mu2,mu3,converged";

/// One row per evaluated grid position, in scan order.
pub fn profile_csv(profile: &ScanProfile) -> String {
    let mut out = String::from(PROFILE_HEADER);
    out.push('\n');
    for chrom in &profile.chromosomes {
        for p in &chrom.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                chrom.chrom,
                fmt_f64(p.position_cm),
                fmt_f64(p.lr),
                fmt_opt(p.p_value),
                fmt_f64(p.omega.sigma_m2),
                fmt_f64(p.omega.sigma_f2),
                fmt_f64(p.omega.sigma_mf2),
                fmt_f64(p.omega.sigma_g2),
                fmt_f64(p.omega.sigma_e2),
                fmt_opt(p.beta.mu[0]),
                fmt_opt(p.beta.mu[1]),
                fmt_opt(p.beta.mu[2]),
                p.converged,
            )
            .unwrap();
        }
    }
    out
}

pub const CALLS_HEADER: &str = "chrom,pos_cM,nearest_marker,offset_cM,LR,p,significance,\
                                p_M,p_imp,p_m,p_f,imprinting,mu1,mu2,mu3,\
                                sigma_m2,sigma_f2,sigma_mf2,sigma_g2,sigma_e2,\
                                sigma_L2,sigma_R2,converged";

/// One row per called QTL; the header is emitted even without calls.
pub fn calls_csv(calls: &[QtlCall]) -> String {
    let mut out = String::from(CALLS_HEADER);
    out.push('\n');
    for c in calls {
        let b = &c.battery;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.chrom,
            fmt_f64(c.position_cm),
            c.nearest_marker,
            fmt_f64(c.offset_cm),
            fmt_f64(c.lr),
            fmt_opt(c.p_value),
            c.significance.label(),
            fmt_opt(b.mean_effect.as_ref().and_then(|t| t.p_value)),
            fmt_opt(b.imprinting.p_value),
            fmt_opt(b.maternal_zero.as_ref().and_then(|t| t.p_value)),
            fmt_opt(b.paternal_zero.as_ref().and_then(|t| t.p_value)),
            b.call.label(),
            fmt_opt(c.beta.mu[0]),
            fmt_opt(c.beta.mu[1]),
            fmt_opt(c.beta.mu[2]),
            fmt_f64(c.omega.sigma_m2),
            fmt_f64(c.omega.sigma_f2),
            fmt_f64(c.omega.sigma_mf2),
            fmt_f64(c.omega.sigma_g2),
            fmt_f64(c.omega.sigma_e2),
            fmt_opt(c.omega.sigma_l2),
            fmt_opt(c.omega.sigma_r2),
            c.converged,
        )
        .unwrap();
    }
    out
}

pub const THRESHOLDS_HEADER: &str = "scope\tchrom\talpha\tthreshold\tn_perm\tseed";

/// Genome row first (`genome` scope, chrom `*`), then one `chrom` row per
/// chromosome in map order.
pub fn thresholds_tsv(t: &Thresholds) -> String {
    let mut out = String::from(THRESHOLDS_HEADER);
    out.push('\n');
    writeln!(
        out,
        "genome\t*\t{}\t{}\t{}\t{}",
        fmt_f64(t.alpha),
        fmt_f64(t.genome),
        t.n_perm,
        t.seed
    )
    .unwrap();
    for (chrom, threshold) in &t.per_chromosome {
        writeln!(
            out,
            "chrom\t{chrom}\t{}\t{}\t{}\t{}",
            fmt_f64(t.alpha),
            fmt_f64(*threshold),
            t.n_perm,
            t.seed
        )
        .unwrap();
    }
    out
}

/// Parses [`thresholds_tsv`] output back into a [`Thresholds`].
pub fn parse_thresholds(text: &str) -> Result<Thresholds> {
    let bad = |msg: String| Error::InvalidThresholds(msg);
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| bad("empty thresholds file".into()))?;
    if header.split('\t').map(str::trim).collect::<Vec<_>>()
        != ["scope", "chrom", "alpha", "threshold", "n_perm", "seed"]
    {
        return Err(bad(format!(
            "header must be `{}`",
            THRESHOLDS_HEADER.replace('\t', "\\t")
        )));
    }

    let mut genome: Option<f64> = None;
    let mut per_chromosome: Vec<(String, f64)> = Vec::new();
    let mut shared: Option<(f64, usize, u64)> = None;
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(bad(format!(
                "line {}: expected 6 fields, found {}",
                idx + 1,
                fields.len()
            )));
        }
        let num = |what: &str, s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| bad(format!("line {}: {what} {s:?} is not numeric", idx + 1)))
        };
        let alpha = num("alpha", fields[2])?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(bad(format!(
                "line {}: alpha {alpha} is outside (0, 1)",
                idx + 1
            )));
        }
        let threshold = num("threshold", fields[3])?;
        if threshold.is_nan() {
            return Err(bad(format!("line {}: threshold is NaN", idx + 1)));
        }
        let n_perm: usize = fields[4]
            .parse()
            .map_err(|_| bad(format!("line {}: n_perm {:?} is not a count", idx + 1, fields[4])))?;
        let seed: u64 = fields[5]
            .parse()
            .map_err(|_| bad(format!("line {}: seed {:?} is not an integer", idx + 1, fields[5])))?;
        match shared {
            None => shared = Some((alpha, n_perm, seed)),
            Some(s) if s != (alpha, n_perm, seed) => {
                return Err(bad(format!(
                    "line {}: alpha/n_perm/seed disagree with earlier rows",
                    idx + 1
                )));
            }
            Some(_) => {}
        }
        match (fields[0], fields[1]) {
            ("genome", "*") => {
                if genome.replace(threshold).is_some() {
                    return Err(bad(format!("line {}: second genome row", idx + 1)));
                }
            }
            ("genome", other) => {
                return Err(bad(format!(
                    "line {}: genome rows use chrom `*`, found {other:?}",
                    idx + 1
                )));
            }
            ("chrom", name) => {
                if per_chromosome.iter().any(|(c, _)| c == name) {
                    return Err(bad(format!(
                        "line {}: duplicate chromosome {name:?}",
                        idx + 1
                    )));
                }
                per_chromosome.push((name.to_string(), threshold));
            }
            (scope, _) => {
                return Err(bad(format!(
                    "line {}: scope {scope:?} is not `genome` or `chrom`",
                    idx + 1
                )));
            }
        }
    }
    let (alpha, n_perm, seed) =
        shared.ok_or_else(|| bad("thresholds file has no data rows".into()))?;
    let genome = genome.ok_or_else(|| bad("thresholds file has no genome row".into()))?;
    Ok(Thresholds {
        alpha,
        n_perm,
        seed,
        genome,
        per_chromosome,
        quantile_resolved: n_perm as f64 * alpha >= 1.0 - 1e-9,
    })
}

pub const STUDY_HEADER: &str = "design,mode,n_rep,failures,threshold,threshold_failures,\
                                detections,detection_power,imprinting_rate,position_rmse_cm,\
                                mean_sigma_m2,mean_sigma_f2,mean_sigma_mf2,mean_sigma_g2,\
                                mean_sigma_e2";

/// One row per design per report; pass one report per scan mode to compare
/// modes in a single table.
pub fn study_csv(reports: &[StudyReport]) -> String {
    let mut out = String::from(STUDY_HEADER);
    out.push('\n');
    for report in reports {
        for d in &report.designs {
            let omega = d.mean_estimates.as_ref();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                d.name,
                report.mode.label(),
                report.n_rep,
                d.failures,
                fmt_f64(d.threshold),
                d.threshold_failures,
                d.detections,
                fmt_f64(d.detection_power),
                fmt_opt(d.imprinting_rate),
                fmt_opt(d.position_rmse_cm),
                fmt_opt(omega.map(|o| o.sigma_m2)),
                fmt_opt(omega.map(|o| o.sigma_f2)),
                fmt_opt(omega.map(|o| o.sigma_mf2)),
                fmt_opt(omega.map(|o| o.sigma_g2)),
                fmt_opt(omega.map(|o| o.sigma_e2)),
            )
            .unwrap();
        }
    }
    out
}
