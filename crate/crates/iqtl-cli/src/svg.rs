//! Static SVG rendering of genome-scan likelihood-ratio profiles.

use iqtl::inference::Thresholds;
use iqtl::scan::ScanProfile;
use std::fmt::Write as _;

const PANEL_WIDTH: f64 = 240.0;
const PANEL_GAP: f64 = 14.0;
const MARGIN_LEFT: f64 = 56.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 40.0;
const PLOT_HEIGHT: f64 = 200.0;

fn esc(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Renders one panel per chromosome with the LR curve; threshold lines are
/// drawn when supplied (solid for the genome-wide bar, dashed per chromosome).
pub fn profile_svg(profile: &ScanProfile, thresholds: Option<&Thresholds>) -> String {
    let n_panels = profile.chromosomes.len();
    let width =
        MARGIN_LEFT + n_panels as f64 * PANEL_WIDTH + n_panels.saturating_sub(1) as f64 * PANEL_GAP + MARGIN_RIGHT;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;

    let mut lr_max = profile.genome_maximum();
    if let Some(t) = thresholds {
        lr_max = lr_max.max(t.genome);
        for (_, bar) in &t.per_chromosome {
            if bar.is_finite() {
                lr_max = lr_max.max(*bar);
            }
        }
    }
    let lr_max = (lr_max * 1.05).max(1.0);
    let y_of = |lr: f64| MARGIN_TOP + (1.0 - lr / lr_max) * PLOT_HEIGHT;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.2}\" height=\"{height:.2}\" \
         viewBox=\"0 0 {width:.2} {height:.2}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{MARGIN_LEFT:.2}\" y=\"18.00\" font-size=\"13\">LR profile: {} ({} scan)</text>",
        esc(&profile.trait_name),
        profile.mode.label()
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">{lr_max:.1}</text>",
        MARGIN_LEFT - 6.0,
        MARGIN_TOP + 4.0
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">0</text>",
        MARGIN_LEFT - 6.0,
        MARGIN_TOP + PLOT_HEIGHT + 4.0
    );

    for (panel, chrom) in profile.chromosomes.iter().enumerate() {
        let x0 = MARGIN_LEFT + panel as f64 * (PANEL_WIDTH + PANEL_GAP);
        let start = chrom.points.first().map_or(0.0, |p| p.position_cm);
        let end = chrom.points.last().map_or(start, |p| p.position_cm);
        let span = (end - start).max(1e-9);
        let x_of = |pos: f64| x0 + (pos - start) / span * PANEL_WIDTH;

        let _ = writeln!(
            svg,
            "  <rect x=\"{x0:.2}\" y=\"{MARGIN_TOP:.2}\" width=\"{PANEL_WIDTH:.2}\" height=\"{PLOT_HEIGHT:.2}\" \
             fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>"
        );

        if let Some(t) = thresholds {
            let y = y_of(t.genome);
            let _ = writeln!(
                svg,
                "  <line x1=\"{x0:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#d62728\" \
                 stroke-width=\"1\" data-threshold=\"genome\"/>",
                x0 + PANEL_WIDTH
            );
            let bar = t
                .per_chromosome
                .iter()
                .find(|(name, _)| *name == chrom.chrom)
                .map(|(_, bar)| *bar);
            if let Some(bar) = bar.filter(|b| b.is_finite()) {
                let y = y_of(bar);
                let _ = writeln!(
                    svg,
                    "  <line x1=\"{x0:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#d62728\" \
                     stroke-width=\"1\" stroke-dasharray=\"6 3\" data-threshold=\"chrom\"/>",
                    x0 + PANEL_WIDTH
                );
            }
        }

        let mut points = String::new();
        for p in &chrom.points {
            if !points.is_empty() {
                points.push(' ');
            }
            let _ = write!(points, "{:.2},{:.2}", x_of(p.position_cm), y_of(p.lr));
        }
        let _ = writeln!(
            svg,
            "  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{points}\"/>"
        );

        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            x0 + PANEL_WIDTH / 2.0,
            height - 8.0,
            esc(&chrom.chrom)
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{x0:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{start:.0}</text>",
            MARGIN_TOP + PLOT_HEIGHT + 14.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{end:.0} cM</text>",
            x0 + PANEL_WIDTH,
            MARGIN_TOP + PLOT_HEIGHT + 14.0
        );
    }

    svg.push_str("</svg>\n");
    svg
}
