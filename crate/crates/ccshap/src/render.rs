//! Static SVG beeswarm rendering of attribution results: one horizontal
//! band per feature, one circle per evaluation row, horizontal position by
//! attribution value and color by the row's (normalized) feature value.
//! Vertical jitter is a hash of the row id, so renders are reproducible.

use std::fmt::Write as _;
use std::path::Path;

use crate::attribution::AttributionResult;
use crate::error::Result;
use crate::seed::derive_seed;

const WIDTH: f64 = 800.0;
const BAND_HEIGHT: f64 = 64.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 24.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 30.0;
const JITTER: f64 = 22.0;
const RADIUS: f64 = 2.5;

/// Low-value endpoint of the color ramp (blue).
const COLD: (f64, f64, f64) = (59.0, 76.0, 192.0);
/// High-value endpoint of the color ramp (red).
const HOT: (f64, f64, f64) = (180.0, 4.0, 38.0);

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Deterministic jitter in [-1, 1] from the row id alone.
fn jitter(feature: &str, row: usize) -> f64 {
    let h = derive_seed(0x5eed, feature, row as u64);
    (h % 10_000) as f64 / 5_000.0 - 1.0
}

fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let c = |a: f64, b: f64| (a + t * (b - a)).round() as u8;
    format!(
        "rgb({},{},{})",
        c(COLD.0, HOT.0),
        c(COLD.1, HOT.1),
        c(COLD.2, HOT.2)
    )
}

/// Render an attribution result as an SVG beeswarm. Contains exactly one
/// `<circle>` per (evaluation row, feature) pair; valid standalone XML.
pub fn render_beeswarm(result: &AttributionResult, title: &str) -> Result<String> {
    let n_features = result.features.len();
    let n_rows = result.n_rows();
    let height = MARGIN_TOP + n_features as f64 * BAND_HEIGHT + MARGIN_BOTTOM;

    // Symmetric attribution scale over all features.
    let mut max_abs: f64 = 1e-12;
    for row in &result.phi {
        for v in row {
            max_abs = max_abs.max(v.abs());
        }
    }
    let x_of = |phi: f64| {
        MARGIN_LEFT + (phi / max_abs + 1.0) / 2.0 * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    };

    let mut svg = String::new();
    writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#).ok();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    )
    .ok();
    writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape_xml(title)
    )
    .ok();
    // Zero line.
    writeln!(
        svg,
        r##"<line x1="{x0}" y1="{}" x2="{x0}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
        MARGIN_TOP - 8.0,
        height - MARGIN_BOTTOM,
        x0 = x_of(0.0)
    )
    .ok();

    for (fi, feature) in result.features.iter().enumerate() {
        let y_mid = MARGIN_TOP + (fi as f64 + 0.5) * BAND_HEIGHT;
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 10.0,
            y_mid + 4.0,
            escape_xml(feature)
        )
        .ok();

        // Normalize the feature column for the color ramp.
        let col = result.eval.column(feature)?;
        let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
            (l.min(*v), h.max(*v))
        });
        let span = if hi > lo { hi - lo } else { 1.0 };

        for row in 0..n_rows {
            let x = x_of(result.phi[fi][row]);
            let y = y_mid + jitter(feature, row) * JITTER;
            let t = (col[row] - lo) / span;
            writeln!(
                svg,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="{RADIUS}" fill="{}" fill-opacity="0.75"/>"#,
                ramp(t)
            )
            .ok();
        }
    }
    writeln!(svg, "</svg>").ok();
    Ok(svg)
}

/// Render and write to `path`.
pub fn write_beeswarm(result: &AttributionResult, title: &str, path: &Path) -> Result<()> {
    std::fs::write(path, render_beeswarm(result, title)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::shapley_values;
    use crate::dataset::Dataset;
    use crate::estimator::{EstimatorKind, EstimatorSpec};

    fn toy_result() -> AttributionResult {
        let mut d = Dataset::new(&["X1", "X2", "Y"]).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                d.push_row(&[a as f64, b as f64, (a * b) as f64]).unwrap();
            }
        }
        let spec = EstimatorSpec::new(EstimatorKind::DiscreteCpt);
        shapley_values(&d, "Y", &d, &spec).unwrap()
    }

    #[test]
    fn one_circle_per_row_and_feature() {
        let r = toy_result();
        let svg = render_beeswarm(&r, "toy").unwrap();
        let circles = svg.matches("<circle").count();
        assert_eq!(circles, r.n_rows() * r.features.len());
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn renders_are_byte_identical_and_escaped() {
        let r = toy_result();
        let a = render_beeswarm(&r, "a < b & c").unwrap();
        let b = render_beeswarm(&r, "a < b & c").unwrap();
        assert_eq!(a, b);
        assert!(a.contains("a &lt; b &amp; c"));
        // Tag balance as a cheap well-formedness proxy: every element is
        // either self-closed or one of the three explicitly closed tags.
        assert_eq!(a.matches("<svg").count(), a.matches("</svg>").count());
        assert_eq!(a.matches("<text").count(), a.matches("</text>").count());
        let self_closed = a.matches("/>").count();
        assert_eq!(
            self_closed,
            a.matches("<circle").count() + a.matches("<line").count()
        );
    }
}
