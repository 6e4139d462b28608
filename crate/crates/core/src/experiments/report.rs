use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::rate::RateReport;
use super::singularity::SingularityReport;
use crate::stats::{LineFit, Z95};
use crate::{Error, Result};

/// One CSV row: a level or `ε` with its value and CI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub series: String,
    pub x: f64,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn write_csv(path: impl AsRef<Path>, rows: &[CsvRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

pub fn rate_rows(r: &RateReport) -> Vec<CsvRow> {
    let mut rows: Vec<CsvRow> = r
        .levels
        .iter()
        .map(|l| CsvRow {
            series: "error".into(),
            x: l.n,
            value: l.error,
            ci_low: l.ci_low,
            ci_high: l.ci_high,
        })
        .collect();
    rows.extend(r.levels.iter().filter_map(|l| {
        let (d, se) = (l.raw_difference?, l.raw_se?);
        Some(CsvRow {
            series: "raw_difference".into(),
            x: l.n,
            value: d,
            ci_low: (d - Z95 * se).max(0.0),
            ci_high: d + Z95 * se,
        })
    }));
    rows
}

pub fn singularity_rows(r: &SingularityReport) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for e in &r.rows {
        for (name, p) in [
            ("hit_reference", &e.hit_reference),
            ("hit_level", &e.hit_level),
            ("hit_cutoff_reference", &e.hit_cutoff_reference),
            ("hit_cutoff_level", &e.hit_cutoff_level),
        ] {
            rows.push(CsvRow {
                series: name.into(),
                x: e.eps,
                value: p.p,
                ci_low: p.ci_low,
                ci_high: p.ci_high,
            });
        }
        let (m, se) = (e.total_error.mean.abs(), e.total_error.se);
        rows.push(CsvRow {
            series: "total_error".into(),
            x: e.eps,
            value: m,
            ci_low: (m - Z95 * se).max(0.0),
            ci_high: m + Z95 * se,
        });
        rows.push(CsvRow {
            series: "envelope".into(),
            x: e.eps,
            value: e.envelope,
            ci_low: e.envelope,
            ci_high: e.envelope,
        });
    }
    rows
}

/// Log-log scatter with error bars and an optional fitted line.
pub fn loglog_svg(title: &str, xlabel: &str, points: &[CsvRow], fit: Option<&LineFit>) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const M: f64 = 56.0;
    let pos: Vec<&CsvRow> = points.iter().filter(|p| p.x > 0.0 && p.value > 0.0).collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    if pos.is_empty() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">no positive values</text></svg>"#, W / 2.0, H / 2.0);
        return svg;
    }
    let lx: Vec<f64> = pos.iter().map(|p| p.x.log10()).collect();
    let ly: Vec<f64> = pos
        .iter()
        .flat_map(|p| [p.value, p.ci_low, p.ci_high])
        .filter(|v| *v > 0.0)
        .map(f64::log10)
        .collect();
    let span = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo))
        }
    };
    let (x0, x1) = span(&lx);
    let (y0, y1) = span(&ly);
    let sx = |v: f64| M + (v - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |v: f64| H - M - (v - y0) / (y1 - y0) * (H - 2.0 * M);
    let _ = writeln!(
        svg,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">log10 {}</text>"#, W / 2.0, H - 16.0, escape(xlabel));
    let _ = writeln!(svg, r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">log10 value</text>"#, H / 2.0, H / 2.0);
    for (p, x) in pos.iter().zip(&lx) {
        let (cx, cy) = (sx(*x), sy(p.value.log10()));
        if p.ci_high > 0.0 {
            let lo = if p.ci_low > 0.0 { sy(p.ci_low.log10()) } else { H - M };
            let _ = writeln!(svg, r#"<line x1="{cx:.1}" y1="{lo:.1}" x2="{cx:.1}" y2="{:.1}" stroke="gray"/>"#, sy(p.ci_high.log10()));
        }
        let _ = writeln!(svg, r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="3.5" fill="steelblue"/>"#);
    }
    if let Some(f) = fit {
        let ln10 = std::f64::consts::LN_10;
        // fits are in natural logs: ln y = a + b ln x
        let y = |x: f64| (f.intercept + f.slope * x * ln10) / ln10;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="crimson" stroke-dasharray="4 3"/>"#,
            sx(x0),
            sy(y(x0)),
            sx(x1),
            sy(y(x1))
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end" fill="crimson">slope {:.3} [{:.3}, {:.3}]</text>"#,
            W - M - 4.0,
            M + 16.0,
            f.slope,
            f.ci_low,
            f.ci_high
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(x: f64, v: f64) -> CsvRow {
        CsvRow { series: "e".into(), x, value: v, ci_low: v * 0.9, ci_high: v * 1.1 }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_csv(&p, &[row(2.0, 0.5), row(4.0, 0.25)]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("series,x,value,ci_low,ci_high"));
        assert_eq!(lines.next(), Some("e,2.0,0.5,0.45,0.55"));
        assert_eq!(lines.count(), 1);
    }

    #[test]
    fn svg_is_well_formed_and_annotated() {
        let fit = crate::stats::loglog_fit(&[2.0, 4.0, 8.0], &[0.5, 0.25, 0.125]).unwrap();
        let s = loglog_svg("rate <test>", "n", &[row(2.0, 0.5), row(4.0, 0.25), row(8.0, 0.125)], Some(&fit));
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("slope -1.000"));
        assert!(s.contains("rate &lt;test&gt;"));
        assert_eq!(s.matches("<circle").count(), 3);
        let empty = loglog_svg("none", "n", &[], None);
        assert!(empty.contains("no positive values"));
    }
}
