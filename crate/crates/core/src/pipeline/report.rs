//! CSV, JSON and SVG renderings of evaluation results.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::pipeline::{EvalReport, ExperimentMatrix, Method, Subset};

/// One row per (source, target, method, subset).
pub fn matrix_csv(matrix: &ExperimentMatrix, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in matrix.rows() {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| crate::error::Error::io("<csv>", e))?;
    Ok(())
}

pub fn matrix_json(matrix: &ExperimentMatrix) -> Result<String> {
    Ok(serde_json::to_string_pretty(matrix)?)
}

/// Summary line plus one line per sample.
pub fn eval_csv(label: &str, report: &EvalReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "subset", "mean_error", "failure_rate", "sample_count"])?;
    w.write_record([
        label.to_string(),
        report.subset.to_string(),
        report.mean_error.to_string(),
        report.failure_rate.to_string(),
        report.sample_count().to_string(),
    ])?;
    w.flush().map_err(|e| crate::error::Error::io("<csv>", e))?;
    Ok(())
}

pub fn per_sample_csv(ids: &[String], report: &EvalReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample", "error"])?;
    for (id, e) in ids.iter().zip(&report.per_sample_errors) {
        w.write_record([id.clone(), e.to_string()])?;
    }
    w.flush().map_err(|e| crate::error::Error::io("<csv>", e))?;
    Ok(())
}

const COLORS: [(Method, &str); 3] = [
    (Method::ClosedWorld, "#9e9e9e"),
    (Method::NaiveFusion, "#64b5f6"),
    (Method::Tcr, "#e53935"),
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grouped bar chart for one target: common-landmark error of every method,
/// one group per source dataset.
pub fn target_svg(matrix: &ExperimentMatrix, target: &str) -> String {
    let groups: Vec<_> = matrix
        .off_diagonal()
        .filter(|c| c.target == target)
        .map(|c| {
            let bars: Vec<_> = COLORS
                .iter()
                .map(|(m, _)| c.report(*m, Subset::Common).map(|r| r.mean_error))
                .collect();
            (c.source.clone(), bars)
        })
        .collect();
    let max = groups
        .iter()
        .flat_map(|g| g.1.iter().flatten())
        .fold(1e-9f64, |a, &b| a.max(b));
    let (bar_w, gap, plot_h, left, top) = (28.0, 30.0, 220.0, 50.0, 40.0);
    let group_w = COLORS.len() as f64 * bar_w + gap;
    let width = left + groups.len().max(1) as f64 * group_w + 140.0;
    let height = top + plot_h + 50.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="20">target {} (common landmarks, RMSE % interocular)</text>"#,
        escape(target)
    );
    let base = top + plot_h;
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{base}" x2="{:.1}" y2="{base}" stroke="black"/>"#,
        width - 130.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{base}" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<text x="5" y="{:.1}">{max:.2}</text>"#, top + 4.0);
    for (gi, (source, bars)) in groups.iter().enumerate() {
        let x0 = left + gap / 2.0 + gi as f64 * group_w;
        for (bi, v) in bars.iter().enumerate() {
            let Some(v) = v else { continue };
            let h = plot_h * v / max;
            let x = x0 + bi as f64 * bar_w;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"><title>{v:.3}</title></rect>"#,
                base - h,
                bar_w - 4.0,
                COLORS[bi].1
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + COLORS.len() as f64 * bar_w / 2.0,
            base + 18.0,
            escape(source)
        );
    }
    let lx = width - 120.0;
    for (i, (m, color)) in COLORS.iter().enumerate() {
        let y = top + 10.0 + i as f64 * 18.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{:.1}" width="12" height="12" fill="{color}"/>"#,
            y - 10.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}">{m}</text>"#, lx + 16.0);
    }
    s.push_str("</svg>\n");
    s
}
