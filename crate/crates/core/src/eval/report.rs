//! Text, CSV and SVG renderings of evaluation results.

use std::fmt::Write;

use super::align::{EvalReport, RigidTransform2D};
use crate::integrator::Trajectory;

/// One line of a report: a sequence and one of its results.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub sequence: String,
    pub report: EvalReport,
}

/// Fixed-width table, MPE in metres and percent of path length.
pub fn report_table(rows: &[ReportRow]) -> String {
    let width = rows.iter().map(|r| r.sequence.len()).max().unwrap_or(8).max(8);
    let mut out = format!("{:<width$}  {:<12}  {:>9}  {:>8}  {:>9}\n", "sequence", "method", "MPE (m)", "MPE (%)", "path (m)");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:<12}  {:>9.3}  {:>8.2}  {:>9.1}",
            r.sequence,
            r.report.baseline,
            r.report.mpe,
            100.0 * r.report.ratio,
            r.report.path_length
        );
    }
    out
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sequence", "method", "mpe_m", "mpe_ratio", "path_length_m", "align_angle_rad", "align_tx", "align_tz"])
        .expect("in-memory write");
    for r in rows {
        let e = &r.report;
        w.write_record([
            r.sequence.clone(),
            e.baseline.clone(),
            format!("{:.6}", e.mpe),
            format!("{:.6}", e.ratio),
            format!("{:.6}", e.path_length),
            format!("{:.9}", e.transform.angle),
            format!("{:.6}", e.transform.translation[0]),
            format!("{:.6}", e.transform.translation[1]),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

const COLORS: [&str; 5] = ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd"];

/// Top-down overlay of the ground truth (black) and aligned estimates.
///
/// World `x` runs right and `-z` runs up, so headings read counter-clockwise.
pub fn overlay_svg(title: &str, gt: &Trajectory, estimates: &[(&str, &Trajectory, RigidTransform2D)]) -> String {
    let mut paths: Vec<(String, &str, Vec<[f64; 2]>)> = vec![("ground truth".into(), "#000000", gt.planar())];
    for (i, (name, t, tf)) in estimates.iter().enumerate() {
        let pts = t.planar().into_iter().map(|p| tf.apply(p)).collect();
        paths.push((name.to_string(), COLORS[i % COLORS.len()], pts));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in paths.iter().flat_map(|(_, _, pts)| pts) {
        let q = [p[0], -p[1]];
        for k in 0..2 {
            lo[k] = lo[k].min(q[k]);
            hi[k] = hi[k].max(q[k]);
        }
    }
    if !lo[0].is_finite() {
        lo = [0.0; 2];
        hi = [1.0; 2];
    }
    let (size, margin) = (600.0, 40.0);
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-6);
    let scale = (size - 2.0 * margin) / span;
    let map = |p: &[f64; 2]| (margin + (p[0] - lo[0]) * scale, size - margin - (-p[1] - lo[1]) * scale);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{}" viewBox="0 0 {size} {}">"#, size + 20.0 * paths.len() as f64, size + 20.0 * paths.len() as f64);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{margin}" y="24" font-family="sans-serif" font-size="16">{}</text>"#, escape(title));
    for (name, color, pts) in &paths {
        let mut d = String::new();
        for p in pts.iter().step_by(5) {
            let (x, y) = map(p);
            let _ = write!(d, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#, d.trim_end(), escape(name));
    }
    let bar = 10f64.powf(span.log10().floor());
    let _ = writeln!(s, r#"<line x1="{margin}" y1="{y}" x2="{x2:.2}" y2="{y}" stroke="black" stroke-width="2"/><text x="{margin}" y="{ty}" font-family="sans-serif" font-size="12">{bar} m</text>"#, y = size - 15.0, x2 = margin + bar * scale, ty = size - 20.0);
    for (i, (name, color, _)) in paths.iter().enumerate() {
        let y = size + 15.0 + 20.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{margin}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#, margin + 30.0, margin + 40.0, y + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Vec3;

    fn report(name: &str, mpe: f64) -> ReportRow {
        ReportRow {
            sequence: "walk-1".into(),
            report: EvalReport {
                baseline: name.into(),
                mpe,
                ratio: mpe / 100.0,
                path_length: 100.0,
                transform: RigidTransform2D::identity(),
                errors: vec![],
            },
        }
    }

    #[test]
    fn table_and_csv_list_every_row() {
        let rows = [report("RIDI", 1.5), report("RAW", 30.0)];
        let t = report_table(&rows);
        assert!(t.contains("RIDI") && t.contains("1.50") && t.contains("30.00"));
        let c = report_csv(&rows);
        assert_eq!(c.lines().count(), 3);
        assert!(c.lines().nth(2).unwrap().starts_with("walk-1,RAW,30.000000,0.300000"));
    }

    #[test]
    fn svg_has_one_polyline_per_path() {
        let mut t = Trajectory::default();
        for i in 0..20 {
            t.push(i as f64, Vec3::new(i as f64, 0.0, -(i as f64) * 0.5), Vec3::zeros());
        }
        let svg = overlay_svg("a <b>", &t, &[("RIDI", &t, RigidTransform2D::identity())]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt;b&gt;") && svg.trim_end().ends_with("</svg>"));
    }
}
