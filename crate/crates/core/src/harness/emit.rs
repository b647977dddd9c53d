//! CSV tables and self-contained SVG plots.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! results give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::bench::TimingRow;
use super::bounds::BoundRow;
use super::calibrate::{CalibrationRecord, SurfaceCell};
use super::roc::RocCurve;
use crate::error::{Error, Result};

pub const ROC_HEADER: [&str; 11] = ["detector", "scenario", "N", "M", "c_r", "T", "trials", "seed", "threshold", "pf", "pd"];
pub const BOUNDS_HEADER: [&str; 6] = ["approach", "c_r", "d_b", "d_b_stderr", "p_ub", "method"];
pub const TIMING_HEADER: [&str; 8] = ["approach", "N", "M", "c_r", "T", "mean_seconds", "std_seconds", "evals"];
pub const CALIBRATION_HEADER: [&str; 14] = [
    "detector",
    "scenario",
    "N",
    "M",
    "c_r",
    "T",
    "trials",
    "seed",
    "alpha",
    "threshold",
    "achieved_pf",
    "ci_low",
    "ci_high",
    "analytic_threshold",
];
pub const SURFACE_HEADER: [&str; 10] =
    ["detector", "N", "M", "c_r", "T", "a0", "inv_lambda0", "alpha", "threshold", "analytic_threshold"];

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn table<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn roc_csv<W: Write>(out: W, curves: &[RocCurve]) -> Result<()> {
    let rows = curves.iter().flat_map(|c| {
        c.points.iter().map(move |p| {
            vec![
                c.detector.clone(),
                c.scenario.clone(),
                c.n.to_string(),
                c.m.to_string(),
                c.c_r.to_string(),
                c.t.to_string(),
                c.trials.to_string(),
                c.seed.to_string(),
                p.threshold.to_string(),
                p.pf.to_string(),
                p.pd.to_string(),
            ]
        })
    });
    table(out, &ROC_HEADER, rows)
}

pub fn bounds_csv<W: Write>(out: W, rows: &[BoundRow]) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![
            r.report.approach.clone(),
            r.c_r.to_string(),
            r.report.d_b.to_string(),
            opt(r.report.stderr),
            r.report.p_ub.to_string(),
            r.report.method.label(),
        ]
    });
    table(out, &BOUNDS_HEADER, rows)
}

pub fn timing_csv<W: Write>(out: W, rows: &[TimingRow]) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![
            r.approach.clone(),
            r.n.to_string(),
            r.m.to_string(),
            r.c_r.to_string(),
            r.t.to_string(),
            r.mean_seconds.to_string(),
            r.std_seconds.to_string(),
            r.evals.to_string(),
        ]
    });
    table(out, &TIMING_HEADER, rows)
}

pub fn calibration_csv<W: Write>(out: W, records: &[CalibrationRecord]) -> Result<()> {
    let rows = records.iter().map(|r| {
        let c = &r.calibration;
        vec![
            r.detector.clone(),
            r.scenario.clone(),
            r.n.to_string(),
            r.m.to_string(),
            r.c_r.to_string(),
            r.t.to_string(),
            c.trials.to_string(),
            r.seed.to_string(),
            c.alpha.to_string(),
            c.threshold.to_string(),
            c.achieved_pf.to_string(),
            c.ci_low.to_string(),
            c.ci_high.to_string(),
            opt(r.analytic_threshold),
        ]
    });
    table(out, &CALIBRATION_HEADER, rows)
}

pub fn surface_csv<W: Write>(out: W, cells: &[SurfaceCell]) -> Result<()> {
    let rows = cells.iter().map(|s| {
        let r = &s.record;
        vec![
            r.detector.clone(),
            r.n.to_string(),
            r.m.to_string(),
            r.c_r.to_string(),
            r.t.to_string(),
            s.a0.to_string(),
            s.inv_lambda0.to_string(),
            r.calibration.alpha.to_string(),
            r.calibration.threshold.to_string(),
            opt(r.analytic_threshold),
        ]
    });
    table(out, &SURFACE_HEADER, rows)
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn px(pf: f64) -> f64 {
    MARGIN + pf * (WIDTH - 2.0 * MARGIN)
}

fn py(pd: f64) -> f64 {
    HEIGHT - MARGIN - pd * (HEIGHT - 2.0 * MARGIN)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Inverse of the plot transform, for reading coordinates back from a rendered file.
pub fn roc_svg_to_data(x: f64, y: f64) -> (f64, f64) {
    ((x - MARGIN) / (WIDTH - 2.0 * MARGIN), (HEIGHT - MARGIN - y) / (HEIGHT - 2.0 * MARGIN))
}

/// One polyline per curve, drawn from `(1,1)` through the points in
/// threshold order to `(0,0)`.
pub fn roc_svg(curves: &[RocCurve]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{w}" fill="none" stroke="black"/>"#,
        w = WIDTH - 2.0 * MARGIN
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">P_F</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">P_D</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = vec![(1.0, 1.0)];
        pts.extend(c.points.iter().map(|p| (p.pf, p.pd)));
        pts.push((0.0, 0.0));
        let path: Vec<String> = pts.iter().map(|(f, d)| format!("{:.2},{:.2}", px(*f), py(*d))).collect();
        let label = escape(&format!("{} c_r={} T={} AUC={:.3}", c.detector, c.c_r, c.t, c.auc));
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{label}</title></polyline>"#,
            path.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{label}</text>"#,
            MARGIN + 160.0,
            HEIGHT - MARGIN - 10.0 - 14.0 * i as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Heatmap of a threshold surface over the `(a0, 1/λ0)` grid.
pub fn surface_svg(title: &str, cells: &[SurfaceCell]) -> String {
    let mut xs: Vec<f64> = cells.iter().map(|c| c.a0).collect();
    let mut ys: Vec<f64> = cells.iter().map(|c| c.inv_lambda0).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let values: Vec<f64> = cells.iter().map(|c| c.record.calibration.threshold).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cw = (WIDTH - 2.0 * MARGIN) / xs.len().max(1) as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / ys.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{} (min {:.4e}, max {:.4e})</text>"#,
        WIDTH / 2.0,
        escape(title),
        lo,
        hi
    );
    for c in cells {
        let i = xs.iter().position(|x| *x == c.a0).unwrap_or(0);
        let j = ys.iter().position(|y| *y == c.inv_lambda0).unwrap_or(0);
        let t = (c.record.calibration.threshold - lo) / span;
        // blue (low) to red (high)
        let (r, b) = ((255.0 * t).round() as u8, (255.0 * (1.0 - t)).round() as u8);
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#{r:02x}40{b:02x}"><title>a0={} 1/lambda0={}: {}</title></rect>"##,
            MARGIN + i as f64 * cw,
            HEIGHT - MARGIN - (j + 1) as f64 * ch,
            cw,
            ch,
            c.a0,
            c.inv_lambda0,
            c.record.calibration.threshold
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">a0</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">1/lambda0</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    s.push_str("</svg>\n");
    s
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// Writes `roc.csv` and `roc.svg` into `dir`.
pub fn write_roc(dir: &Path, curves: &[RocCurve]) -> Result<()> {
    ensure_dir(dir)?;
    roc_csv(create(&dir.join("roc.csv"))?, curves)?;
    fs::write(dir.join("roc.svg"), roc_svg(curves))?;
    Ok(())
}

pub fn write_bounds(dir: &Path, rows: &[BoundRow]) -> Result<()> {
    ensure_dir(dir)?;
    bounds_csv(create(&dir.join("bounds.csv"))?, rows)
}

pub fn write_timing(dir: &Path, rows: &[TimingRow]) -> Result<()> {
    ensure_dir(dir)?;
    timing_csv(create(&dir.join("timing.csv"))?, rows)
}

pub fn write_calibration(dir: &Path, records: &[CalibrationRecord]) -> Result<()> {
    ensure_dir(dir)?;
    calibration_csv(create(&dir.join("calibration.csv"))?, records)
}

/// Writes `surface.csv` and one heatmap per detector and alpha.
pub fn write_surface(dir: &Path, cells: &[SurfaceCell]) -> Result<()> {
    ensure_dir(dir)?;
    surface_csv(create(&dir.join("surface.csv"))?, cells)?;
    let mut keys: Vec<(String, usize, f64)> = Vec::new();
    for c in cells {
        let key = (c.record.detector.clone(), c.record.m, c.record.calibration.alpha);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for (det, m, alpha) in keys {
        let group: Vec<SurfaceCell> = cells
            .iter()
            .filter(|c| c.record.detector == det && c.record.m == m && c.record.calibration.alpha == alpha)
            .cloned()
            .collect();
        let name = format!("surface_{}_m{m}_a{alpha}.svg", det.replace(':', "-"));
        fs::write(dir.join(name), surface_svg(&format!("{det} threshold, alpha={alpha}"), &group))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::roc::{roc_from_scores, RocPoint};

    fn curve(points: Vec<RocPoint>, auc: f64) -> RocCurve {
        RocCurve {
            detector: "c:GA".into(),
            scenario: "case2".into(),
            n: 10,
            m: 1,
            c_r: 0.1,
            t: 1,
            trials: 100,
            seed: 3,
            points,
            auc,
        }
    }

    #[test]
    fn empty_results_give_header_only() {
        let mut buf = Vec::new();
        roc_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", ROC_HEADER.join(",")));
        let mut buf = Vec::new();
        bounds_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "approach,c_r,d_b,d_b_stderr,p_ub,method\n");
        let mut buf = Vec::new();
        timing_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "approach,N,M,c_r,T,mean_seconds,std_seconds,evals\n");
    }

    #[test]
    fn one_row_per_point() {
        let (points, auc) = roc_from_scores(&[0.0, 1.0, 2.0], &[1.5, 2.5, 3.5], 5);
        let k = points.len();
        let mut buf = Vec::new();
        roc_csv(&mut buf, &[curve(points, auc)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), k + 1);
        assert!(text.lines().nth(1).unwrap().starts_with("c:GA,case2,10,1,0.1,1,100,3,"));
    }

    #[test]
    fn svg_polyline_is_monotone() {
        let h0: Vec<f64> = (0..50).map(|i| f64::from(i) * 0.1).collect();
        let h1: Vec<f64> = (0..50).map(|i| f64::from(i) * 0.1 + 1.0).collect();
        let (points, auc) = roc_from_scores(&h0, &h1, 64);
        let svg = roc_svg(&[curve(points, auc)]);
        let attr = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        let data: Vec<(f64, f64)> = attr
            .split_whitespace()
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                roc_svg_to_data(x.parse().unwrap(), y.parse().unwrap())
            })
            .collect();
        for w in data.windows(2) {
            assert!(w[1].0 <= w[0].0 + 1e-9);
            assert!(w[1].1 <= w[0].1 + 1e-9);
        }
    }
}
