//! SVG rendering of error tables and energy histories.

use std::fmt::Write as _;

use crate::io::ErrorRow;
use crate::lab::{fit_rows, Norm, WindowOptions};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Frame {
        let (mut x0, mut x1) = min_max(xs);
        let (mut y0, mut y1) = min_max(ys);
        if x1 - x0 < 1e-12 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn min_max(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
}

fn header(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(out, r#"<text x="{}" y="30" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 15.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn decade_ticks(out: &mut String, f: &Frame) {
    for d in f.x0.ceil() as i32..=f.x1.floor() as i32 {
        let x = f.px(d as f64);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{d}</text>"#, HEIGHT - MARGIN + 16.0);
    }
    for d in f.y0.ceil() as i32..=f.y1.floor() as i32 {
        let y = f.py(d as f64);
        let _ = writeln!(out, r#"<text x="{}" y="{y:.2}" text-anchor="end">1e{d}</text>"#, MARGIN - 4.0);
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], f: &Frame, color: &str, class: &str) {
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
    let _ = writeln!(
        out,
        r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
        coords.join(" ")
    );
}

/// Log-log error curves of `norm`, one polyline per kappa, plus a slope
/// triangle for each entry of `guides`. Without guides the fitted slopes
/// rounded to integers are used.
pub fn rates_svg(rows: &[ErrorRow], norm: Norm, guides: &[f64]) -> String {
    let pts: Vec<&ErrorRow> = rows.iter().filter(|r| norm.of(r) > 0.0 && r.mesh_size > 0.0).collect();
    let mut out = String::new();
    header(&mut out, &format!("{} error", norm.name()), "mesh size", "error");
    if pts.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let lx = |r: &ErrorRow| r.mesh_size.log10();
    let ly = |r: &ErrorRow| norm.of(r).log10();
    let f = Frame::fit(pts.iter().map(|r| lx(r)), pts.iter().map(|r| ly(r)));
    decade_ticks(&mut out, &f);

    let mut kappas: Vec<f64> = pts.iter().map(|r| r.kappa).collect();
    kappas.sort_by(f64::total_cmp);
    kappas.dedup();
    for (i, &k) in kappas.iter().enumerate() {
        let mut curve: Vec<(f64, f64)> = pts.iter().filter(|r| r.kappa == k).map(|r| (lx(r), ly(r))).collect();
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        let color = COLORS[i % COLORS.len()];
        polyline(&mut out, &curve, &f, color, "curve");
        for &(x, y) in &curve {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, f.px(x), f.py(y));
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">kappa = {k}</text>"#,
            MARGIN + 10.0,
            MARGIN + 16.0 * (i + 1) as f64
        );
    }

    let mut slopes: Vec<f64> = guides.to_vec();
    if slopes.is_empty() {
        slopes = fit_rows(rows, &WindowOptions::default())
            .iter()
            .filter(|r| r.norm == norm)
            .map(|r| r.slope.round())
            .filter(|s| *s > 0.0)
            .collect();
        slopes.sort_by(f64::total_cmp);
        slopes.dedup();
    }
    // triangles anchored near the lower right, base a quarter of the x range
    let base = 0.25 * (f.x1 - f.x0);
    for (i, &s) in slopes.iter().enumerate() {
        let x1 = f.x0 + 0.2 * (f.x1 - f.x0) + 0.3 * i as f64 * (f.x1 - f.x0);
        let x0 = x1 - base.min(0.9 * (f.y1 - f.y0) / s.abs().max(1e-9));
        let y0 = f.y0 + 0.05 * (f.y1 - f.y0);
        let y1 = y0 + s * (x1 - x0);
        let _ = writeln!(
            out,
            r#"<polygon class="guide" data-slope="{s}" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="none" stroke="gray" stroke-dasharray="4 2"/>"#,
            f.px(x0),
            f.py(y0),
            f.px(x1),
            f.py(y0),
            f.px(x1),
            f.py(y1)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" fill="gray">{s}</text>"#,
            f.px(x1) + 4.0,
            f.py(0.5 * (y0 + y1))
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Energy against step number.
pub fn history_svg(energies: &[f64]) -> String {
    let mut out = String::new();
    header(&mut out, "energy history", "step", "E_GL");
    if !energies.is_empty() {
        let pts: Vec<(f64, f64)> = energies.iter().enumerate().map(|(n, &e)| (n as f64, e)).collect();
        let f = Frame::fit(pts.iter().map(|p| p.0), pts.iter().map(|p| p.1));
        for (v, anchor, x, y) in [
            (f.y0, "end", MARGIN - 4.0, f.py(f.y0)),
            (f.y1, "end", MARGIN - 4.0, f.py(f.y1)),
        ] {
            let _ = writeln!(out, r#"<text x="{x}" y="{y:.2}" text-anchor="{anchor}">{v:.4}</text>"#);
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            f.px(f.x1),
            HEIGHT - MARGIN + 16.0,
            energies.len() - 1
        );
        polyline(&mut out, &pts, &f, COLORS[0], "curve");
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(kappa: f64) -> Vec<ErrorRow> {
        (2..6)
            .map(|l| {
                let h = 0.5f64.powi(l);
                let e = kappa * h.powi(3);
                ErrorRow {
                    kappa,
                    level: l as u32,
                    mesh_size: h,
                    err_l2_u: e,
                    err_h1k_u: e,
                    err_l2_a: e,
                    err_h1_a: e,
                    err_energy: e,
                }
            })
            .collect()
    }

    #[test]
    fn one_polyline_per_kappa_and_fitted_guide() {
        let rows = [cubic(6.0), cubic(12.0)].concat();
        let svg = rates_svg(&rows, Norm::H1kU, &[]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches(r#"data-slope="3""#).count(), 1);
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn history_has_a_single_line() {
        let svg = history_svg(&[1.0, 0.5, 0.25]);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(history_svg(&[]).matches("<polyline").count(), 0);
    }
}
