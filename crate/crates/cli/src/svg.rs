//! Minimal line-plot SVG writer. Output depends only on the input data.

use std::fmt::Write;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];
const PLOT_WIDTH: f64 = 720.0;
const LEGEND_WIDTH: f64 = 200.0;
const PAD: f64 = 40.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// Polylines; a gap in the data starts a new one.
    pub segments: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Same scale on both axes (plan views).
    pub equal_aspect: bool,
    pub series: Vec<Series>,
}

fn bounds(series: &[Series]) -> Option<[f64; 4]> {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    let mut any = false;
    for p in series.iter().flat_map(|s| s.segments.iter().flatten()) {
        if p[0].is_finite() && p[1].is_finite() {
            b = [b[0].min(p[0]), b[1].max(p[0]), b[2].min(p[1]), b[3].max(p[1])];
            any = true;
        }
    }
    any.then_some(b)
}

/// Expands [lo, hi] by 5% of its width on each side.
fn with_margin(lo: f64, hi: f64) -> (f64, f64) {
    let w = hi - lo;
    let w = if w > 0.0 { w } else { lo.abs().max(1.0) * 1e-3 };
    (lo - 0.05 * w, hi + 0.05 * w)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Figure {
    pub fn render(&self) -> String {
        let [x0, x1, y0, y1] = bounds(&self.series).unwrap_or([0.0, 1.0, 0.0, 1.0]);
        let (x0, x1) = with_margin(x0, x1);
        let (y0, y1) = with_margin(y0, y1);
        let plot_h = if self.equal_aspect {
            (PLOT_WIDTH * (y1 - y0) / (x1 - x0)).clamp(120.0, 1600.0)
        } else {
            0.6 * PLOT_WIDTH
        };
        let width = PLOT_WIDTH + LEGEND_WIDTH + 2.0 * PAD;
        let height = plot_h + 2.0 * PAD;
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * PLOT_WIDTH;
        // SVG y grows downward.
        let sy = |y: f64| PAD + (y1 - y) / (y1 - y0) * plot_h;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width:.1} {height:.1}" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect x="0" y="0" width="{width:.1}" height="{height:.1}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r##"<rect x="{PAD:.1}" y="{PAD:.1}" width="{PLOT_WIDTH:.1}" height="{plot_h:.1}" fill="none" stroke="#888"/>"##
        );
        let _ = writeln!(out, r#"<text x="{PAD:.1}" y="{:.1}">{}</text>"#, PAD - 14.0, escape(&self.title));
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            PAD + PLOT_WIDTH / 2.0,
            height - 8.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="12" y="{:.1}" text-anchor="middle" transform="rotate(-90 12 {:.1})">{}</text>"#,
            PAD + plot_h / 2.0,
            PAD + plot_h / 2.0,
            escape(&self.y_label)
        );
        for (x, anchor) in [(x0, "start"), (x1, "end")] {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}" font-size="10">{}</text>"#,
                sx(x),
                PAD + plot_h + 14.0,
                tick(x)
            );
        }
        for y in [y0, y1] {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#,
                PAD - 4.0,
                sy(y) + 4.0,
                tick(y)
            );
        }

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            for seg in &s.segments {
                let pts: Vec<String> = seg
                    .iter()
                    .filter(|p| p[0].is_finite() && p[1].is_finite())
                    .map(|p| format!("{:.2},{:.2}", sx(p[0]), sy(p[1])))
                    .collect();
                match pts.len() {
                    0 => {}
                    1 => {
                        let (x, y) = pts[0].split_once(',').expect("formatted as x,y");
                        let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="1.5" fill="{color}"/>"#);
                    }
                    _ => {
                        let _ = writeln!(
                            out,
                            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                            pts.join(" ")
                        );
                    }
                }
            }
            let ly = PAD + 16.0 * i as f64 + 8.0;
            let lx = PAD + PLOT_WIDTH + 16.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
                lx + 20.0
            );
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label));
        }
        out.push_str("</svg>\n");
        out
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-3..1e5).contains(&v.abs()) {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}
