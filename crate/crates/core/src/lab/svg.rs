//! Minimal SVG line and scatter plots built from CSV text.

use std::fmt::Write;

use crate::error::{LabError, Result};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mark {
    Line,
    Points,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub mark: Mark,
}

#[derive(Clone, Debug)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// Numeric columns of a CSV table; empty cells are skipped row-wise.
pub fn columns(csv_text: &str, x: &str, ys: &[&str]) -> Result<Vec<Vec<(f64, f64)>>> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = rdr.headers().map_err(|e| LabError::Config(e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LabError::Config(format!("no column '{name}'")))
    };
    let xi = find(x)?;
    let yi: Vec<usize> = ys.iter().map(|y| find(y)).collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); ys.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| LabError::Config(e.to_string()))?;
        let Ok(xv) = rec[xi].parse::<f64>() else { continue };
        for (slot, &c) in out.iter_mut().zip(&yi) {
            if let Ok(yv) = rec[c].parse::<f64>() {
                if xv.is_finite() && yv.is_finite() {
                    slot.push((xv, yv));
                }
            }
        }
    }
    Ok(out)
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-300);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn render(&self) -> String {
        let pts = self.series.iter().flat_map(|s| s.points.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 <= 0.0 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 <= 1e-12 * y1.abs().max(1.0) {
            let pad = 0.5 * y1.abs().max(1.0);
            y0 -= pad;
            y1 += pad;
        }
        let pad = 0.05 * (y1 - y0);
        y0 -= pad;
        y1 += pad;
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for t in nice_ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, fmt_tick(t));
        }
        for t in nice_ticks(y0, y1) {
            let y = sy(t);
            let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, fmt_tick(t));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 10.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, ser) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            match ser.mark {
                Mark::Line => {
                    let path: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                    let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
                }
                Mark::Points => {
                    for &(x, y) in &ser.points {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
                    }
                }
            }
            let ly = TOP + 14.0 + 16.0 * i as f64;
            let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, LEFT + 10.0, LEFT + 30.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, LEFT + 36.0, ly + 4.0, escape(&ser.label));
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_from_csv_columns() {
        let text = "r,N,M\n0.1,1.0,\n0.2,2.0,3\n0.3,,4\n";
        let cols = columns(text, "r", &["N", "M"]).unwrap();
        assert_eq!(cols[0], vec![(0.1, 1.0), (0.2, 2.0)]);
        assert_eq!(cols[1], vec![(0.2, 3.0), (0.3, 4.0)]);
        let plot = Plot {
            title: "N <r>".into(),
            x_label: "r".into(),
            y_label: "N".into(),
            series: vec![Series { label: "N".into(), points: cols[0].clone(), mark: Mark::Line }],
        };
        let svg = plot.render();
        assert!(svg.starts_with("<svg") && svg.contains("polyline") && svg.contains("N &lt;r&gt;"));
        assert_eq!(svg, plot.render());
        assert!(columns(text, "r", &["missing"]).is_err());
    }

    #[test]
    fn ticks_cover_range() {
        let t = nice_ticks(0.1, 0.9);
        assert!(t.len() >= 4 && t[0] >= 0.1 && *t.last().unwrap() <= 0.9);
    }
}
