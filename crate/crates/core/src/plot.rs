//! Minimal SVG line charts and histograms, plus the CSV reader they need.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Columns of a comma-separated file with one header row; `#` lines are
/// skipped.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Table::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Table> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
        let header: Vec<String> = match lines.next() {
            Some((_, h)) => h.split(',').map(|s| s.trim().to_string()).collect(),
            None => {
                return Err(Error::Parse {
                    line: 0,
                    reason: "empty table".into(),
                })
            }
        };
        let mut rows = vec![];
        for (i, l) in lines {
            let row = l
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: i + 1,
                        reason: format!("{s:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != header.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("{} fields, header has {}", row.len(), header.len()),
                });
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            reason: format!("no column {name:?}"),
        })?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Panel {
    Lines {
        title: String,
        x_label: String,
        y_label: String,
        series: Vec<Series>,
    },
    /// Bars from (lo, hi, height) with an overlaid reference curve.
    Histogram {
        title: String,
        x_label: String,
        bars: Vec<(f64, f64, f64)>,
        reference: Series,
    },
}

const W: f64 = 640.0;
const H: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Roughly five round tick values covering [lo, hi].
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = vec![];
    while t <= hi + 1e-9 * span {
        out.push(if t.abs() < 1e-12 * span { 0.0 } else { t });
        t += step;
    }
    out
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        return (lo - 0.5 * (1.0 + lo.abs()) * 1e-3, hi + 0.5 * (1.0 + hi.abs()) * 1e-3);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn render_panel(svg: &mut String, panel: &Panel, y0: f64) {
    let (title, x_label, y_label) = match panel {
        Panel::Lines {
            title, x_label, y_label, ..
        } => (title, x_label, y_label.as_str()),
        Panel::Histogram { title, x_label, .. } => (title, x_label, "density"),
    };
    let all_x: Vec<f64>;
    let all_y: Vec<f64>;
    match panel {
        Panel::Lines { series, .. } => {
            all_x = series.iter().flat_map(|s| s.x.iter().copied()).collect();
            all_y = series.iter().flat_map(|s| s.y.iter().copied()).collect();
        }
        Panel::Histogram { bars, reference, .. } => {
            all_x = bars.iter().flat_map(|b| [b.0, b.1]).chain(reference.x.iter().copied()).collect();
            all_y = bars.iter().map(|b| b.2).chain(reference.y.iter().copied()).chain([0.0]).collect();
        }
    }
    let (xl, xh) = range(all_x.iter().copied());
    let (yl, yh) = range(all_y.iter().copied());
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - xl) / (xh - xl) * pw;
    let sy = |y: f64| y0 + TOP + ph - (y - yl) / (yh - yl) * ph;
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="15" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        y0 + 22.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#,
        y0 + TOP
    );
    for t in ticks(xl, xh) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            y0 + TOP + ph,
            y0 + TOP + ph + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            y0 + TOP + ph + 18.0,
            fmt_tick(t)
        );
    }
    for t in ticks(yl, yh) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#,
            LEFT - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        y0 + H - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{0}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        y0 + TOP + ph / 2.0,
        escape(y_label)
    );
    let polyline = |svg: &mut String, s: &Series, color: &str| {
        let pts: Vec<String> =
            s.x.iter()
                .zip(&s.y)
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
    };
    let legend = |svg: &mut String, i: usize, label: &str, color: &str| {
        let y = y0 + TOP + 14.0 + 18.0 * i as f64;
        let x = W - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#,
            x + 20.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
            x + 26.0,
            y + 4.0,
            escape(label)
        );
    };
    match panel {
        Panel::Lines { series, .. } => {
            for (i, s) in series.iter().enumerate() {
                let color = COLORS[i % COLORS.len()];
                polyline(svg, s, color);
                legend(svg, i, &s.label, color);
            }
        }
        Panel::Histogram { bars, reference, .. } => {
            for &(a, b, h) in bars {
                let _ = writeln!(
                    svg,
                    r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#aec7e8" stroke="#1f77b4"/>"##,
                    sx(a),
                    sy(h),
                    (sx(b) - sx(a)).max(0.0),
                    (sy(0.0) - sy(h)).max(0.0)
                );
            }
            polyline(svg, reference, COLORS[1]);
            legend(svg, 0, "trajectories", COLORS[0]);
            legend(svg, 1, &reference.label, COLORS[1]);
        }
    }
}

/// Stack panels vertically into one SVG document.
pub fn render(panels: &[Panel]) -> String {
    let mut svg = String::new();
    let total = H * panels.len().max(1) as f64;
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{total}" viewBox="0 0 {W} {total}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut svg, p, H * i as f64);
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_table() {
        let t = Table::parse("# note\nt,a\n0,1.5\n1e0,2\n").unwrap();
        assert_eq!(t.column("a").unwrap(), vec![1.5, 2.0]);
        assert!(Table::parse("t,a\n0\n").is_err());
        assert!(t.column("b").is_err());
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert!(ticks(-3.3, 460.0).contains(&100.0));
    }

    #[test]
    fn svg_has_labels() {
        let s = Series {
            label: "|001>".into(),
            x: vec![0.0, 1.0],
            y: vec![1.0, 0.0],
        };
        let svg = render(&[Panel::Lines {
            title: "populations".into(),
            x_label: "t [fs]".into(),
            y_label: "p".into(),
            series: vec![s],
        }]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("|001&gt;"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
