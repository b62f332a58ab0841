//! Minimal SVG line plots.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::experiments::records::parse_run_csv;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let f = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    f * mag
}

/// Render series as polylines. With `log_y`, nonpositive values are dropped.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let usable = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!log_y || y > 0.0);

    let pts = || series.iter().flat_map(|s| s.points.iter().filter(|p| usable(p)));
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(ty(y));
        y1 = y1.max(ty(y));
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if log_y {
        y0 = y0.floor();
        y1 = y1.ceil();
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    // x ticks
    let step = nice_step(x1 - x0);
    let mut t = (x0 / step).ceil() * step;
    while t <= x1 + 1e-9 * step {
        let px = sx(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="#ddd"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            TOP,
            TOP + ph,
            TOP + ph + 18.0,
            t
        );
        t += step;
    }
    // y ticks
    let step = if log_y { ((y1 - y0) / 8.0).ceil().max(1.0) } else { nice_step(y1 - y0) };
    let mut t = (y0 / step).ceil() * step;
    while t <= y1 + 1e-9 * step {
        let py = sy(t);
        let label = if log_y { format!("1e{t}") } else { format!("{t}") };
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            py + 4.0
        );
        t += step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|p| usable(p))
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(ty(y))))
            .collect();
        if !coords.is_empty() {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            );
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Which run column to plot against `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunColumn {
    Objective,
    GradFro,
}

/// Plot one column of several run CSVs. The output depends only on the
/// labels and CSV contents.
pub fn plot_run_csvs(column: RunColumn, title: &str, runs: &[(String, String)]) -> Result<String> {
    let series = runs
        .iter()
        .map(|(label, csv)| {
            let rows = parse_run_csv(csv)?;
            Ok(Series {
                label: label.clone(),
                points: rows
                    .iter()
                    .map(|r| {
                        let y = match column {
                            RunColumn::Objective => r.f,
                            RunColumn::GradFro => r.grad_fro,
                        };
                        (r.k as f64, y)
                    })
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let y_label = match column {
        RunColumn::Objective => "objective f(X)",
        RunColumn::GradFro => "gradient Frobenius norm",
    };
    Ok(line_plot(title, "iteration k", y_label, &series, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_polylines_and_legend() {
        let s = vec![
            Series {
                label: "a<b".into(),
                points: vec![(0.0, 1.0), (1.0, 0.1), (2.0, 0.0)],
            },
            Series {
                label: "flat".into(),
                points: vec![(0.0, 5.0)],
            },
        ];
        let svg = line_plot("t", "x", "y", &s, true);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b"));
        // The zero is dropped on a log axis.
        let first = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(first.matches(',').count(), 2);
    }

    #[test]
    fn empty_input_still_renders() {
        let svg = line_plot("t", "x", "y", &[], false);
        assert!(svg.contains("</svg>"));
    }

    #[test]
    fn plot_is_function_of_csv() {
        let csv = "k,f,grad_fro,grad_nuc,rank_used,residual,elapsed_ns\n0,1,2,3,,,5\n1,0.5,1,1.5,,,9\n";
        let runs = vec![("sgdm".to_string(), csv.to_string())];
        let a = plot_run_csvs(RunColumn::GradFro, "g", &runs).unwrap();
        let b = plot_run_csvs(RunColumn::GradFro, "g", &runs).unwrap();
        assert_eq!(a, b);
        assert!(plot_run_csvs(RunColumn::Objective, "g", &[("x".into(), "bad".into())]).is_err());
    }
}
