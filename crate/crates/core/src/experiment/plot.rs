//! Hand-written SVG line charts.
//!
//! Every chart uses an 800×600 viewBox. The plot area spans x ∈ [80, 760] and
//! y ∈ [60, 520]; data coordinates map linearly onto it with 5% padding on the
//! y range. Non-finite points break a line. Error bars span ±1 standard
//! deviation.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::thermo::{Quantity, ThermoCurves};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 760.0;
const TOP: f64 = 60.0;
const BOTTOM: f64 = 520.0;
const COLOURS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub sd: Option<&'a [f64]>,
}

fn y_range(series: &[Series]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for (i, &y) in s.y.iter().enumerate() {
            if !y.is_finite() {
                continue;
            }
            let d = s.sd.map_or(0.0, |b| if b[i].is_finite() { b[i] } else { 0.0 });
            lo = lo.min(y - d);
            hi = hi.max(y + d);
        }
    }
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn x_range(series: &[Series]) -> (f64, f64) {
    let xs = series.iter().flat_map(|s| s.x.iter().copied());
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() || hi - lo < 1e-12 {
        return (0.0, 1.0);
    }
    (lo, hi)
}

/// Line chart of `series` against β.
pub fn line_chart(title: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1) = x_range(series);
    let (y0, y1) = y_range(series);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (RIGHT - LEFT);
    let py = |y: f64| BOTTOM - (y - y0) / (y1 - y0) * (BOTTOM - TOP);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="14">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="35" text-anchor="middle" font-size="18">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        RIGHT - LEFT,
        BOTTOM - TOP
    );
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            px(xv),
            BOTTOM + 20.0,
            tick(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            py(yv) + 5.0,
            tick(yv)
        );
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">β</text>"#, (LEFT + RIGHT) / 2.0, BOTTOM + 45.0);
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        (TOP + BOTTOM) / 2.0,
        escape(y_label)
    );

    for (si, s) in series.iter().enumerate() {
        let colour = COLOURS[si % COLOURS.len()];
        let mut path = String::new();
        let mut pen_down = false;
        for (&x, &y) in s.x.iter().zip(s.y) {
            if !(x.is_finite() && y.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(path, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, px(x), py(y));
            pen_down = true;
        }
        let _ = writeln!(
            svg,
            r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            path.trim_end()
        );
        if let Some(sd) = s.sd {
            for ((&x, &y), &d) in s.x.iter().zip(s.y).zip(sd) {
                if x.is_finite() && y.is_finite() && d.is_finite() && d > 0.0 {
                    let _ = writeln!(
                        svg,
                        r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{colour}"/>"#,
                        px(x),
                        py(y - d),
                        py(y + d)
                    );
                }
            }
        }
        let ly = TOP + 20.0 + 22.0 * si as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#,
            RIGHT - 150.0,
            RIGHT - 120.0
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, RIGHT - 112.0, ly + 5.0, escape(s.label));
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Method curves to draw beside the exact reference.
pub struct CurveSet<'a> {
    pub label: &'a str,
    pub curves: &'a ThermoCurves,
}

/// Writes `plot_<Q>.svg` (methods and exact) and `plot_<Q>_error.svg`
/// (method − exact) for U, Cv, F and S. Returns the file names.
pub fn emit_plots(dir: &Path, exact: &ThermoCurves, methods: &[CurveSet]) -> Result<Vec<String>> {
    let mut written = Vec::new();
    for q in [Quantity::U, Quantity::Cv, Quantity::F, Quantity::S] {
        let mut series: Vec<Series> = methods
            .iter()
            .map(|m| Series {
                label: m.label,
                x: &m.curves.beta,
                y: m.curves.quantity(q),
                sd: m.curves.band(q),
            })
            .collect();
        series.push(Series {
            label: "exact",
            x: &exact.beta,
            y: exact.quantity(q),
            sd: None,
        });
        let name = format!("plot_{}.svg", q.name());
        let title = format!("{} vs inverse temperature", q.name());
        write(dir, &name, &line_chart(&title, q.name(), &series))?;
        written.push(name);

        let errors: Vec<Vec<f64>> = methods
            .iter()
            .map(|m| {
                m.curves
                    .quantity(q)
                    .iter()
                    .zip(exact.quantity(q))
                    .map(|(a, b)| a - b)
                    .collect()
            })
            .collect();
        let err_series: Vec<Series> = methods
            .iter()
            .zip(&errors)
            .map(|(m, e)| Series {
                label: m.label,
                x: &m.curves.beta,
                y: e,
                sd: m.curves.band(q),
            })
            .collect();
        let name = format!("plot_{}_error.svg", q.name());
        let title = format!("{} error (method − exact)", q.name());
        write(dir, &name, &line_chart(&title, &format!("Δ{}", q.name()), &err_series))?;
        written.push(name);
    }
    Ok(written)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
}
