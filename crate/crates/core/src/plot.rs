//! Static SVG figures: per-cycle peak force with fitted decays, the
//! long-life force curve per profile, and a trial time series.

use std::fmt::Write as _;

use crate::analysis::{ForceCurve, TrialAnalysis};
use crate::harness::{Profile, TrialLog};

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Round step for about `n` ticks over `span`.
fn tick_step(span: f64, n: f64) -> f64 {
    let raw = (span / n).max(f64::MIN_POSITIVE);
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn fit(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Axes {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
        };
        let (mut x0, mut x1) = range(&mut { xs });
        let (mut y0, mut y1) = range(&mut { ys });
        if !x0.is_finite() {
            (x0, x1) = (0.0, 1.0);
        }
        if !y0.is_finite() {
            (y0, y1) = (0.0, 1.0);
        }
        if x1 - x0 < 1e-12 {
            (x0, x1) = (x0 - 0.5, x1 + 0.5);
        }
        let pad = 0.05 * (y1 - y0).max(1e-3);
        Axes { x0, x1, y0: y0 - pad, y1: y1 + pad }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }

    fn frame(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (l, r, t, b) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = writeln!(out, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
        let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, (l + r) / 2.0, escape(title));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, (l + r) / 2.0, H - 15.0, escape(xlabel));
        let _ = writeln!(
            out,
            r#"<text x="18" y="{0}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {0})">{1}</text>"#,
            (t + b) / 2.0,
            escape(ylabel)
        );
        let step = tick_step(self.x1 - self.x0, 6.0);
        let mut x = (self.x0 / step).ceil() * step;
        while x <= self.x1 + 1e-9 * step {
            let p = self.px(x);
            let _ = writeln!(out, r#"<line x1="{p:.2}" y1="{b}" x2="{p:.2}" y2="{}" stroke="black"/>"#, b + 5.0);
            let _ = writeln!(out, r#"<text x="{p:.2}" y="{}" text-anchor="middle" font-size="11">{}</text>"#, b + 18.0, fmt_tick(x, step));
            x += step;
        }
        let step = tick_step(self.y1 - self.y0, 5.0);
        let mut y = (self.y0 / step).ceil() * step;
        while y <= self.y1 + 1e-9 * step {
            let p = self.py(y);
            let _ = writeln!(out, r#"<line x1="{}" y1="{p:.2}" x2="{l}" y2="{p:.2}" stroke="black"/>"#, l - 5.0);
            let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"#, l - 8.0, p + 4.0, fmt_tick(y, step));
            y += step;
        }
    }

    fn points(&self, pts: impl Iterator<Item = (f64, f64)>) -> String {
        pts.map(|(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect::<Vec<_>>().join(" ")
    }
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.decimals$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    )
}

fn legend(out: &mut String, row: usize, col: &str, label: &str) {
    let x = W - RIGHT + 12.0;
    let y = TOP + 10.0 + 18.0 * row as f64;
    let _ = writeln!(out, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{col}" stroke-width="2"/>"#, x + 20.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="11">{}</text>"#, x + 26.0, y + 4.0, escape(label));
}

/// Peak force per cycle, one `<polyline>` per trial, fitted decay as a
/// dashed `<path>` in the same color.
pub fn fmax_svg(title: &str, trials: &[&TrialAnalysis]) -> String {
    let xs = trials.iter().flat_map(|t| t.series.points.iter().map(|p| f64::from(p.0)));
    let ys = trials.iter().flat_map(|t| t.series.points.iter().map(|p| p.1).chain([t.fit.f_infinity]));
    let ax = Axes::fit(xs, ys);
    let mut out = open();
    ax.frame(&mut out, title, "cycle", "peak force (N)");
    for (i, t) in trials.iter().enumerate() {
        let col = color(i);
        let pts = ax.points(t.series.points.iter().map(|&(v, f)| (f64::from(v), f)));
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{col}" stroke-width="1" points="{pts}"/>"#);
        let (v0, v1) = (ax.x0, ax.x1);
        let fit_pts: Vec<String> = (0..=100)
            .map(|k| {
                let v = v0 + (v1 - v0) * f64::from(k) / 100.0;
                format!("{:.2},{:.2}", ax.px(v), ax.py(t.fit.model.eval(v)))
            })
            .collect();
        let _ = writeln!(out, r#"<path fill="none" stroke="{col}" stroke-dasharray="5,3" d="M {}"/>"#, fit_pts.join(" L "));
        legend(&mut out, i, col, &format!("{} C  F\u{221e}={:.3}", t.t_set, t.fit.f_infinity));
    }
    out.push_str("</svg>\n");
    out
}

/// F-infinity against limit temperature per profile, with an optional
/// vertical marker at the selected limit.
pub fn curve_svg(curves: &[ForceCurve], limit: Option<f64>) -> String {
    let xs = curves.iter().flat_map(|c| c.points.iter().map(|p| p.t_set));
    let ys = curves.iter().flat_map(|c| c.points.iter().map(|p| p.f_inf));
    let ax = Axes::fit(xs, ys);
    let mut out = open();
    ax.frame(&mut out, "Long-life force", "limit temperature (C)", "F\u{221e} (N)");
    for (i, c) in curves.iter().enumerate() {
        let col = match c.profile {
            Profile::C1 => color(0),
            Profile::C2 => color(1),
        };
        let pts = ax.points(c.points.iter().map(|p| (p.t_set, p.f_inf)));
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{col}" stroke-width="2" points="{pts}"/>"#);
        for p in &c.points {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{col}"/>"#, ax.px(p.t_set), ax.py(p.f_inf));
        }
        legend(&mut out, i, col, c.profile.as_str());
    }
    if let Some(t) = limit {
        let x = ax.px(t);
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}" stroke="gray" stroke-dasharray="4,4"/>"#, H - BOTTOM);
        legend(&mut out, curves.len(), "gray", &format!("limit {t} C"));
    }
    out.push_str("</svg>\n");
    out
}

/// Measured temperature and force against time, force scaled onto the
/// temperature axis and labelled on the right.
pub fn trial_svg(log: &TrialLog, title: &str) -> String {
    let temps = || log.rows.iter().map(|r| r.temp_meas);
    let ax = Axes::fit(log.rows.iter().map(|r| r.time_s), temps().chain([0.0]));
    let fmax = log.rows.iter().map(|r| r.force_meas).fold(1e-9, f64::max);
    let scale = ax.y1 / fmax;
    let mut out = open();
    ax.frame(&mut out, title, "time (s)", "temperature (C)");
    let t_pts = ax.points(log.rows.iter().map(|r| (r.time_s, r.temp_meas)));
    let f_pts = ax.points(log.rows.iter().map(|r| (r.time_s, r.force_meas * scale)));
    let _ = writeln!(out, r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{t_pts}"/>"#, color(3));
    let _ = writeln!(out, r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{f_pts}"/>"#, color(0));
    legend(&mut out, 0, color(3), "temperature");
    legend(&mut out, 1, color(0), &format!("force (max {fmax:.2} N)"));
    out.push_str("</svg>\n");
    out
}
