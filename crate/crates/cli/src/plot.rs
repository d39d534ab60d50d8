//! Minimal standalone SVG line charts. Output depends only on the input
//! numbers, so it is byte-stable.

use std::fmt::Write as _;

use fnnstat_core::effects::PceCurve;
use fnnstat_core::selection::SelectionSweep;
use fnnstat_core::simgen::PowerRow;

const PANEL_W: f64 = 480.0;
const PANEL_H: f64 = 360.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub color: &'static str,
    pub dashed: bool,
    pub markers: bool,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub xs: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBar {
    pub x: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<Line>,
    pub bands: Vec<Band>,
    pub error_bars: Vec<ErrorBar>,
    /// Horizontal reference lines: `(y, color, dashed)`.
    pub hlines: Vec<(f64, &'static str, bool)>,
    pub log_y: bool,
}

fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values
        .filter(|v| v.is_finite())
        .fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}

fn pad((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi > lo {
        let m = (hi - lo) * 0.05;
        (lo - m, hi + m)
    } else {
        let m = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - m, hi + m)
    }
}

/// Roughly five round-numbered ticks inside `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

/// Values `{1, 2, 5} × 10^k` with `log10` in `[lo, hi]`; falls back to
/// decades only when that gives enough ticks.
fn log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for k in (lo.floor() as i32 - 1)..=(hi.ceil() as i32) {
        for m in [1.0, 2.0, 5.0] {
            let v = m * 10f64.powi(k);
            if (lo..=hi).contains(&v.log10()) {
                out.push(v);
            }
        }
    }
    let decades: Vec<f64> = out.iter().copied().filter(|v| v.log10().fract().abs() < 1e-9).collect();
    if decades.len() >= 3 {
        decades
    } else {
        out
    }
}

fn log_tick_label(v: f64) -> String {
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl Panel {
    fn y_transform(&self, v: f64) -> f64 {
        if self.log_y {
            v.max(1e-300).log10()
        } else {
            v
        }
    }

    fn render(&self, out: &mut String, ox: f64) {
        let xs = self
            .lines
            .iter()
            .flat_map(|l| l.xs.iter().copied())
            .chain(self.bands.iter().flat_map(|b| b.xs.iter().copied()))
            .chain(self.error_bars.iter().map(|e| e.x));
        let ys = self
            .lines
            .iter()
            .flat_map(|l| l.ys.iter().copied())
            .chain(self.bands.iter().flat_map(|b| b.lo.iter().chain(&b.hi).copied()))
            .chain(self.error_bars.iter().flat_map(|e| [e.lo, e.hi]))
            .chain(self.hlines.iter().map(|h| h.0))
            .filter(|v| !self.log_y || *v > 0.0)
            .map(|v| self.y_transform(v));
        let (x0, x1) = pad(extent(xs).unwrap_or((0.0, 1.0)));
        let (y0, y1) = pad(extent(ys).unwrap_or((0.0, 1.0)));
        let plot_w = PANEL_W - LEFT - RIGHT;
        let plot_h = PANEL_H - TOP - BOTTOM;
        let sx = |x: f64| ox + LEFT + (x - x0) / (x1 - x0) * plot_w;
        let sy = |y: f64| TOP + (1.0 - (self.y_transform(y) - y0) / (y1 - y0)) * plot_h;

        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            num(ox + LEFT),
            num(TOP),
            num(plot_w),
            num(plot_h)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
            num(ox + LEFT + plot_w / 2.0),
            num(TOP - 14.0),
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
            num(ox + LEFT + plot_w / 2.0),
            num(PANEL_H - 12.0),
            escape(&self.x_label)
        );
        let yc = TOP + plot_h / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 {} {})">{}</text>"#,
            num(ox + 16.0),
            num(yc),
            num(ox + 16.0),
            num(yc),
            escape(&self.y_label)
        );

        let xt = ticks(x0, x1);
        let xstep = if xt.len() > 1 { xt[1] - xt[0] } else { 1.0 };
        for t in &xt {
            let x = sx(*t);
            let _ = writeln!(
                out,
                r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/><text x="{0}" y="{3}" text-anchor="middle" font-size="10">{4}</text>"#,
                num(x),
                num(TOP + plot_h),
                num(TOP + plot_h + 4.0),
                num(TOP + plot_h + 16.0),
                tick_label(*t, xstep)
            );
        }
        let yt: Vec<(f64, String)> = if self.log_y {
            log_ticks(y0, y1).into_iter().map(|v| (v.log10(), log_tick_label(v))).collect()
        } else {
            let t = ticks(y0, y1);
            let step = if t.len() > 1 { t[1] - t[0] } else { 1.0 };
            t.into_iter().map(|v| (v, tick_label(v, step))).collect()
        };
        for (t, label) in &yt {
            let y = TOP + (1.0 - (t - y0) / (y1 - y0)) * plot_h;
            let _ = writeln!(
                out,
                r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/><text x="{3}" y="{4}" text-anchor="end" font-size="10">{5}</text>"#,
                num(ox + LEFT - 4.0),
                num(y),
                num(ox + LEFT),
                num(ox + LEFT - 6.0),
                num(y + 3.5),
                label
            );
        }

        for b in &self.bands {
            if b.xs.len() < 2 {
                continue;
            }
            let mut pts: Vec<String> = b.xs.iter().zip(&b.hi).map(|(x, y)| format!("{},{}", num(sx(*x)), num(sy(*y)))).collect();
            pts.extend(b.xs.iter().zip(&b.lo).rev().map(|(x, y)| format!("{},{}", num(sx(*x)), num(sy(*y)))));
            let _ = writeln!(out, r##"<polygon points="{}" fill="#bbbbbb" fill-opacity="0.5" stroke="none"/>"##, pts.join(" "));
        }
        for &(y, color, dashed) in &self.hlines {
            if self.log_y && y <= 0.0 {
                continue;
            }
            let dash = if dashed { r#" stroke-dasharray="6,4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{2}" x2="{}" y2="{2}" stroke="{color}"{dash}/>"#,
                num(ox + LEFT),
                num(ox + LEFT + plot_w),
                num(sy(y))
            );
        }
        for e in &self.error_bars {
            let _ = writeln!(
                out,
                r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>"#,
                num(sx(e.x)),
                num(sy(e.lo)),
                num(sy(e.hi))
            );
        }
        for l in &self.lines {
            let pts: Vec<(f64, f64)> = l
                .xs
                .iter()
                .zip(&l.ys)
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || **y > 0.0))
                .map(|(x, y)| (sx(*x), sy(*y)))
                .collect();
            let dash = if l.dashed { r#" stroke-dasharray="6,4""# } else { "" };
            if pts.len() > 1 {
                let d: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", num(*x), num(*y))).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                    d.join(" "),
                    l.color
                );
            }
            if l.markers || pts.len() == 1 {
                for (x, y) in &pts {
                    let _ = writeln!(out, r#"<circle cx="{}" cy="{}" r="3" fill="{}"/>"#, num(*x), num(*y), l.color);
                }
            }
        }
        let mut ly = TOP + 14.0;
        let lx = ox + LEFT + 8.0;
        for l in self.lines.iter().filter(|l| l.label.is_some()) {
            let dash = if l.dashed { r#" stroke-dasharray="6,4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<line x1="{x1}" y1="{ym}" x2="{x2}" y2="{ym}" stroke="{c}" stroke-width="1.5"{dash}/><text x="{tx}" y="{ty}" font-size="10" fill="{c}">{label}</text>"#,
                x1 = num(lx),
                x2 = num(lx + 24.0),
                ym = num(ly - 3.5),
                c = l.color,
                tx = num(lx + 30.0),
                ty = num(ly),
                label = escape(l.label.as_deref().unwrap_or(""))
            );
            ly += 14.0;
        }
    }
}

/// Panels side by side in one document.
pub fn render(panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len().max(1) as f64;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
        num(width),
        num(PANEL_H)
    );
    for (i, p) in panels.iter().enumerate() {
        p.render(&mut out, i as f64 * PANEL_W);
    }
    out.push_str("</svg>\n");
    out
}

/// PCE curve with its band and an optional constant reference effect
/// (e.g. the linear model's coefficient times `d`).
pub fn pce_panel(curve: &PceCurve, covariate: &str, response: &str, reference: Option<f64>) -> Panel {
    let xs: Vec<f64> = curve.points.iter().map(|p| p.x).collect();
    let mut hlines = vec![(0.0, "black", false)];
    if let Some(r) = reference {
        hlines.push((r, "blue", true));
    }
    Panel {
        title: format!("PCE of {covariate}"),
        x_label: covariate.into(),
        y_label: format!("change in {response}"),
        lines: vec![Line {
            xs: xs.clone(),
            ys: curve.points.iter().map(|p| p.beta_hat).collect(),
            color: "black",
            dashed: false,
            markers: false,
            label: None,
        }],
        bands: vec![Band {
            xs,
            lo: curve.points.iter().map(|p| p.lo).collect(),
            hi: curve.points.iter().map(|p| p.hi).collect(),
        }],
        hlines,
        ..Default::default()
    }
}

/// Cross-validated RMSE with ± one standard error, and BIC, against the
/// hidden-layer size (0 = linear model).
pub fn sweep_panels(sweep: &SelectionSweep) -> Vec<Panel> {
    let cv: Vec<_> = sweep.rows.iter().filter_map(|r| Some((r.q as f64, r.cv_rmse?, r.cv_se.unwrap_or(0.0)))).collect();
    let bic: Vec<_> = sweep.rows.iter().filter_map(|r| Some((r.q as f64, r.bic?))).collect();
    vec![
        Panel {
            title: "Cross-validated RMSE".into(),
            x_label: "hidden nodes".into(),
            y_label: "RMSE".into(),
            lines: vec![Line {
                xs: cv.iter().map(|c| c.0).collect(),
                ys: cv.iter().map(|c| c.1).collect(),
                color: "black",
                dashed: false,
                markers: true,
                label: None,
            }],
            error_bars: cv.iter().map(|c| ErrorBar { x: c.0, lo: c.1 - c.2, hi: c.1 + c.2 }).collect(),
            ..Default::default()
        },
        Panel {
            title: "BIC".into(),
            x_label: "hidden nodes".into(),
            y_label: "BIC".into(),
            lines: vec![Line {
                xs: bic.iter().map(|b| b.0).collect(),
                ys: bic.iter().map(|b| b.1).collect(),
                color: "black",
                dashed: false,
                markers: true,
                label: None,
            }],
            ..Default::default()
        },
    ]
}

/// Rejection rate against effect size, log-scale y.
pub fn power_panel(rows: &[PowerRow]) -> Panel {
    let xs: Vec<f64> = rows.iter().map(|r| r.effect).collect();
    Panel {
        title: "Power".into(),
        x_label: "effect size".into(),
        y_label: "rejection rate".into(),
        lines: vec![
            Line {
                xs: xs.clone(),
                ys: rows.iter().map(|r| r.single_power).collect(),
                color: "black",
                dashed: true,
                markers: true,
                label: Some("single-parameter".into()),
            },
            Line {
                xs,
                ys: rows.iter().map(|r| r.multi_power).collect(),
                color: "black",
                dashed: false,
                markers: true,
                label: Some("multiple-parameter".into()),
            },
        ],
        hlines: vec![(fnnstat_core::simgen::ALPHA, "gray", true)],
        log_y: true,
        ..Default::default()
    }
}
