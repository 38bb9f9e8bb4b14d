//! Self-contained SVG scatter of volume fraction against the energy ratio.

use std::fmt::Write;

use crate::experiment::ExperimentRecord;
use crate::LabError;

/// Calibrated envelopes drawn over the scatter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlay {
    pub k_hat: f64,
    pub c_hat: f64,
    /// W₀/‖g‖² used for the lower curve (records of one datum share it up to
    /// discretization).
    pub w0_over_gnorm2: f64,
    pub domain_area: f64,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn label(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if (1e-3..1e4).contains(&x.abs()) {
        format!("{}", (x * 1e6).round() / 1e6)
    } else {
        format!("{x:.1e}")
    }
}

/// Number of `<circle>` markers in an SVG produced by [`scatter`].
pub fn marker_count(svg: &str) -> usize {
    svg.matches("<circle class=\"marker\"").count()
}

pub fn scatter(records: &[ExperimentRecord], overlay: Option<Overlay>) -> Result<String, LabError> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.ratio, r.area_frac))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if pts.is_empty() {
        return Err(LabError::Config("nothing to plot: no record with finite ratio and area fraction".into()));
    }
    let xmin = pts.iter().fold(0.0f64, |m, p| m.min(p.0));
    let ymin = pts.iter().fold(0.0f64, |m, p| m.min(p.1));
    let mut xmax = pts.iter().fold(f64::MIN_POSITIVE, |m, p| m.max(p.0));
    let mut ymax = pts.iter().fold(f64::MIN_POSITIVE, |m, p| m.max(p.1));
    xmax += 0.05 * (xmax - xmin);
    ymax += 0.1 * (ymax - ymin);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - xmin) / (xmax - xmin) * pw;
    let sy = |y: f64| TOP + ph - (y - ymin) / (ymax - ymin) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    for t in ticks(xmin, xmax) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0,
            label(t)
        );
    }
    for t in ticks(ymin, ymax) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">(W - W0) / W0</text>"#,
        LEFT + pw / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">|D| / |Omega|</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    if let Some(o) = overlay {
        let a = o.k_hat / o.domain_area;
        let x_end = xmax.min(if a > 0.0 { ymax / a } else { xmax });
        let _ = writeln!(
            s,
            r##"<line class="upper" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c0392b" stroke-width="1.5"/>"##,
            sx(0.0),
            sy(0.0),
            sx(x_end),
            sy(a * x_end)
        );
        let b = o.c_hat * o.w0_over_gnorm2 / o.domain_area;
        let x_end = xmax.min(if b > 0.0 { (ymax / b).sqrt() } else { xmax });
        let mut path = String::new();
        for k in 0..=100 {
            let x = x_end * k as f64 / 100.0;
            let _ = write!(path, "{}{:.2},{:.2}", if k == 0 { "M" } else { " L" }, sx(x), sy(b * x * x));
        }
        let _ = writeln!(
            s,
            r##"<path class="lower" d="{path}" fill="none" stroke="#2471a3" stroke-width="1.5"/>"##
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" fill="#c0392b">upper: K_hat = {:.4e}</text><text x="{:.2}" y="{:.2}" fill="#2471a3">lower: C_hat = {:.4e}</text>"##,
            LEFT + 10.0,
            TOP + 16.0,
            o.k_hat,
            LEFT + 10.0,
            TOP + 32.0,
            o.c_hat
        );
    }
    for (x, y) in &pts {
        let _ = writeln!(
            s,
            r##"<circle class="marker" cx="{:.2}" cy="{:.2}" r="3.5" fill="#222" fill-opacity="0.75"/>"##,
            sx(*x),
            sy(*y)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ratio: f64, frac: f64) -> ExperimentRecord {
        ExperimentRecord {
            run_id: 0,
            cx: 0.5,
            cy: 0.5,
            radius: 0.1,
            area_frac: frac,
            d0: 0.1,
            h: 0.1,
            w0: 1.0,
            w: 1.0 + ratio,
            ratio,
            grad_energy_d: 0.0,
            identity_residual: 0.0,
            gnorm2: 1.0,
            lower: 0.0,
            upper: 0.0,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn one_marker_per_record() {
        let rs: Vec<_> = (1..=7).map(|k| rec(0.01 * k as f64, 0.002 * k as f64)).collect();
        let s = scatter(&rs, None).unwrap();
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(marker_count(&s), 7);
        let single = scatter(&rs[..1], None).unwrap();
        assert_eq!(marker_count(&single), 1);
    }

    #[test]
    fn overlay_and_empty() {
        let rs = vec![rec(0.05, 0.031)];
        let s = scatter(
            &rs,
            Some(Overlay {
                k_hat: 0.62,
                c_hat: 1.0,
                w0_over_gnorm2: 1.0,
                domain_area: 1.0,
            }),
        )
        .unwrap();
        assert!(s.contains(r#"class="upper""#) && s.contains(r#"class="lower""#));
        assert!(scatter(&[], None).is_err());
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
    }
}
