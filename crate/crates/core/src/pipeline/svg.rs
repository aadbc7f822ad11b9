//! Self-contained SVG chart of sweep energies.

use std::fmt::Write;

use super::ledger::RunLedger;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD_L: f64 = 80.0;
const PAD_R: f64 = 150.0;
const PAD_T: f64 = 30.0;
const PAD_B: f64 = 50.0;

/// Line chart of gated-run energy against threshold, with one dashed
/// horizontal line per baseline weather. The y axis is logarithmic since
/// baselines are one to two orders of magnitude above gated runs.
pub fn energy_chart(scdgsc: &[RunLedger], baselines: &[RunLedger]) -> String {
    let points: Vec<(f64, f64)> = scdgsc
        .iter()
        .filter_map(|l| l.voi_threshold().map(|t| (t, l.total_energy_j())))
        .collect();
    let energies = points
        .iter()
        .map(|p| p.1)
        .chain(baselines.iter().map(|l| l.total_energy_j()))
        .filter(|e| *e > 0.0);
    let (lo, hi) = energies.fold((f64::INFINITY, 0.0f64), |(a, b), e| (a.min(e), b.max(e)));
    let (lo, hi) = if lo.is_finite() { (lo.log10().floor(), hi.log10().ceil().max(lo.log10().floor() + 1.0)) } else { (0.0, 1.0) };
    let x_max = points.iter().map(|p| p.0).fold(0.0f64, f64::max).max(1e-9);

    let px = |t: f64| PAD_L + (W - PAD_L - PAD_R) * t / x_max;
    let py = |e: f64| {
        let v = if e > 0.0 { e.log10() } else { lo };
        H - PAD_B - (H - PAD_T - PAD_B) * (v - lo) / (hi - lo)
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"##
    );
    let _ = writeln!(s, r##"<rect width="{W}" height="{H}" fill="white"/>"##);
    let (x0, x1, y0, y1) = (PAD_L, W - PAD_R, H - PAD_B, PAD_T);
    let _ = writeln!(s, r##"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"##);
    let _ = writeln!(s, r##"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"##);
    for d in (lo as i32)..=(hi as i32) {
        let y = py(10f64.powi(d));
        let _ = writeln!(s, r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r##"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"##, x0 - 6.0, y + 4.0);
    }
    for (t, _) in &points {
        let x = px(*t);
        let _ = writeln!(s, r##"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{t}</text>"##, y0 + 16.0);
    }
    let _ = writeln!(s, r##"<text x="{:.1}" y="{:.1}" text-anchor="middle">VoI threshold</text>"##, (x0 + x1) / 2.0, H - 10.0);
    let _ = writeln!(
        s,
        r##"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">total energy (J)</text>"##,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    let colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd"];
    for (i, l) in baselines.iter().enumerate() {
        let y = py(l.total_energy_j());
        let c = colors[i % colors.len()];
        let _ = writeln!(
            s,
            r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="{c}" stroke-dasharray="6 4"/>"##
        );
        let _ = writeln!(s, r##"<text x="{:.1}" y="{:.1}" fill="{c}">full image, {}</text>"##, x1 + 6.0, y + 4.0, l.weather);
    }
    if !points.is_empty() {
        let path: Vec<String> = points.iter().map(|&(t, e)| format!("{:.1},{:.1}", px(t), py(e))).collect();
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="2"/>"##, path.join(" "));
        for &(t, e) in &points {
            let _ = writeln!(s, r##"<circle cx="{:.1}" cy="{:.1}" r="3" fill="#d62728"/>"##, px(t), py(e));
        }
        let &(_, e_last) = points.last().unwrap();
        let _ = writeln!(s, r##"<text x="{:.1}" y="{:.1}" fill="#d62728">semantic maps</text>"##, x1 + 6.0, py(e_last) + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::ledger::{Provenance, Scheme};
    use crate::scene::Weather;

    #[test]
    fn chart_is_self_contained() {
        let l = RunLedger::new(Scheme::Scdgsc { voi_threshold: 0.1 }, Weather::Clear, 1e6, Provenance::new("h".into(), 0));
        let svg = energy_chart(&[l], &[]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("href"));
    }
}
