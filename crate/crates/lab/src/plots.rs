//! Plain-text plot data and small SVG charts for a run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rhlab_core::gronwall::{self, ComparisonProblem};
use rhlab_core::monitor::{self, InequalityId};

use crate::artifact::{self, Artifact};

pub const PLOT_DIR: &str = "plots";

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

pub struct Series<'a> {
    pub label: &'a str,
    pub values: &'a [f64],
}

/// Line chart of several series over a shared time axis.
pub fn svg_chart(title: &str, times: &[f64], series: &[Series]) -> String {
    let finite = |v: &&f64| v.is_finite();
    let (t0, t1) = (times.first().copied().unwrap_or(0.0), times.last().copied().unwrap_or(1.0));
    let ys = series.iter().flat_map(|s| s.values.iter()).filter(finite);
    let (mut lo, mut hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if !(lo.is_finite() && hi.is_finite()) {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        lo -= 0.5;
        hi += 0.5;
    }
    let span_t = if t1 > t0 { t1 - t0 } else { 1.0 };
    let px = |t: f64| MARGIN + (t - t0) / span_t * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<path d="M{x0} {y0} L{x0} {y1} L{x1} {y1}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{x0}" y="{}" text-anchor="middle">{t0:.3}</text>"#, y1 + 16.0);
    let _ = writeln!(s, r#"<text x="{x1}" y="{}" text-anchor="middle">{t1:.3}</text>"#, y1 + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{y1}" text-anchor="end">{lo:.3e}</text>"#, x0 - 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{hi:.3e}</text>"#, x0 - 4.0, y0 + 4.0);
    for (j, ser) in series.iter().enumerate() {
        let color = COLORS[j % COLORS.len()];
        let pts: Vec<String> = times
            .iter()
            .zip(ser.values)
            .filter(|(_, v)| v.is_finite())
            .map(|(t, v)| format!("{:.2},{:.2}", px(*t), py(*v)))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
        let ly = y0 + 14.0 * j as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, x1 - 150.0, escape(ser.label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tsv(times: &[f64], values: &[f64]) -> String {
    let mut s = String::from("t\tvalue\n");
    for (t, v) in times.iter().zip(values) {
        let _ = writeln!(s, "{}\t{}", artifact::fmt(*t), artifact::fmt(*v));
    }
    s
}

/// Writes `plots/` under the artifact directory and returns the files created.
pub fn write_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let art = artifact::load(dir)?;
    let out = dir.join(PLOT_DIR);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    for (name, body) in plot_files(&art)? {
        let path = out.join(&name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

/// File name and contents of every plot, in a fixed order.
pub fn plot_files(art: &Artifact) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    let samples = &art.samples;
    let Some(mon) = &art.report.monitor else {
        return Ok(files);
    };
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let mut columns: Vec<(String, Vec<f64>)> = vec![
        ("A1".into(), samples.iter().map(|s| s.a1).collect()),
        ("A2".into(), samples.iter().map(|s| s.a2).collect()),
        ("A3".into(), samples.iter().map(|s| s.a3).collect()),
        ("A4".into(), samples.iter().map(|s| s.a4).collect()),
        ("B1".into(), samples.iter().map(|s| s.b1).collect()),
        ("B2".into(), samples.iter().map(|s| s.b2).collect()),
        ("S".into(), samples.iter().map(|s| s.s).collect()),
        ("S_tilde".into(), samples.iter().map(|s| s.s_tilde).collect()),
        ("RicW".into(), samples.iter().map(|s| s.ric_weighted).collect()),
        ("VolOmega".into(), samples.iter().map(|s| s.vol_omega).collect()),
        ("LHS_ball".into(), samples.iter().map(|s| s.lhs_ball).collect()),
        ("U".into(), art.u.clone()),
    ];
    if let Some(first) = samples.first() {
        for k in 0..first.tk.len() {
            columns.push((format!("T{}", k + 1), samples.iter().map(|s| s.tk[k]).collect()));
        }
    }
    for (name, values) in &columns {
        files.push((format!("{name}.tsv"), tsv(&times, values)));
    }

    let k = art.report.flow.k_used.0;
    let l = art.report.flow.l_measured.0;
    let p = mon.p.0;
    for id in InequalityId::ALL {
        let r = monitor::fit_inequality_constant(id, samples, k, l)?;
        let c = mon.inequalities.iter().find(|x| x.id == id.name()).map_or(r.c_fit, |x| x.c_fit.0);
        let envelope: Vec<f64> = (0..times.len())
            .map(|i| {
                let power = r.power_term.as_ref().map_or(0.0, |pt| c.powf(p - 1.0) * pt[i]);
                r.fixed[i] + c * r.basis[i] + power
            })
            .collect();
        let title = format!("{} (C = {c:.4e})", id.name());
        let chart = svg_chart(
            &title,
            &times,
            &[Series { label: "left side", values: &r.lhs }, Series { label: "envelope", values: &envelope }],
        );
        files.push((format!("{}.svg", id.name()), chart));
    }

    let g = &mon.gamma;
    if g.lambda1.0.is_finite() && g.lambda2.0.is_finite() && !art.u.is_empty() {
        let env = gronwall::comparison_envelope(&ComparisonProblem {
            times: times.clone(),
            u: art.u.clone(),
            lambda1: g.lambda1.0,
            lambda2: g.lambda2.0,
            forcing: samples.iter().map(|s| s.vol_omega).collect(),
        })?;
        let chart = svg_chart(
            "U against the comparison envelope",
            &times,
            &[Series { label: "U", values: &art.u }, Series { label: "envelope", values: &env }],
        );
        files.push(("comparison.svg".into(), chart));
    }
    Ok(files)
}
