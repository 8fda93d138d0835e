//! CSV layouts of a run directory. Floats are written with `{:.17e}` so every
//! value reads back bit-for-bit.
//!
//! | file | rows |
//! |------|------|
//! | `trajectory.csv` | one per snapshot and lattice point, row-major lattice order: lower-triangle metric components, then `u` |
//! | `steps.csv` | one per time step: `t, dt, sup|∇u|²` |
//! | `monitor.csv` | one per snapshot: localized integrals, `U`, ball quantities |
//! | `extension.csv` | one per snapshot: `sup Φ` and the energy-inequality integrals per exponent |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rhlab_core::flow::{StepRecord, Trajectory};
use rhlab_core::monitor::MonitorSample;

use crate::report::Report;

pub const TRAJECTORY: &str = "trajectory.csv";
pub const STEPS: &str = "steps.csv";
pub const MONITOR: &str = "monitor.csv";
pub const EXTENSION: &str = "extension.csv";
pub const REPORT: &str = "report.json";
pub const SCENARIO: &str = "scenario.scn";

pub fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

fn row(out: &mut String, vals: impl IntoIterator<Item = f64>) {
    let cells: Vec<String> = vals.into_iter().map(fmt).collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}

fn lower_triangle(dim: usize) -> Vec<(usize, usize)> {
    (0..dim).flat_map(|i| (0..=i).map(move |j| (i, j))).collect()
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut s = String::new();
    let Some(first) = traj.snapshots.first() else {
        return s;
    };
    let dim = first.g.dim();
    let tri = lower_triangle(dim);
    s.push_str("# rhlab trajectory: one row per (snapshot, lattice point), row-major lattice order; lower-triangle g then u\n");
    let names: Vec<String> = tri.iter().map(|(i, j)| format!("g{i}{j}")).collect();
    let _ = writeln!(s, "snapshot,t,point,{},u", names.join(","));
    for (k, st) in traj.snapshots.iter().enumerate() {
        let t = st.g.tensor();
        let u = st.u.values();
        for p in 0..u.len() {
            let _ = write!(s, "{k},{},{p},", fmt(st.t));
            row(&mut s, tri.iter().map(|&(i, j)| t.get(p, &[i, j])).chain(std::iter::once(u[p])));
        }
    }
    s
}

/// Snapshot of persisted metric components: `(t, per point lower-triangle g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSnapshot {
    pub t: f64,
    pub metric: Vec<Vec<f64>>,
    pub u: Vec<f64>,
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn parse_f(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| anyhow!("bad number `{s}`"))
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<StoredSnapshot>> {
    let mut rd = reader(text);
    let headers = rd.headers()?.clone();
    let ncomp = headers.iter().filter(|h| h.starts_with('g')).count();
    let mut out: Vec<StoredSnapshot> = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let k: usize = rec[0].parse()?;
        let t = parse_f(&rec[1])?;
        if k == out.len() {
            out.push(StoredSnapshot { t, metric: Vec::new(), u: Vec::new() });
        } else if k + 1 != out.len() {
            bail!("trajectory rows out of order at snapshot {k}");
        }
        let g: Vec<f64> = (0..ncomp).map(|c| parse_f(&rec[3 + c])).collect::<Result<_>>()?;
        let snap = out.last_mut().expect("pushed above");
        snap.metric.push(g);
        snap.u.push(parse_f(&rec[3 + ncomp])?);
    }
    Ok(out)
}

pub fn steps_csv(steps: &[StepRecord]) -> String {
    let mut s = String::from("# rhlab steps: one row per accepted time step\nt,dt,sup_grad_u_sq\n");
    for r in steps {
        row(&mut s, [r.t, r.dt, r.sup_grad_u_sq]);
    }
    s
}

pub fn parse_steps_csv(text: &str) -> Result<Vec<StepRecord>> {
    let mut rd = reader(text);
    rd.records()
        .map(|r| {
            let r = r?;
            Ok(StepRecord { t: parse_f(&r[0])?, dt: parse_f(&r[1])?, sup_grad_u_sq: parse_f(&r[2])? })
        })
        .collect()
}

fn lp_name(q: f64) -> String {
    format!("Lp{q}")
}

pub fn monitor_csv(samples: &[MonitorSample], u: &[f64]) -> String {
    let mut s = String::from(
        "# rhlab monitor: one row per snapshot; integrals weighted by phi^(2p) over the cutoff support; \
         U uses k_used, p and c_in from report.json; LHS_ball and Lp* integrate over the half ball, BallFull and VolOmega over the full ball\n",
    );
    let Some(first) = samples.first() else {
        return s;
    };
    let mut cols: Vec<String> = ["t", "p", "A1", "A2", "A3", "A4", "B1", "B2"].iter().map(|c| c.to_string()).collect();
    cols.extend((1..=first.tk.len()).map(|k| format!("T{k}")));
    cols.extend(
        ["Tp", "Tp_minus_one", "S", "S_tilde", "RicW", "U", "VolOmega", "VolBallHalf", "LHS_ball", "BallFull"]
            .iter()
            .map(|c| c.to_string()),
    );
    cols.extend(first.lp_ball.iter().map(|(q, _)| lp_name(*q)));
    s.push_str(&cols.join(","));
    s.push('\n');
    for (m, uu) in samples.iter().zip(u) {
        let mut v = vec![m.t, m.p, m.a1, m.a2, m.a3, m.a4, m.b1, m.b2];
        v.extend_from_slice(&m.tk);
        v.extend([
            m.tp,
            m.tp_minus_one,
            m.s,
            m.s_tilde,
            m.ric_weighted,
            *uu,
            m.vol_omega,
            m.vol_ball_half,
            m.lhs_ball,
            m.ball_full,
        ]);
        v.extend(m.lp_ball.iter().map(|x| x.1));
        row(&mut s, v);
    }
    s
}

pub fn parse_monitor_csv(text: &str) -> Result<(Vec<MonitorSample>, Vec<f64>)> {
    let mut rd = reader(text);
    let headers = rd.headers()?.clone();
    let idx = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| anyhow!("monitor.csv lacks column {name}"));
    let kmax = headers.iter().filter(|h| h.len() > 1 && h.starts_with('T') && h[1..].parse::<usize>().is_ok()).count();
    let lp: Vec<(usize, f64)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("Lp").and_then(|q| q.parse::<f64>().ok()).map(|q| (i, q)))
        .collect();
    let names = [
        "t", "p", "A1", "A2", "A3", "A4", "B1", "B2", "Tp", "Tp_minus_one", "S", "S_tilde", "RicW", "U", "VolOmega",
        "VolBallHalf", "LHS_ball", "BallFull",
    ];
    let cols: Vec<usize> = names.iter().map(|n| idx(n)).collect::<Result<_>>()?;
    let tcols: Vec<usize> = (1..=kmax).map(|k| idx(&format!("T{k}"))).collect::<Result<_>>()?;
    let mut samples = Vec::new();
    let mut u = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let g = |i: usize| parse_f(&rec[cols[i]]);
        samples.push(MonitorSample {
            t: g(0)?,
            p: g(1)?,
            a1: g(2)?,
            a2: g(3)?,
            a3: g(4)?,
            a4: g(5)?,
            b1: g(6)?,
            b2: g(7)?,
            tk: tcols.iter().map(|&c| parse_f(&rec[c])).collect::<Result<_>>()?,
            tp: g(8)?,
            tp_minus_one: g(9)?,
            s: g(10)?,
            s_tilde: g(11)?,
            ric_weighted: g(12)?,
            vol_omega: g(14)?,
            vol_ball_half: g(15)?,
            lhs_ball: g(16)?,
            ball_full: g(17)?,
            lp_ball: lp.iter().map(|&(i, q)| Ok((q, parse_f(&rec[i])?))).collect::<Result<_>>()?,
        });
        u.push(g(13)?);
    }
    Ok((samples, u))
}

/// Per-snapshot extension data as persisted.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionRows {
    pub times: Vec<f64>,
    pub sup_phi: Vec<f64>,
    /// `(a, diffusion, time term, reaction)` series per exponent.
    pub energy: Vec<(f64, Vec<f64>, Vec<f64>, Vec<f64>)>,
}

pub fn extension_csv(rows: &ExtensionRows) -> String {
    let mut s = String::from(
        "# rhlab extension: sup over the lattice of Phi, and per exponent a the integrals \
         -int cut^2 Phi^(2a-1) Lap Phi, (1/2a) int cut^2 d/dt Phi^(2a), int cut^2 Phi^(2a+1)\n",
    );
    let mut cols = vec!["t".to_string(), "sup_phi".to_string()];
    for (a, ..) in &rows.energy {
        cols.extend([format!("diffusion_a{a}"), format!("time_a{a}"), format!("reaction_a{a}")]);
    }
    s.push_str(&cols.join(","));
    s.push('\n');
    for i in 0..rows.times.len() {
        let mut v = vec![rows.times[i], rows.sup_phi[i]];
        for (_, d, t, r) in &rows.energy {
            v.extend([d[i], t[i], r[i]]);
        }
        row(&mut s, v);
    }
    s
}

pub fn parse_extension_csv(text: &str) -> Result<ExtensionRows> {
    let mut rd = reader(text);
    let headers = rd.headers()?.clone();
    let exps: Vec<f64> = headers
        .iter()
        .filter_map(|h| h.strip_prefix("diffusion_a").and_then(|a| a.parse().ok()))
        .collect();
    let mut out = ExtensionRows {
        times: Vec::new(),
        sup_phi: Vec::new(),
        energy: exps.iter().map(|&a| (a, Vec::new(), Vec::new(), Vec::new())).collect(),
    };
    for rec in rd.records() {
        let rec = rec?;
        out.times.push(parse_f(&rec[0])?);
        out.sup_phi.push(parse_f(&rec[1])?);
        for (j, e) in out.energy.iter_mut().enumerate() {
            e.1.push(parse_f(&rec[2 + 3 * j])?);
            e.2.push(parse_f(&rec[3 + 3 * j])?);
            e.3.push(parse_f(&rec[4 + 3 * j])?);
        }
    }
    Ok(out)
}

/// Everything read back from a run directory.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub dir: PathBuf,
    pub report: Report,
    pub samples: Vec<MonitorSample>,
    pub u: Vec<f64>,
    pub extension: Option<ExtensionRows>,
    pub steps: Vec<StepRecord>,
}

fn read(dir: &Path, name: &str) -> Result<String> {
    fs::read_to_string(dir.join(name)).with_context(|| format!("reading {}", dir.join(name).display()))
}

pub fn load(dir: &Path) -> Result<Artifact> {
    let report: Report = serde_json::from_str(&read(dir, REPORT)?).context("parsing report.json")?;
    if report.schema != crate::report::SCHEMA {
        bail!("unsupported report schema `{}`", report.schema);
    }
    let (samples, u) = if dir.join(MONITOR).exists() { parse_monitor_csv(&read(dir, MONITOR)?)? } else { (vec![], vec![]) };
    let extension = if dir.join(EXTENSION).exists() { Some(parse_extension_csv(&read(dir, EXTENSION)?)?) } else { None };
    let steps = parse_steps_csv(&read(dir, STEPS)?)?;
    Ok(Artifact { dir: dir.to_path_buf(), report, samples, u, extension, steps })
}
