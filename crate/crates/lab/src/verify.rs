//! Recomputes every verdict of a run from its persisted files.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rhlab_core::diff;
use rhlab_core::extension;
use rhlab_core::gronwall::{self, ComparisonProblem};
use rhlab_core::linalg;
use rhlab_core::monitor::{self, InequalityId};

use crate::artifact::{self, Artifact, StoredSnapshot};
use crate::report::{Report, VerdictLine};
use crate::run::{EQUIVALENCE_TOL, GRADIENT_INCREASE_TOL, INTERPOLATION_CONSTANTS};
use crate::scenario::{ConstantPolicy, Scenario};

/// Relative slack when comparing a recorded constant with a recomputed one.
pub const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub lines: Vec<VerdictLine>,
}

impl VerifyOutcome {
    pub fn pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.lines.iter().filter(|l| !l.pass).map(|l| l.id.as_str()).collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(&format!("{} {} ({})\n", if l.pass { "PASS" } else { "FAIL" }, l.id, l.detail));
        }
        s
    }
}

fn line(id: impl Into<String>, pass: bool, detail: impl Into<String>) -> VerdictLine {
    VerdictLine { id: id.into(), pass, detail: detail.into() }
}

fn bounded_by(recomputed: f64, recorded: f64) -> bool {
    recomputed <= recorded * (1.0 + REL_TOL) + 1e-300
}

fn close(a: f64, b: f64) -> bool {
    (a == b) || (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

fn recorded_verdict(report: &Report, id: &str) -> Option<bool> {
    report.verdicts.iter().find(|v| v.id == id).map(|v| v.pass)
}

fn unpack(dim: usize, lower: &[f64]) -> linalg::Mat {
    let mut m = linalg::ZERO;
    let mut c = 0;
    for i in 0..dim {
        for j in 0..=i {
            m[i][j] = lower[c];
            m[j][i] = lower[c];
            c += 1;
        }
    }
    m
}

/// Worst violation of `e^{−2Kt} ≤ λ(g(0)⁻¹g(t)) ≤ e^{(2K+4L²)t}` over stored snapshots.
pub fn stored_equivalence_violation(snaps: &[StoredSnapshot], dim: usize, k: f64, l: f64) -> Result<f64> {
    let Some(first) = snaps.first() else {
        bail!("trajectory is empty");
    };
    let mut worst = 0.0f64;
    for s in snaps {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (p, g) in s.metric.iter().enumerate() {
            let ev = linalg::generalized_eigenvalues(dim, &unpack(dim, g), &unpack(dim, &first.metric[p]))
                .with_context(|| format!("initial metric not positive definite at point {p}"))?;
            lo = lo.min(ev[0]);
            hi = hi.max(ev[dim - 1]);
        }
        let lower = (-2.0 * k * s.t).exp();
        let upper = ((2.0 * k + 4.0 * l * l) * s.t).exp();
        worst = worst.max((lower - lo) / lower).max((hi - upper) / upper);
    }
    Ok(worst)
}

pub fn verify_dir(dir: &Path) -> Result<VerifyOutcome> {
    let art = artifact::load(dir)?;
    let text = fs::read_to_string(dir.join(artifact::TRAJECTORY)).context("reading trajectory.csv")?;
    let traj = artifact::parse_trajectory_csv(&text)?;
    verify_artifact(&art, &traj)
}

pub fn verify_artifact(art: &Artifact, traj: &[StoredSnapshot]) -> Result<VerifyOutcome> {
    let report = &art.report;
    let scn = Scenario::parse(&report.scenario).context("scenario embedded in report.json")?;
    let mut out = Vec::new();
    out.push(line(
        "scenario_hash",
        scn.hash() == report.scenario_hash,
        format!("recorded {}", &report.scenario_hash[..12.min(report.scenario_hash.len())]),
    ));
    if report.status != "complete" {
        out.push(line("flow", false, report.status.clone()));
        return Ok(VerifyOutcome { lines: out });
    }
    let (Some(mon), Some(ext)) = (&report.monitor, &report.extension) else {
        bail!("complete run without monitor or extension sections");
    };
    let samples = &art.samples;
    if samples.len() != report.flow.snapshots {
        bail!("monitor.csv has {} rows, report lists {} snapshots", samples.len(), report.flow.snapshots);
    }
    let k = report.flow.k_used.0;
    let l = report.flow.l_measured.0;
    let p = mon.p.0;

    let mut failures = 0;
    let mut checks = 0;
    for s in samples {
        for &c in &INTERPOLATION_CONSTANTS {
            for kk in 1..=p.floor() as usize {
                checks += 1;
                if !monitor::check_interpolation(s, c, kk)?.pass {
                    failures += 1;
                }
            }
        }
    }
    out.push(line("interpolation", failures == 0, format!("{checks} checks, {failures} failures")));

    for id in InequalityId::ALL {
        let Some(rec) = mon.inequalities.iter().find(|r| r.id == id.name()) else {
            out.push(line(id.name(), false, "missing from report"));
            continue;
        };
        let fit = monitor::fit_inequality_constant(id, samples, k, l)?;
        let ok = rec.feasible && fit.pass() && bounded_by(fit.c_fit, rec.c_fit.0);
        out.push(line(id.name(), ok, format!("recorded C {:e}, data needs {:e}", rec.c_fit.0, fit.c_fit)));
    }

    let c_in = mon.gamma.c_in.0;
    let absorption = samples.first().and_then(|s0| monitor::absorption_constant(s0, k, l, p));
    out.push(line(
        "absorption",
        absorption.is_some_and(|a| bounded_by(a, c_in)),
        format!("C_in {c_in:e}, initial bound needs {absorption:?}"),
    ));
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let u_ok = samples.iter().zip(&art.u).all(|(s, u)| close(monitor::assemble_u(s, k, p, c_in), *u));
    out.push(line("u_column", u_ok && art.u.len() == samples.len(), "U recomputed from the integrals"));

    let horizon = *times.last().unwrap_or(&0.0);
    let gamma = monitor::gamma_constants(k, l, horizon, p, mon.rho.0, c_in)?;
    let gamma_ok = close(gamma.ln_gamma1, mon.gamma.ln_gamma1.0) && close(gamma.ln_gamma2, mon.gamma.ln_gamma2.0);
    let ball = monitor::ball_estimate_check(samples, &gamma)?;
    out.push(line(
        "ball_estimate",
        gamma_ok && ball.pass(),
        format!("constants consistent: {gamma_ok}, first violation {:?}", ball.first_violation),
    ));
    let forcing: Vec<f64> = samples.iter().map(|s| s.vol_omega).collect();
    let cmp = gronwall::verify_comparison(&ComparisonProblem {
        times: times.clone(),
        u: art.u.clone(),
        lambda1: gamma.lambda1,
        lambda2: gamma.lambda2,
        forcing: forcing.clone(),
    })?;
    out.push(line("comparison", cmp.pass(), format!("first violation {:?}", cmp.first_violation)));
    let fitted = match (mon.fitted_lambda1, mon.fitted_lambda2) {
        (Some(a), Some(b)) => gronwall::verify_comparison(&ComparisonProblem {
            times: times.clone(),
            u: art.u.clone(),
            lambda1: a.0,
            lambda2: b.0,
            forcing,
        })?
        .pass(),
        _ => false,
    };
    out.push(line("comparison_fitted", fitted, "fitted lambdas against the U column"));

    let heat_ok = ext.heat_bound_c.0.is_finite()
        && match scn.c_m {
            ConstantPolicy::Fitted => close(ext.c_m.0, (2.0 * ext.heat_bound_c.0).max(2.0)),
            ConstantPolicy::Fixed(c) => close(ext.c_m.0, c),
        };
    out.push(line("heat_bound", heat_ok, format!("C = {:e}, C_m = {:e}", ext.heat_bound_c.0, ext.c_m.0)));
    let ric_ok = ext.riccati_pass
        && ext.riccati_worst_excess.0 <= ext.riccati_slack.0
        && recorded_verdict(report, "riccati") == Some(true);
    out.push(line("riccati", ric_ok, format!("worst excess {:e}", ext.riccati_worst_excess.0)));

    let Some(rows) = &art.extension else {
        bail!("extension.csv missing");
    };
    for e in &ext.energy {
        let id = format!("energy_a{}", e.a.0);
        let Some((_, d, t, r)) = rows.energy.iter().find(|x| x.0 == e.a.0) else {
            out.push(line(id, false, "missing from extension.csv"));
            continue;
        };
        let c = extension::energy_constant(d, t, r);
        out.push(line(
            id,
            e.feasible && c.is_finite() && bounded_by(c, e.c_fit.0),
            format!("recorded C {:e}, data needs {c:e}", e.c_fit.0),
        ));
    }

    let logs: Vec<f64> = rows.sup_phi.iter().map(|v| v.ln()).collect();
    let rate = diff::time_derivative(&rows.times, &logs)?.into_iter().fold(0.0, f64::max);
    let bounded = rows
        .times
        .iter()
        .zip(&rows.sup_phi)
        .all(|(t, v)| v.is_finite() && *v <= 10.0 * rows.sup_phi[0] * (rate * t).exp());
    out.push(line(
        "sup_phi_bounded",
        bounded && ext.sup_phi_inner.0.is_finite(),
        format!("growth rate {rate:e}"),
    ));

    let eq = stored_equivalence_violation(traj, scn.dim, report.flow.k_measured.0, l)?;
    out.push(line("metric_equivalence", eq <= EQUIVALENCE_TOL, format!("violation {eq:e}")));
    let inc = art.steps.windows(2).map(|w| w[1].sup_grad_u_sq - w[0].sup_grad_u_sq).fold(0.0, f64::max);
    out.push(line("gradient_monotone", inc <= GRADIENT_INCREASE_TOL, format!("max increase {inc:e}")));

    Ok(VerifyOutcome { lines: out })
}
