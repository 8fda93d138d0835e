//! Orchestration of one scenario: evolve, sample, audit, persist.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rhlab_core::curvature::CurvaturePack;
use rhlab_core::extension::{self, ExtensionSnapshot, MoserInputs};
use rhlab_core::flow::{self, FlowState, StepControl, Trajectory};
use rhlab_core::gronwall::{self, ComparisonProblem, LambdaFit};
use rhlab_core::localization::{self, CutoffData};
use rhlab_core::monitor::{self, InequalityId, MonitorSample, SampleFields};
use rhlab_core::Error as CoreError;

use crate::artifact::{self, ExtensionRows};
use crate::report::*;
use crate::scenario::{ConstantPolicy, Scenario};

/// Smallest admissible `C_in` when every fitted constant vanishes.
pub const MIN_C_IN: f64 = 1e-6;
/// Constants used for the interpolation check on every sample.
pub const INTERPOLATION_CONSTANTS: [f64; 3] = [0.1, 1.0, 10.0];
pub const EQUIVALENCE_TOL: f64 = 1e-6;
pub const GRADIENT_INCREASE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub trajectory: Trajectory,
    pub samples: Vec<MonitorSample>,
    pub u: Vec<f64>,
    pub extension: Option<ExtensionRows>,
}

impl RunOutput {
    pub fn inequality(&self, id: InequalityId) -> Option<&InequalityLine> {
        self.report.monitor.as_ref()?.inequalities.iter().find(|l| l.id == id.name())
    }
}

fn verdict(id: impl Into<String>, pass: bool, detail: impl Into<String>) -> VerdictLine {
    VerdictLine { id: id.into(), pass, detail: detail.into() }
}

fn control(scn: &Scenario) -> StepControl {
    let mut c = StepControl::new(scn.horizon, scn.snapshots);
    c.safety = scn.safety;
    if let Some(m) = scn.max_dt {
        c.max_dt = m;
    }
    c
}

/// Checks the interpolation inequality on `count` random nonnegative fields.
/// Returns `(checks, failures)`.
pub fn synthetic_interpolation(seed: u64, p: f64, count: usize) -> rhlab_core::Result<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 24;
    let mut checks = 0;
    let mut failures = 0;
    for _ in 0..count {
        let mut draw = |lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|_| rng.gen_range(lo..hi)).collect() };
        let rm = draw(0.0, 4.0);
        let hess = draw(0.0, 3.0);
        let phi = draw(0.0, 1.0);
        let weight = draw(1e-3, 1.0);
        let zero = vec![0.0; n];
        let f = SampleFields {
            rm: &rm,
            ric: &zero,
            grad_rm: &zero,
            grad_ric: &zero,
            grad_u: &zero,
            hess_u: &hess,
            phi: &phi,
            grad_phi: &zero,
            distance: &zero,
            weight: &weight,
        };
        let s = monitor::sample_from_fields(0.0, &f, p, 1.0, 1.0, &[])?;
        let c = 10f64.powf(rng.gen_range(-1.0..1.0));
        for k in 1..=p.floor() as usize {
            checks += 1;
            if !monitor::check_interpolation(&s, c, k)?.pass {
                failures += 1;
            }
        }
    }
    Ok((checks, failures))
}

fn flow_section(traj: &Trajectory, k: f64, k_used: f64, l: f64, singular: Option<usize>) -> Result<FlowSection> {
    let enough = traj.snapshots.len() >= 3;
    let (vol_res, grad_res) = if enough { flow::identity_residuals(traj)?.interior_max() } else { (f64::NAN, f64::NAN) };
    let eq = flow::metric_equivalence(traj)?;
    Ok(FlowSection {
        steps: traj.steps.len(),
        final_time: traj.snapshots.last().map_or(0.0, |s| s.t).into(),
        snapshots: traj.snapshots.len(),
        singular_point: singular,
        k_measured: k.into(),
        k_used: k_used.into(),
        l_measured: l.into(),
        volume_identity_residual: vol_res.into(),
        gradient_identity_residual: grad_res.into(),
        max_gradient_increase: flow::max_gradient_increase(traj).into(),
        equivalence_violation_literal: flow::equivalence_violation(&eq, 2.0 * k, 2.0 * k).into(),
        equivalence_violation_corrected: flow::equivalence_violation(&eq, 2.0 * k, 2.0 * k + 4.0 * l * l).into(),
    })
}

fn opt_witness(w: Option<extension::Witness>) -> Option<(Real, usize)> {
    w.map(|w| (Real(w.t), w.point))
}

/// Runs the whole audit chain for a scenario.
pub fn execute(scn: &Scenario) -> Result<RunOutput> {
    scn.validate()?;
    let initial = scn.initial_state()?;
    match flow::evolve(initial, &control(scn), &mut []) {
        Ok(traj) => audit(scn, traj, None),
        Err(e) => match e.error {
            CoreError::FlowSingularity { t, point } => audit(scn, e.partial, Some((t, point))),
            other => Err(other.into()),
        },
    }
}

/// Audits a trajectory; `singular` is where the flow lost positivity, in which case
/// only the flow section is filled and the status records the time.
pub fn audit(scn: &Scenario, traj: Trajectory, singular: Option<(f64, usize)>) -> Result<RunOutput> {
    let (k_meas, l) = flow::measure_sup_bounds(&traj)?;
    let k = k_meas.max(scn.k_floor);
    let mut report = Report {
        schema: SCHEMA.to_string(),
        scenario_name: scn.name.clone(),
        scenario_hash: scn.hash(),
        scenario: scn.to_text(),
        status: "complete".to_string(),
        flow: flow_section(&traj, k_meas, k, l, singular.map(|s| s.1))?,
        monitor: None,
        extension: None,
        verdicts: Vec::new(),
        diagnostics: Vec::new(),
    };
    if let Some((t, _)) = singular {
        report.status = format!("singular at t={t}");
        report.verdicts.push(verdict("flow", false, report.status.clone()));
        return Ok(RunOutput { report, trajectory: traj, samples: Vec::new(), u: Vec::new(), extension: None });
    }

    let fine: Vec<FlowState> = traj
        .snapshots
        .iter()
        .map(|s| s.with_transverse_resolution(scn.transverse_resolution))
        .collect::<rhlab_core::Result<_>>()?;
    let g0 = &fine[0].g;
    let x0 = scn.base_point(&g0.grid());
    let cut = CutoffData::new(g0, x0, scn.rho, k)?;
    let p = scn.p;
    let mut samples = Vec::with_capacity(fine.len());
    let mut ext = Vec::with_capacity(fine.len());
    for s in &fine {
        let pack = CurvaturePack::compute(&s.g, &s.u)?;
        samples.push(monitor::sample_quantities(s, &pack, &cut, p, &scn.p_list)?);
        ext.push(ExtensionSnapshot::new(s, &pack)?);
    }

    // localized integrals
    let mut checks = 0;
    let mut failures = 0;
    let mut bound_violation = 0.0f64;
    let mut negatives = 0;
    for s in &samples {
        for &c in &INTERPOLATION_CONSTANTS {
            for kk in 1..=p.floor() as usize {
                checks += 1;
                if !monitor::check_interpolation(s, c, kk)?.pass {
                    failures += 1;
                }
            }
        }
        bound_violation = monitor::sample_bound_violations(s, k, l).into_iter().fold(bound_violation, f64::max);
        negatives += s.values().iter().filter(|v| !(**v >= 0.0)).count();
    }
    let (syn_checks, syn_failures) = synthetic_interpolation(scn.seed, p, 100)?;

    let mut lines = Vec::new();
    let mut c_max = 0.0f64;
    for id in InequalityId::ALL {
        let r = monitor::fit_inequality_constant(id, &samples, k, l)?;
        c_max = c_max.max(r.c_fit);
        lines.push(InequalityLine {
            id: id.name().to_string(),
            c_fit: r.c_fit.into(),
            binding_time: r.binding_time.map(Real),
            feasible: r.pass(),
            alt_c_fit: r.alt_c_fit.map(Real),
            note: r.note.clone(),
        });
    }
    let absorption = monitor::absorption_constant(&samples[0], k, l, p);
    let c_in = match scn.c_in {
        ConstantPolicy::Fitted => c_max.max(absorption.unwrap_or(0.0)).max(MIN_C_IN),
        ConstantPolicy::Fixed(c) => c,
    };
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let horizon = *times.last().expect("at least one snapshot");
    let u_series: Vec<f64> = samples.iter().map(|s| monitor::assemble_u(s, k, p, c_in)).collect();
    let forcing: Vec<f64> = samples.iter().map(|s| s.vol_omega).collect();

    let (gamma_section, ball, comparison) = if c_in.is_finite() {
        let gamma = monitor::gamma_constants(k, l, horizon, p, scn.rho, c_in)?;
        let ball = monitor::ball_estimate_check(&samples, &gamma)?;
        let cmp = gronwall::verify_comparison(&ComparisonProblem {
            times: times.clone(),
            u: u_series.clone(),
            lambda1: gamma.lambda1,
            lambda2: gamma.lambda2,
            forcing: forcing.clone(),
        })?;
        let section = GammaSection {
            c_in: c_in.into(),
            lambda1: gamma.lambda1.into(),
            lambda2: gamma.lambda2.into(),
            gamma1: gamma.gamma1.into(),
            gamma2: gamma.gamma2.into(),
            ln_gamma1: gamma.ln_gamma1.into(),
            ln_gamma2: gamma.ln_gamma2.into(),
            overflow: gamma.overflow,
        };
        (section, Some(ball), Some(cmp))
    } else {
        let inf = Real(f64::INFINITY);
        let section = GammaSection {
            c_in: c_in.into(),
            lambda1: inf,
            lambda2: inf,
            gamma1: inf,
            gamma2: inf,
            ln_gamma1: inf,
            ln_gamma2: inf,
            overflow: true,
        };
        (section, None, None)
    };
    let (fitted_l1, fitted_l2, fitted_pass) = match gronwall::fit_lambdas(&times, &u_series, &forcing)? {
        LambdaFit::Feasible { lambda1, lambda2 } => {
            let r = gronwall::verify_comparison(&ComparisonProblem {
                times: times.clone(),
                u: u_series.clone(),
                lambda1,
                lambda2,
                forcing: forcing.clone(),
            })?;
            (Some(Real(lambda1)), Some(Real(lambda2)), r.pass())
        }
        LambdaFit::Infeasible { .. } => (None, None, false),
    };
    let normalized = monitor::normalized_lp_check(&samples, k, scn.rho)?;
    let min_of = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);

    let monitor_section = MonitorSection {
        p: p.into(),
        rho: scn.rho.into(),
        x0_index: x0,
        cutoff_radius: cut.radius.into(),
        cutoff_self_overlaps: cut.self_overlaps(g0),
        cutoff_gradient_ratio: cut.gradient_ratio(g0)?.into(),
        transverse_resolution: scn.transverse_resolution,
        interpolation_checks: checks,
        interpolation_failures: failures,
        synthetic_interpolation_checks: syn_checks,
        synthetic_interpolation_failures: syn_failures,
        sample_bound_violation: bound_violation.into(),
        negative_sample_values: negatives,
        inequalities: lines.clone(),
        absorption_c: absorption.map(Real),
        gamma: gamma_section,
        ball_rhs: ball.as_ref().map_or(f64::NAN, |b| b.rhs).into(),
        ball_min_margin: ball.as_ref().map_or(f64::NEG_INFINITY, |b| min_of(&b.margins)).into(),
        ball_first_violation: ball.as_ref().and_then(|b| b.first_violation).map(Real),
        comparison_min_margin: comparison.as_ref().map_or(f64::NEG_INFINITY, |c| min_of(&c.margins)).into(),
        comparison_first_violation: comparison.as_ref().and_then(|c| c.first_violation).map(Real),
        fitted_lambda1: fitted_l1,
        fitted_lambda2: fitted_l2,
        fitted_comparison_pass: fitted_pass,
        normalized: normalized
            .fits
            .iter()
            .map(|f| NormalizedLine { p: f.p.into(), ratio: f.ratio.into(), c: f.c.into() })
            .collect(),
        normalized_spread: normalized.spread.into(),
        normalized_uniform: normalized.uniform,
        volume_rate: localization::fit_volume_ratio(&forcing, horizon)?.into(),
    };

    // extension audits
    let heat = extension::heat_bound_fit(&ext)?;
    let c_m = match scn.c_m {
        ConstantPolicy::Fitted => (2.0 * heat.c).max(2.0),
        ConstantPolicy::Fixed(c) => c,
    };
    let riccati = extension::riccati_check(&ext, c_m)?;
    let half = extension::half_ball_cutoff(&cut.distance, cut.radius)?;
    let mut energy = Vec::new();
    let mut energy_rows = Vec::new();
    for &a in &scn.energy_exponents {
        let e = extension::energy_inequality_check(&ext, a, &half, c_m)?;
        energy.push(EnergyLine {
            a: a.into(),
            c_fit: e.c_fit.into(),
            derived_c_fit: e.derived_c_fit.into(),
            feasible: e.feasible,
        });
        energy_rows.push((a, e.diffusion, e.time_term, e.reaction));
    }
    let norm_factor = normalized_factor(&samples, k, scn.rho, p);
    let moser = extension::moser_sup_report(
        &ext,
        &cut.distance,
        &MoserInputs { p, k, l, rho: scn.rho, c_m, normalized_factor: norm_factor },
    )?;
    let ext_rows = ExtensionRows { times: times.clone(), sup_phi: moser.sup_phi.clone(), energy: energy_rows };
    let ext_section = ExtensionSection {
        c_m: c_m.into(),
        heat_bound_c: heat.c.into(),
        heat_bound_witness: opt_witness(heat.witness),
        riccati_slack: riccati.slack.into(),
        riccati_worst_excess: riccati.worst_excess.into(),
        riccati_pass: riccati.pass,
        riccati_witness: opt_witness(riccati.witness),
        energy: energy.clone(),
        sup_phi_inner: moser.sup_phi_inner.into(),
        moser_a: moser.a.into(),
        moser_c_n: moser.c_n.into(),
        moser_implied_constant: moser.implied_constant.into(),
        phi_growth_rate: moser.growth_rate.into(),
        phi_growth_bounded: moser.growth_bounded,
        scalar_lower_bound: moser.lower_scalar_bound.into(),
        scalar_phi_ratio: moser.scalar_phi_ratio.into(),
        exponent_convention: "unit Moser exponents, unit prefactor constant".to_string(),
    };

    let mut v = Vec::new();
    v.push(verdict("interpolation", failures == 0, format!("{checks} checks, {failures} failures")));
    for line in &lines {
        v.push(verdict(line.id.clone(), line.feasible, format!("C_fit = {:e}", line.c_fit.0)));
    }
    v.push(verdict(
        "absorption",
        absorption.is_some_and(|a| c_in >= a),
        match absorption {
            Some(a) => format!("initial bound needs C >= {a:e}"),
            None => "no constant satisfies the initial bound".to_string(),
        },
    ));
    v.push(verdict(
        "ball_estimate",
        ball.as_ref().is_some_and(|b| b.pass()),
        format!("min margin {:e}", monitor_section.ball_min_margin.0),
    ));
    v.push(verdict(
        "comparison",
        comparison.as_ref().is_some_and(|c| c.pass()),
        format!("min margin {:e}", monitor_section.comparison_min_margin.0),
    ));
    v.push(verdict("comparison_fitted", fitted_pass, "fitted lambdas"));
    v.push(verdict("heat_bound", heat.c.is_finite(), format!("C = {:e}", heat.c)));
    v.push(verdict(
        "riccati",
        riccati.pass,
        format!("worst excess {:e}, slack {:e}", riccati.worst_excess, riccati.slack),
    ));
    for e in &energy {
        v.push(verdict(format!("energy_a{}", e.a.0), e.feasible, format!("C_fit = {:e}", e.c_fit.0)));
    }
    v.push(verdict(
        "sup_phi_bounded",
        moser.sup_phi_inner.is_finite() && moser.growth_bounded,
        format!("sup phi {:e}", moser.sup_phi_inner),
    ));
    let corrected = report.flow.equivalence_violation_corrected.0;
    v.push(verdict(
        "metric_equivalence",
        corrected <= EQUIVALENCE_TOL,
        format!("violation {corrected:e} with upper rate 2K + 4L^2"),
    ));
    let inc = report.flow.max_gradient_increase.0;
    v.push(verdict("gradient_monotone", inc <= GRADIENT_INCREASE_TOL, format!("max increase {inc:e}")));

    let literal = report.flow.equivalence_violation_literal.0;
    let d = vec![
        verdict("metric_equivalence_literal", literal <= EQUIVALENCE_TOL, format!("violation {literal:e} with rate 2K")),
        verdict(
            "normalized_uniform",
            normalized.uniform,
            format!("max/min fitted constant over p = {:e}", normalized.spread),
        ),
        verdict(
            "synthetic_interpolation",
            syn_failures == 0,
            format!("{syn_checks} checks, {syn_failures} failures"),
        ),
    ];

    report.monitor = Some(monitor_section);
    report.extension = Some(ext_section);
    report.verdicts = v;
    report.diagnostics = d;
    Ok(RunOutput { report, trajectory: traj, samples, u: u_series, extension: Some(ext_rows) })
}

/// `max_t ⨍|Rm(t)|^p / (⨍|Rm(0)|^p + K^pρ^{−2p})` at the monitored exponent, which equals
/// `C e^{C(p−1)}` for the fitted normalized constant.
fn normalized_factor(samples: &[MonitorSample], k: f64, rho: f64, p: f64) -> f64 {
    let avg = |s: &MonitorSample| s.lhs_ball / s.vol_ball_half;
    let denom = avg(&samples[0]) + (p * k.ln() - 2.0 * p * rho.ln()).exp();
    samples.iter().map(|s| avg(s) / denom).fold(0.0, f64::max)
}

/// Writes every artifact file into `dir`, creating it if needed.
pub fn write_artifact(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let put = |name: &str, body: String| fs::write(dir.join(name), body).with_context(|| format!("writing {name}"));
    put(artifact::SCENARIO, out.report.scenario.clone())?;
    put(artifact::TRAJECTORY, artifact::trajectory_csv(&out.trajectory))?;
    put(artifact::STEPS, artifact::steps_csv(&out.trajectory.steps))?;
    if !out.samples.is_empty() {
        put(artifact::MONITOR, artifact::monitor_csv(&out.samples, &out.u))?;
    }
    if let Some(rows) = &out.extension {
        put(artifact::EXTENSION, artifact::extension_csv(rows))?;
    }
    let mut json = serde_json::to_string_pretty(&out.report)?;
    json.push('\n');
    put(artifact::REPORT, json)?;
    Ok(())
}

/// One-screen summary of the verdicts.
pub fn verdict_table(report: &Report) -> String {
    let mut s = format!("scenario {} ({})\nstatus   {}\n", report.scenario_name, &report.scenario_hash[..12], report.status);
    for v in &report.verdicts {
        s.push_str(&format!("{:<5} {:<22} {}\n", if v.pass { "PASS" } else { "FAIL" }, v.id, v.detail));
    }
    for v in &report.diagnostics {
        s.push_str(&format!("{:<5} {:<22} {}\n", if v.pass { "ok" } else { "note" }, v.id, v.detail));
    }
    s
}
