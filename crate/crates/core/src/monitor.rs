//! Cutoff-weighted curvature integrals per snapshot, the exact interpolation
//! inequality between the `T_k`, minimal constants for the monitored
//! differential inequalities, the aggregate `U`, the explicit `Λ`/`Γ`
//! constants and the final ball estimate.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::curvature::CurvaturePack;
use crate::diff;
use crate::error::{invalid, Error, Result};
use crate::flow::FlowState;
use crate::localization::{self, CutoffData};
use crate::math::{ceil, exp, floor, ln, pow_nonneg, powf};

/// Pointwise inputs of one sample. Norms are unsquared; `weight` is the
/// quadrature weight `√det g · ∏h_i` of each lattice point.
#[derive(Debug, Clone, Copy)]
pub struct SampleFields<'a> {
    pub rm: &'a [f64],
    pub ric: &'a [f64],
    pub grad_rm: &'a [f64],
    pub grad_ric: &'a [f64],
    pub grad_u: &'a [f64],
    pub hess_u: &'a [f64],
    pub phi: &'a [f64],
    pub grad_phi: &'a [f64],
    pub distance: &'a [f64],
    pub weight: &'a [f64],
}

/// The localized integrals at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSample {
    pub t: f64,
    pub p: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub b1: f64,
    pub b2: f64,
    /// `T_k` for `k = 1..=⌈p⌉`.
    pub tk: Vec<f64>,
    /// `T` with the real exponent `p − 1` on `|Rm|`.
    pub tp: f64,
    /// `T` with the real exponent `p − 2` on `|Rm|`.
    pub tp_minus_one: f64,
    pub s: f64,
    pub s_tilde: f64,
    pub ric_weighted: f64,
    /// `Vol_{g(t)}(Ω)` with `Ω = {d0 < ρ/√K}`.
    pub vol_omega: f64,
    /// `Vol_{g(t)}({d0 < ρ/(2√K)})`.
    pub vol_ball_half: f64,
    /// `∫_{d0 < ρ/(2√K)} |Rm|^p dV_t`.
    pub lhs_ball: f64,
    /// `∫_{d0 < ρ/√K} |Rm|^p dV_t`.
    pub ball_full: f64,
    /// `(q, ∫_{d0 < ρ/(2√K)} |Rm|^q dV_t)` for the extra exponents requested.
    pub lp_ball: Vec<(f64, f64)>,
}

impl MonitorSample {
    pub fn t1(&self) -> f64 {
        self.tk[0]
    }

    /// Every scalar of the sample, for nonnegativity checks.
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.a1,
            self.a2,
            self.a3,
            self.a4,
            self.b1,
            self.b2,
            self.tp,
            self.tp_minus_one,
            self.s,
            self.s_tilde,
            self.ric_weighted,
            self.vol_omega,
            self.vol_ball_half,
            self.lhs_ball,
            self.ball_full,
        ];
        v.extend_from_slice(&self.tk);
        v.extend(self.lp_ball.iter().map(|x| x.1));
        v
    }
}

pub fn check_p(p: f64) -> Result<()> {
    if p >= 3.0 && p.is_finite() {
        Ok(())
    } else {
        Err(invalid("p must be a finite real >= 3"))
    }
}

/// Quadrature of every monitored integrand. `radius` is `ρ/√K`.
pub fn sample_from_fields(
    t: f64,
    f: &SampleFields<'_>,
    p: f64,
    k: f64,
    radius: f64,
    extra_p: &[f64],
) -> Result<MonitorSample> {
    check_p(p)?;
    if !(k > 0.0) {
        return Err(invalid("K must be positive"));
    }
    let np = f.rm.len();
    let lens = [
        f.ric.len(),
        f.grad_rm.len(),
        f.grad_ric.len(),
        f.grad_u.len(),
        f.hess_u.len(),
        f.phi.len(),
        f.grad_phi.len(),
        f.distance.len(),
        f.weight.len(),
    ];
    if lens.iter().any(|&l| l != np) {
        return Err(Error::ShapeMismatch("sample fields differ in length"));
    }
    let kmax = ceil(p) as usize;
    let mut s = MonitorSample {
        t,
        p,
        a1: 0.0,
        a2: 0.0,
        a3: 0.0,
        a4: 0.0,
        b1: 0.0,
        b2: 0.0,
        tk: vec![0.0; kmax],
        tp: 0.0,
        tp_minus_one: 0.0,
        s: 0.0,
        s_tilde: 0.0,
        ric_weighted: 0.0,
        vol_omega: 0.0,
        vol_ball_half: 0.0,
        lhs_ball: 0.0,
        ball_full: 0.0,
        lp_ball: extra_p.iter().map(|&q| (q, 0.0)).collect(),
    };
    for i in 0..np {
        let w = f.weight[i];
        let rm = f.rm[i];
        let phi = f.phi[i];
        let gphi2 = f.grad_phi[i] * f.grad_phi[i];
        let hess2 = f.hess_u[i] * f.hess_u[i];
        let gu2 = f.grad_u[i] * f.grad_u[i];
        let phi2p = pow_nonneg(phi, 2.0 * p);
        let rm_p = pow_nonneg(rm, p);
        let rm_p1 = pow_nonneg(rm, p - 1.0);
        s.a1 += rm_p * phi2p * w;
        s.a2 += rm_p1 * phi2p * w;
        s.a3 += rm_p1 * gphi2 * pow_nonneg(phi, 2.0 * p - 1.0) * w;
        s.a4 += rm_p1 * gphi2 * pow_nonneg(phi, 2.0 * p - 2.0) * w;
        s.b1 += f.grad_ric[i] * f.grad_ric[i] * rm_p1 * phi2p * w;
        s.b2 += f.grad_rm[i] * f.grad_rm[i] * pow_nonneg(rm, p - 3.0) * phi2p * w;
        for (j, tk) in s.tk.iter_mut().enumerate() {
            *tk += pow_nonneg(rm, j as f64) * hess2 * phi2p * w;
        }
        s.tp += rm_p1 * hess2 * phi2p * w;
        s.tp_minus_one += pow_nonneg(rm, p - 2.0) * hess2 * phi2p * w;
        s.s += rm_p1 * gu2 * phi2p * w;
        s.s_tilde += gu2 * phi2p * w;
        s.ric_weighted += f.ric[i] * f.ric[i] * rm_p1 * phi2p * w;
        let d = f.distance[i];
        if d < radius {
            s.vol_omega += w;
            s.ball_full += rm_p * w;
        }
        if d < 0.5 * radius {
            s.vol_ball_half += w;
            s.lhs_ball += rm_p * w;
            for (q, v) in s.lp_ball.iter_mut() {
                *v += pow_nonneg(rm, *q) * w;
            }
        }
    }
    s.b1 /= k;
    Ok(s)
}

/// Samples a snapshot: the cutoff is built from `g(0)`, `|∇φ|` is measured with `g(t)`.
pub fn sample_quantities(
    state: &FlowState,
    pack: &CurvaturePack,
    cutoff: &CutoffData,
    p: f64,
    extra_p: &[f64],
) -> Result<MonitorSample> {
    let grid = state.g.grid();
    if *cutoff.grid() != grid || pack.scalar.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    let grad_phi = localization::gradient_norm(&cutoff.phi, &state.g)?;
    let cell = grid.cell_volume();
    let weight: Vec<f64> = state.g.volume_element().iter().map(|v| v * cell).collect();
    let n = &pack.norms;
    let fields = SampleFields {
        rm: n.rm.values(),
        ric: n.ric.values(),
        grad_rm: n.grad_rm.values(),
        grad_ric: n.grad_ric.values(),
        grad_u: n.grad_u.values(),
        hess_u: n.hess_u.values(),
        phi: cutoff.phi.values(),
        grad_phi: grad_phi.values(),
        distance: cutoff.distance.values(),
        weight: &weight,
    };
    sample_from_fields(state.t, &fields, p, cutoff.k, cutoff.radius, extra_p)
}

/// Residuals of the three bounds every sample satisfies: Hölder for `A₂`,
/// `S ≤ L²A₂` and `∫|Ric|²|Rm|^{p−1}φ^{2p} ≤ K²A₂`. Each entry is
/// `(lhs − rhs)₊ / max(rhs, tiny)`.
pub fn sample_bound_violations(s: &MonitorSample, k: f64, l: f64) -> [f64; 3] {
    let rel = |lhs: f64, rhs: f64| {
        let excess = lhs - rhs;
        if excess <= 1e-12 * lhs.abs().max(rhs.abs()) {
            0.0
        } else {
            excess / rhs.abs().max(f64::MIN_POSITIVE)
        }
    };
    let holder = powf(s.a1, (s.p - 1.0) / s.p) * powf(s.vol_omega, 1.0 / s.p);
    [rel(s.a2, holder), rel(s.s, l * l * s.a2), rel(s.ric_weighted, k * k * s.a2)]
}

/// One evaluation of the interpolation inequality between the `T_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationCheck {
    pub k: usize,
    pub c: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `T_k ≤ T_p / C^{p−k} + (p−k) C^{k−1} T₁`, relative tolerance `1e−12`.
pub fn check_interpolation(sample: &MonitorSample, c: f64, k: usize) -> Result<InterpolationCheck> {
    let p = sample.p;
    if !(c > 0.0) {
        return Err(invalid("C must be positive"));
    }
    if k < 1 || k as f64 > floor(p) {
        return Err(invalid("k must satisfy 1 <= k <= floor(p)"));
    }
    let lhs = sample.tk[k - 1];
    let rhs = sample.tp / powf(c, p - k as f64) + (p - k as f64) * powf(c, k as f64 - 1.0) * sample.t1();
    let pass = lhs <= rhs + 1e-12 * lhs.abs().max(rhs.abs());
    Ok(InterpolationCheck { k, c, lhs, rhs, pass })
}

/// The audited differential inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InequalityId {
    /// `A₁′ ≤ B₁ + C(K B₂ + K A₄ + (K+L²)A₁ + T_p)`.
    CurvatureEnergy,
    /// `B₁ + (1/2K)(∫|Ric|²|Rm|^{p−1}φ^{2p})′ ≤ C(K B₂ + (K+L²)A₁ + KL²A₂ + K A₄ + T_p)`.
    RicciGradient,
    /// `B₂ + A₂′/(p−1) ≤ C(A₁ + A₄ + L²A₂ + T_{p−1})`.
    LowerPower,
    /// `T_p + S′ + C/(p−1)·A₂′ + C/K·(∫|Ric|²|Rm|^{p−1}φ^{2p})′ ≤ C·Y + C^{p−1}T₁`.
    HessianCoupling,
    /// `T₁ + S̃′ ≤ C L² Vol_{g(t)}(Ω)`.
    GradientEnergy,
}

impl InequalityId {
    pub const ALL: [InequalityId; 5] =
        [InequalityId::CurvatureEnergy, InequalityId::RicciGradient, InequalityId::LowerPower, InequalityId::HessianCoupling, InequalityId::GradientEnergy];

    pub fn name(self) -> &'static str {
        match self {
            InequalityId::CurvatureEnergy => "curvature_energy",
            InequalityId::RicciGradient => "ricci_gradient",
            InequalityId::LowerPower => "lower_power",
            InequalityId::HessianCoupling => "hessian_coupling",
            InequalityId::GradientEnergy => "gradient_energy",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    /// Basis vanishes while the left side is positive at time `t`.
    Infeasible { t: f64 },
}

/// Time series and fitted constant of one inequality `lhs ≤ fixed + C·basis`.
/// For the jointly fitted inequality `basis` holds the linear coefficient and
/// `power_term` the `T₁` series multiplying `C^{p−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub id: InequalityId,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub fixed: Vec<f64>,
    pub basis: Vec<f64>,
    pub power_term: Option<Vec<f64>>,
    pub c_fit: f64,
    /// Time at which the fitted constant is attained.
    pub binding_time: Option<f64>,
    pub verdict: Verdict,
    /// Fit with the alternative `2(8C)^{p/2}T₁` form (jointly fitted inequality only).
    pub alt_c_fit: Option<f64>,
    /// `C_fit(fine)/C_fit(coarse)` when a refinement companion was run.
    pub refinement_ratio: Option<f64>,
    pub note: Option<String>,
}

impl InequalityReport {
    pub fn pass(&self) -> bool {
        self.verdict == Verdict::Pass && self.c_fit.is_finite()
    }
}

fn series<F: Fn(&MonitorSample) -> f64>(samples: &[MonitorSample], f: F) -> Vec<f64> {
    samples.iter().map(f).collect()
}

/// `max_t (lhs − fixed)₊ / basis` over interior times.
pub fn fit_ratio(times: &[f64], lhs: &[f64], fixed: &[f64], basis: &[f64]) -> (f64, Option<f64>, Verdict) {
    let n = times.len();
    let scale = (0..n).map(|i| lhs[i].abs() + fixed[i].abs() + basis[i].abs()).fold(0.0, f64::max);
    let tol = 1e-9 * scale;
    let mut c = 0.0f64;
    let mut at = None;
    for i in 1..n.saturating_sub(1) {
        let excess = lhs[i] - fixed[i];
        if excess <= tol {
            continue;
        }
        if basis[i] <= 1e-14 * scale {
            return (f64::INFINITY, Some(times[i]), Verdict::Infeasible { t: times[i] });
        }
        let r = excess / basis[i];
        if r > c {
            c = r;
            at = Some(times[i]);
        }
    }
    (c, at, Verdict::Pass)
}

/// Smallest `C ≥ 0` with `C·x_t + coef·C^q·y_t ≥ r_t` for every `t`, all
/// functions being convex in `C`. Returns `None` if no such `C` exists.
pub fn joint_fit(x: &[f64], y: &[f64], r: &[f64], coef: f64, q: f64) -> Option<(f64, Option<usize>)> {
    let f = |i: usize, c: f64| c * x[i] + coef * pow_nonneg(c, q) * y[i] - r[i];
    let scale = (0..x.len()).map(|i| x[i].abs() + y[i].abs() + r[i].abs()).fold(0.0, f64::max);
    let tol = 1e-12 * scale;
    let mut c = 0.0f64;
    let mut binding = None;
    // each violated constraint pushes C to the right end of its negative interval
    for _ in 0..10 * x.len() + 10 {
        let worst = (0..x.len()).find(|&i| f(i, c) < -tol);
        let Some(i) = worst else {
            return Some((c, binding));
        };
        let mut hi = if c > 0.0 { 2.0 * c } else { 1.0 };
        let mut grow = 0;
        while !(f(i, hi) >= 0.0) {
            hi *= 2.0;
            grow += 1;
            if grow > 2000 || !hi.is_finite() {
                return None;
            }
        }
        let mut lo = c;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(i, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        c = hi;
        binding = Some(i);
    }
    None
}

/// Fits the minimal constant of one audited inequality from a sample series.
/// `k` and `l` are the run-wide sup bounds (with `k > 0`).
pub fn fit_inequality_constant(
    id: InequalityId,
    samples: &[MonitorSample],
    k: f64,
    l: f64,
) -> Result<InequalityReport> {
    if samples.len() < 5 {
        return Err(Error::TooFewSamples { needed: 5, got: samples.len() });
    }
    if !(k > 0.0) || !(l >= 0.0) {
        return Err(invalid("K must be positive and L nonnegative"));
    }
    let p = samples[0].p;
    let times = series(samples, |s| s.t);
    let d = |f: fn(&MonitorSample) -> f64| diff::time_derivative(&times, &series(samples, f));
    let l2 = l * l;
    let n = samples.len();
    let zeros = vec![0.0; n];
    let mut note = None;
    let (lhs, fixed, basis) = match id {
        InequalityId::CurvatureEnergy => {
            let da1 = d(|s| s.a1)?;
            let basis = series(samples, |s| k * s.b2 + k * s.a4 + (k + l2) * s.a1 + s.tp);
            (da1, series(samples, |s| s.b1), basis)
        }
        InequalityId::RicciGradient => {
            let dr = d(|s| s.ric_weighted)?;
            let lhs = (0..n).map(|i| samples[i].b1 + dr[i] / (2.0 * k)).collect();
            let basis =
                series(samples, |s| k * s.b2 + (k + l2) * s.a1 + k * l2 * s.a2 + k * s.a4 + s.tp);
            note = Some(String::from("single constant fitted for the T_p term (C and C_0 forms coincide)"));
            (lhs, zeros.clone(), basis)
        }
        InequalityId::LowerPower => {
            let da2 = d(|s| s.a2)?;
            let lhs = (0..n).map(|i| samples[i].b2 + da2[i] / (p - 1.0)).collect();
            let basis = series(samples, |s| s.a1 + s.a4 + l2 * s.a2 + s.tp_minus_one);
            (lhs, zeros.clone(), basis)
        }
        InequalityId::GradientEnergy => {
            let ds = d(|s| s.s_tilde)?;
            let lhs = (0..n).map(|i| samples[i].t1() + ds[i]).collect();
            let basis = series(samples, |s| l2 * s.vol_omega);
            (lhs, zeros.clone(), basis)
        }
        InequalityId::HessianCoupling => return fit_hessian_coupling(samples, &times, k, l),
    };
    let (c_fit, at, verdict) = fit_ratio(&times, &lhs, &fixed, &basis);
    Ok(InequalityReport {
        id,
        times,
        lhs,
        fixed,
        basis,
        power_term: None,
        c_fit,
        binding_time: at,
        verdict,
        alt_c_fit: None,
        refinement_ratio: None,
        note,
    })
}

/// `T_p + S′ + C/(p−1)·A₂′ + C/K·(∫|Ric|²|Rm|^{p−1}φ^{2p})′ ≤ C·Y + C^{p−1}T₁` with
/// `Y = (K+L²)A₁ + KL²A₂ + (K+L²)A₄`. Stored as `lhs = T_p + S′`,
/// `basis = Y − A₂′/(p−1) − (∫…)′/K`, `power_term = T₁`.
fn fit_hessian_coupling(samples: &[MonitorSample], times: &[f64], k: f64, l: f64) -> Result<InequalityReport> {
    let p = samples[0].p;
    let l2 = l * l;
    let n = samples.len();
    let ds = diff::time_derivative(times, &series(samples, |s| s.s))?;
    let da2 = diff::time_derivative(times, &series(samples, |s| s.a2))?;
    let dr = diff::time_derivative(times, &series(samples, |s| s.ric_weighted))?;
    let lhs: Vec<f64> = (0..n).map(|i| samples[i].tp + ds[i]).collect();
    let basis: Vec<f64> = (0..n)
        .map(|i| {
            let s = &samples[i];
            (k + l2) * s.a1 + k * l2 * s.a2 + (k + l2) * s.a4 - da2[i] / (p - 1.0) - dr[i] / k
        })
        .collect();
    let t1 = series(samples, |s| s.t1());
    let inner = 1..n - 1;
    let sub = |v: &[f64]| v[inner.clone()].to_vec();
    let (xs, ys, rs) = (sub(&basis), sub(&t1), sub(&lhs));
    let fit = joint_fit(&xs, &ys, &rs, 1.0, p - 1.0);
    let alt = joint_fit(&xs, &ys, &rs, 2.0 * powf(8.0, p / 2.0), p / 2.0);
    let (c_fit, binding_time, verdict) = match fit {
        Some((c, b)) => (c, b.map(|i| times[i + 1]), Verdict::Pass),
        None => (f64::INFINITY, None, Verdict::Infeasible { t: times[1] }),
    };
    Ok(InequalityReport {
        id: InequalityId::HessianCoupling,
        times: times.to_vec(),
        lhs,
        fixed: vec![0.0; n],
        basis,
        power_term: Some(t1),
        c_fit,
        binding_time,
        verdict,
        alt_c_fit: Some(alt.map_or(f64::INFINITY, |a| a.0)),
        refinement_ratio: None,
        note: Some(String::from("alternative fit uses the 2(8C)^{p/2} T_1 form")),
    })
}

/// `U = A₁ + CK/(p−1)·A₂ + C·∫|Ric|²|Rm|^{p−1}φ^{2p} + CK·S + K C^p·S̃`.
pub fn assemble_u(sample: &MonitorSample, k: f64, p: f64, c: f64) -> f64 {
    sample.a1
        + c * k / (p - 1.0) * sample.a2
        + c * sample.ric_weighted
        + c * k * sample.s
        + k * powf(c, p) * sample.s_tilde
}

/// Explicit constants of the ball estimate. `ln_*` are natural logarithms,
/// finite even when the values themselves overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaConstants {
    pub c_in: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub ln_lambda2: f64,
    pub ln_gamma1: f64,
    pub ln_gamma2: f64,
    pub overflow: bool,
}

fn ln_add(a: f64, b: f64) -> f64 {
    // ln(e^a + e^b)
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + ln(1.0 + exp(lo - hi))
}

fn ln_pos(x: f64) -> f64 {
    if x > 0.0 {
        ln(x)
    } else {
        f64::NEG_INFINITY
    }
}

/// `Λ₁ = C(p−1)KL² + CK(K+L²)`, `Λ₂ = CK(K+L²)K^p e^{2pKT}ρ^{−2p} + CK C^p L²`,
/// `Γ₁ = e^{Λ₁T}(CK/(p−1) + CK² + CKL²)`, `Γ₂ = e^{Λ₁T}(CK/(p−1) + C + CKL² + Λ₂)`.
pub fn gamma_constants(k: f64, l: f64, t: f64, p: f64, rho: f64, c: f64) -> Result<GammaConstants> {
    check_p(p)?;
    if !(k > 0.0 && rho > 0.0 && c > 0.0 && l >= 0.0 && t >= 0.0) {
        return Err(invalid("gamma constants need K, rho, C > 0 and L, T >= 0"));
    }
    let l2 = l * l;
    let lambda1 = c * (p - 1.0) * k * l2 + c * k * (k + l2);
    let ln_a = ln(c * k * (k + l2)) + p * ln(k) + 2.0 * p * k * t - 2.0 * p * ln(rho);
    let ln_b = ln_pos(c * k * l2) + p * ln(c);
    let ln_lambda2 = ln_add(ln_a, ln_b);
    let lambda2 = exp(ln_lambda2);
    let base1 = c * k / (p - 1.0) + c * k * k + c * k * l2;
    let ln_gamma1 = lambda1 * t + ln(base1);
    let base2 = c * k / (p - 1.0) + c + c * k * l2;
    let ln_gamma2 = lambda1 * t + ln_add(ln(base2), ln_lambda2);
    let gamma1 = exp(ln_gamma1);
    let gamma2 = exp(ln_gamma2);
    let overflow = !(lambda1.is_finite() && lambda2.is_finite() && gamma1.is_finite() && gamma2.is_finite());
    Ok(GammaConstants {
        c_in: c,
        lambda1,
        lambda2,
        gamma1,
        gamma2,
        ln_lambda2,
        ln_gamma1,
        ln_gamma2,
        overflow,
    })
}

/// Smallest `C` with
/// `U(0) ≤ C(K/(p−1) + K² + KL²)·A₁(0) + C(K/(p−1) + 1 + KL²)·Vol(Ω)(0)`,
/// the initial bound behind `Γ₁, Γ₂`, which absorbs the unit coefficient of `A₁`
/// into `C`. `None` when no `C` satisfies it.
pub fn absorption_constant(initial: &MonitorSample, k: f64, l: f64, p: f64) -> Option<f64> {
    let s = initial;
    let l2 = l * l;
    let slope = (k / (p - 1.0) + k * k + k * l2) * s.a1 + (k / (p - 1.0) + 1.0 + k * l2) * s.vol_omega
        - k / (p - 1.0) * s.a2
        - s.ric_weighted
        - k * s.s;
    let power = k * s.s_tilde;
    let h = |c: f64| c * slope - s.a1 - power * powf(c, p);
    if s.a1 <= 0.0 && power <= 0.0 {
        return Some(0.0);
    }
    if !(slope > 0.0) {
        return None;
    }
    let peak = if power > 0.0 { powf(slope / (p * power), 1.0 / (p - 1.0)) } else { f64::INFINITY };
    if power <= 0.0 {
        return Some(s.a1 / slope);
    }
    if h(peak) < 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (0.0, peak);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// Margins of `∫_{B(ρ/2√K)}|Rm(t)|^p ≤ Γ₁ ∫_{B(ρ/√K)}|Rm(0)|^p + Γ₂ Vol_{g(0)}(B(ρ/√K))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallEstimateReport {
    pub rhs: f64,
    pub ln_rhs: f64,
    pub lhs: Vec<f64>,
    /// `(RHS − LHS)/RHS` per snapshot.
    pub margins: Vec<f64>,
    pub first_violation: Option<f64>,
}

impl BallEstimateReport {
    pub fn pass(&self) -> bool {
        self.first_violation.is_none()
    }
}

pub fn ball_estimate_check(samples: &[MonitorSample], gamma: &GammaConstants) -> Result<BallEstimateReport> {
    let first = samples.first().ok_or(Error::EmptyTrajectory)?;
    let ln_rhs = ln_add(gamma.ln_gamma1 + ln_pos(first.ball_full), gamma.ln_gamma2 + ln_pos(first.vol_omega));
    let rhs = exp(ln_rhs);
    let lhs: Vec<f64> = samples.iter().map(|s| s.lhs_ball).collect();
    let margins: Vec<f64> = lhs
        .iter()
        .map(|&v| if rhs.is_finite() { (rhs - v) / rhs } else { 1.0 - exp(ln_pos(v) - ln_rhs) })
        .collect();
    let first_violation = samples.iter().zip(&margins).find(|(_, m)| **m < 0.0).map(|(s, _)| s.t);
    Ok(BallEstimateReport { rhs, ln_rhs, lhs, margins, first_violation })
}

/// Fitted constant of the normalized restatement for one exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedFit {
    pub p: f64,
    /// `max_t ⨍|Rm(t)|^p / (⨍|Rm(0)|^p + K^p ρ^{−2p})`.
    pub ratio: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedReport {
    pub fits: Vec<NormalizedFit>,
    /// `max C / min C` over the exponents (1 when every C vanishes).
    pub spread: f64,
    pub uniform: bool,
}

/// Solves `C e^{C(p−1)} = m` for `C ≥ 0`.
pub fn solve_normalized_constant(m: f64, p: f64) -> f64 {
    if !(m > 0.0) {
        return 0.0;
    }
    let f = |c: f64| c * exp(c * (p - 1.0)) - m;
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Minimal `C` per exponent with
/// `⨍_{B(ρ/2√K)}|Rm(t)|^p ≤ Ce^{C(p−1)}(⨍|Rm(0)|^p + K^p ρ^{−2p})` at every sample.
/// Averages use `Vol_{g(t)}` of the half ball; exponents come from `lp_ball`.
pub fn normalized_lp_check(samples: &[MonitorSample], k: f64, rho: f64) -> Result<NormalizedReport> {
    let first = samples.first().ok_or(Error::EmptyTrajectory)?;
    if !(k > 0.0 && rho > 0.0) {
        return Err(invalid("K and rho must be positive"));
    }
    let mut fits = Vec::new();
    for (j, &(p, _)) in first.lp_ball.iter().enumerate() {
        if !(3.0..=8.0).contains(&p) {
            return Err(invalid("normalized exponents must lie in [3, 8]"));
        }
        let avg = |s: &MonitorSample| s.lp_ball[j].1 / s.vol_ball_half;
        let denom = avg(first) + exp(p * ln(k) - 2.0 * p * ln(rho));
        let ratio = samples.iter().map(|s| avg(s) / denom).fold(0.0, f64::max);
        fits.push(NormalizedFit { p, ratio, c: solve_normalized_constant(ratio, p) });
    }
    let hi = fits.iter().map(|f| f.c).fold(0.0, f64::max);
    let lo = fits.iter().map(|f| f.c).fold(f64::INFINITY, f64::min);
    let spread = if hi == 0.0 { 1.0 } else if lo > 0.0 { hi / lo } else { f64::INFINITY };
    Ok(NormalizedReport { fits, spread, uniform: spread < 1.5 })
}
