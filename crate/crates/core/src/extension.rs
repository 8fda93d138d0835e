//! Audits of the extension argument: the pointwise heat-operator bound on
//! `|Rm|`, the Riccati inequality for `Φ = |Rm| + C_m|∇u|² + 1`, the local
//! energy inequality feeding the Moser iteration, and its sup-bound output.

use alloc::vec::Vec;

use crate::curvature::{self, CurvaturePack};
use crate::diff;
use crate::error::{invalid, Error, Result};
use crate::flow::FlowState;
use crate::grid::ScalarField;
use crate::localization;
use crate::math::{exp, ln, pow_nonneg, powf, sqrt};
use crate::MetricField;

/// Regularization of `|Rm|` before differentiating it in space or time.
pub const NORM_EPS: f64 = 1e-8;

/// Pointwise data of one snapshot used by every audit here.
#[derive(Debug, Clone)]
pub struct ExtensionSnapshot {
    pub t: f64,
    pub g: MetricField,
    /// `√det g · ∏h_i` per lattice point.
    pub weight: Vec<f64>,
    pub rm: Vec<f64>,
    /// `√(|Rm|² + ε²)`.
    pub rm_reg: Vec<f64>,
    pub lap_rm_reg: Vec<f64>,
    pub grad_u_sq: Vec<f64>,
    pub lap_grad_u_sq: Vec<f64>,
    pub hess_u: Vec<f64>,
    pub scalar: Vec<f64>,
}

impl ExtensionSnapshot {
    pub fn new(state: &FlowState, pack: &CurvaturePack) -> Result<Self> {
        let grid = state.g.grid();
        if pack.scalar.grid() != &grid {
            return Err(Error::GridMismatch);
        }
        let ginv = state.g.inverse()?;
        let rm = pack.norms.rm.values().to_vec();
        let rm_reg: Vec<f64> = rm.iter().map(|r| sqrt(r * r + NORM_EPS * NORM_EPS)).collect();
        let lap_rm_reg = curvature::laplacian_with(&rm_reg, &grid, &pack.christoffel, &ginv);
        let grad_u_sq = curvature::gradient_norm_sq(&pack.du, &ginv);
        let lap_grad_u_sq = curvature::laplacian_with(&grad_u_sq, &grid, &pack.christoffel, &ginv);
        let cell = grid.cell_volume();
        Ok(Self {
            t: state.t,
            g: state.g.clone(),
            weight: state.g.volume_element().iter().map(|v| v * cell).collect(),
            rm,
            rm_reg,
            lap_rm_reg,
            grad_u_sq,
            lap_grad_u_sq,
            hess_u: pack.norms.hess_u.values().to_vec(),
            scalar: pack.scalar.values().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.rm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rm.is_empty()
    }

    pub fn phi(&self, c_m: f64) -> Vec<f64> {
        phi_values(&self.rm, &self.grad_u_sq, c_m)
    }

    fn phi_reg(&self, c_m: f64) -> Vec<f64> {
        phi_values(&self.rm_reg, &self.grad_u_sq, c_m)
    }
}

fn check_c_m(c_m: f64) -> Result<()> {
    if c_m >= 2.0 && c_m.is_finite() {
        Ok(())
    } else {
        Err(invalid("C_m must be a finite real >= 2"))
    }
}

/// `|Rm| + C_m|∇u|² + 1` pointwise.
pub fn phi_values(rm: &[f64], grad_u_sq: &[f64], c_m: f64) -> Vec<f64> {
    rm.iter().zip(grad_u_sq).map(|(r, w)| r + c_m * w + 1.0).collect()
}

/// `Φ` of one snapshot as a field.
pub fn build_phi(snap: &ExtensionSnapshot, c_m: f64) -> Result<ScalarField> {
    check_c_m(c_m)?;
    ScalarField::new(snap.g.grid(), snap.phi(c_m))
}

fn check_snapshots(snaps: &[ExtensionSnapshot]) -> Result<Vec<f64>> {
    if snaps.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: snaps.len() });
    }
    if snaps.iter().any(|s| s.len() != snaps[0].len()) {
        return Err(Error::GridMismatch);
    }
    let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    diff::check_times(&times)?;
    Ok(times)
}

/// A space-time location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub t: f64,
    pub point: usize,
}

/// Fitted constant of a pointwise inequality together with where it binds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointwiseFit {
    pub c: f64,
    pub witness: Option<Witness>,
}

/// `□f = ∂_t f − Δf` at interior snapshot `i`.
fn heat_operator(times: &[f64], fields: &[&[f64]], lap: &[f64], i: usize) -> Result<Vec<f64>> {
    let dt = diff::field_time_derivative(times, fields, i)?;
    Ok(dt.iter().zip(lap).map(|(a, b)| a - b).collect())
}

/// Minimal `C` with `□|Rm| ≤ C(|Rm|² + |∇²u|² + 1)` over interior snapshots.
pub fn heat_bound_fit(snaps: &[ExtensionSnapshot]) -> Result<PointwiseFit> {
    let times = check_snapshots(snaps)?;
    let fields: Vec<&[f64]> = snaps.iter().map(|s| s.rm_reg.as_slice()).collect();
    let mut fit = PointwiseFit { c: 0.0, witness: None };
    for i in 1..snaps.len() - 1 {
        let s = &snaps[i];
        let box_rm = heat_operator(&times, &fields, &s.lap_rm_reg, i)?;
        for (p, b) in box_rm.iter().enumerate() {
            let denom = s.rm[p] * s.rm[p] + s.hess_u[p] * s.hess_u[p] + 1.0;
            let r = b.max(0.0) / denom;
            if r > fit.c {
                fit = PointwiseFit { c: r, witness: Some(Witness { t: s.t, point: p }) };
            }
        }
    }
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiReport {
    pub c_m: f64,
    /// Discretization allowance: `C_m` times the largest residual of the
    /// exact identity `□|∇u|² = −2|∇²u|² − 4|∇u|⁴` on the same snapshots.
    pub slack: f64,
    /// Largest `□Φ − C_mΦ²`.
    pub worst_excess: f64,
    pub pass: bool,
    /// Where `worst_excess` is attained.
    pub witness: Option<Witness>,
}

/// `□Φ ≤ C_mΦ² + slack` at every interior space-time point.
pub fn riccati_check(snaps: &[ExtensionSnapshot], c_m: f64) -> Result<RiccatiReport> {
    let times = check_snapshots(snaps)?;
    if !(c_m > 0.0) {
        return Err(invalid("C_m must be positive"));
    }
    let phis: Vec<Vec<f64>> = snaps.iter().map(|s| s.phi_reg(c_m)).collect();
    let phi_refs: Vec<&[f64]> = phis.iter().map(|v| v.as_slice()).collect();
    let grads: Vec<&[f64]> = snaps.iter().map(|s| s.grad_u_sq.as_slice()).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let mut residual = 0.0f64;
    for i in 1..snaps.len() - 1 {
        let s = &snaps[i];
        let lap: Vec<f64> = s.lap_rm_reg.iter().zip(&s.lap_grad_u_sq).map(|(a, b)| a + c_m * b).collect();
        let box_phi = heat_operator(&times, &phi_refs, &lap, i)?;
        let box_grad = heat_operator(&times, &grads, &s.lap_grad_u_sq, i)?;
        for p in 0..s.len() {
            let w = s.grad_u_sq[p];
            let h = s.hess_u[p];
            residual = residual.max((box_grad[p] + 2.0 * h * h + 4.0 * w * w).abs());
            let excess = box_phi[p] - c_m * phis[i][p] * phis[i][p];
            if excess > worst {
                worst = excess;
                witness = Some(Witness { t: s.t, point: p });
            }
        }
    }
    let slack = c_m * residual;
    Ok(RiccatiReport { c_m, slack, worst_excess: worst, pass: worst <= slack, witness })
}

/// `((r/2 − d)/(r/2))₊`: a Lipschitz bump supported in the half ball.
pub fn half_ball_cutoff(distance: &ScalarField, radius: f64) -> Result<ScalarField> {
    if !(radius > 0.0) {
        return Err(invalid("cutoff radius must be positive"));
    }
    let h = 0.5 * radius;
    Ok(distance.map(|d| ((h - d) / h).max(0.0)))
}

/// Per-snapshot integrals of the local energy inequality with `u = f = Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub a: f64,
    pub times: Vec<f64>,
    /// `−∫φ²Φ^{2a−1}ΔΦ dV`.
    pub diffusion: Vec<f64>,
    /// `(1/2a)∫φ²∂_t(Φ^{2a}) dV`.
    pub time_term: Vec<f64>,
    /// `∫φ²Φ^{2a+1} dV`.
    pub reaction: Vec<f64>,
    pub c_fit: f64,
    /// Fit of `∫|∇(φΦ^a)|² + ½(∫φ²Φ^{2a})′ ≤ C·a∫φ²Φ^{2a+1} + ∫|∇φ|²Φ^{2a}`.
    pub derived_c_fit: f64,
    pub feasible: bool,
}

fn max_ratio(num: &[f64], den: &[f64], range: core::ops::Range<usize>) -> f64 {
    let scale = range.clone().map(|i| num[i].abs() + den[i].abs()).fold(0.0, f64::max);
    let mut c = 0.0f64;
    for i in range {
        if num[i] <= 1e-12 * scale {
            continue;
        }
        c = c.max(if den[i] > 0.0 { num[i] / den[i] } else { f64::INFINITY });
    }
    c
}

/// Smallest `C` with `diffusion + time ≤ C·reaction` at interior snapshots.
pub fn energy_constant(diffusion: &[f64], time_term: &[f64], reaction: &[f64]) -> f64 {
    let n = diffusion.len().min(time_term.len()).min(reaction.len());
    if n < 3 {
        return 0.0;
    }
    let lhs: Vec<f64> = (0..n).map(|i| diffusion[i] + time_term[i]).collect();
    max_ratio(&lhs, reaction, 1..n - 1)
}

pub fn energy_inequality_check(
    snaps: &[ExtensionSnapshot],
    a: f64,
    cut: &ScalarField,
    c_m: f64,
) -> Result<EnergyReport> {
    let times = check_snapshots(snaps)?;
    if !(a >= 1.0) {
        return Err(invalid("energy exponent a must be >= 1"));
    }
    check_c_m(c_m)?;
    if cut.values().len() != snaps[0].len() {
        return Err(Error::GridMismatch);
    }
    let cutv = cut.values();
    let phis: Vec<Vec<f64>> = snaps.iter().map(|s| s.phi_reg(c_m)).collect();
    let pow2a: Vec<Vec<f64>> = phis.iter().map(|v| v.iter().map(|x| powf(*x, 2.0 * a)).collect()).collect();
    let pow_refs: Vec<&[f64]> = pow2a.iter().map(|v| v.as_slice()).collect();
    let n = snaps.len();
    let (mut diffusion, mut time_term, mut reaction) = (Vec::new(), Vec::new(), Vec::new());
    let (mut mass, mut grad_term, mut cut_term) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let s = &snaps[i];
        let phi = &phis[i];
        let lap: Vec<f64> = s.lap_rm_reg.iter().zip(&s.lap_grad_u_sq).map(|(x, y)| x + c_m * y).collect();
        let dt = diff::field_time_derivative(&times, &pow_refs, i)?;
        let mut d = 0.0;
        let mut tt = 0.0;
        let mut r = 0.0;
        let mut m = 0.0;
        for p in 0..s.len() {
            let c2 = cutv[p] * cutv[p] * s.weight[p];
            d -= c2 * powf(phi[p], 2.0 * a - 1.0) * lap[p];
            tt += c2 * dt[p] / (2.0 * a);
            r += c2 * pow2a[i][p] * phi[p];
            m += c2 * pow2a[i][p];
        }
        let grid = s.g.grid();
        let prod = ScalarField::new(grid, (0..s.len()).map(|p| cutv[p] * powf(phi[p], a)).collect())?;
        let gprod = localization::gradient_norm(&prod, &s.g)?;
        let gcut = localization::gradient_norm(cut, &s.g)?;
        let mut gp = 0.0;
        let mut gc = 0.0;
        for p in 0..s.len() {
            gp += gprod.values()[p] * gprod.values()[p] * s.weight[p];
            gc += gcut.values()[p] * gcut.values()[p] * pow2a[i][p] * s.weight[p];
        }
        diffusion.push(d);
        time_term.push(tt);
        reaction.push(r);
        mass.push(m);
        grad_term.push(gp);
        cut_term.push(gc);
    }
    let c_fit = energy_constant(&diffusion, &time_term, &reaction);
    let dmass = diff::time_derivative(&times, &mass)?;
    let derived_lhs: Vec<f64> = (0..n).map(|i| grad_term[i] + 0.5 * dmass[i] - cut_term[i]).collect();
    let a_reaction: Vec<f64> = reaction.iter().map(|r| a * r).collect();
    let derived_c_fit = max_ratio(&derived_lhs, &a_reaction, 1..n - 1);
    Ok(EnergyReport {
        a,
        times,
        diffusion,
        time_term,
        reaction,
        c_fit,
        derived_c_fit,
        feasible: c_fit.is_finite(),
    })
}

/// Inputs of the sup-bound bookkeeping besides the snapshots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoserInputs {
    pub p: f64,
    pub k: f64,
    pub l: f64,
    pub rho: f64,
    pub c_m: f64,
    /// `C e^{C(p−1)}` from the normalized ball estimate at exponent `p`.
    pub normalized_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoserReport {
    pub horizon: f64,
    /// `sup Φ` over `B(ρ/4√K) × [T/2, T]`.
    pub sup_phi_inner: f64,
    /// `sup_x Φ(t)` per snapshot over the whole lattice.
    pub sup_phi: Vec<f64>,
    /// `sup_t (⨍_{B(ρ/2√K)} Φ^p dV₀)^{1/p}`.
    pub a: f64,
    /// Initial ball average of `|Rm|^p` over `B(ρ/√K)`.
    pub initial_average: f64,
    /// `3[M(Λ₀ + K^pρ^{−2p})]^{1/p} + 3C_mL² + 3`.
    pub c_n: f64,
    /// `sup Φ / (e^{T+ρ/√K}(1 + C_n + K/ρ² + 1/T))` with unit exponents.
    pub implied_constant: f64,
    /// Largest `d/dt ln sup Φ`, floored at 0.
    pub growth_rate: f64,
    /// Whether `sup Φ(t) ≤ 10 sup Φ(0) e^{rate·t}` at every snapshot.
    pub growth_bounded: bool,
    /// `max(0, −inf(R − 2|∇u|²))`.
    pub lower_scalar_bound: f64,
    /// `max |R − 2|∇u|²| / Φ`.
    pub scalar_phi_ratio: f64,
}

pub fn moser_sup_report(
    snaps: &[ExtensionSnapshot],
    distance: &ScalarField,
    inputs: &MoserInputs,
) -> Result<MoserReport> {
    let times = check_snapshots(snaps)?;
    let MoserInputs { p, k, l, rho, c_m, normalized_factor } = *inputs;
    check_c_m(c_m)?;
    if !(k > 0.0 && rho > 0.0 && p >= 1.0) {
        return Err(invalid("Moser report needs K, rho > 0 and p >= 1"));
    }
    let horizon = *times.last().unwrap_or(&0.0);
    if !(horizon > 0.0) {
        return Err(invalid("Moser report needs a positive horizon"));
    }
    let half_time = 0.5 * horizon;
    let radius = rho / sqrt(k);
    let d = distance.values();
    let w0 = &snaps[0].weight;
    let mut sup_phi_inner = 0.0f64;
    let mut sup_phi = Vec::with_capacity(snaps.len());
    let mut a_val = 0.0f64;
    let mut lower = 0.0f64;
    let mut ratio = 0.0f64;
    let half_vol: f64 = (0..d.len()).filter(|&q| d[q] < 0.5 * radius).map(|q| w0[q]).sum();
    if !(half_vol > 0.0) {
        return Err(Error::EmptyBall { radius: 0.5 * radius });
    }
    for s in snaps {
        let phi = s.phi(c_m);
        sup_phi.push(phi.iter().copied().fold(0.0, f64::max));
        let mut mean = 0.0;
        for q in 0..phi.len() {
            if s.t >= half_time && d[q] < 0.25 * radius {
                sup_phi_inner = sup_phi_inner.max(phi[q]);
            }
            if d[q] < 0.5 * radius {
                mean += pow_nonneg(phi[q], p) * w0[q];
            }
            let e = s.scalar[q] - 2.0 * s.grad_u_sq[q];
            lower = lower.max(-e);
            ratio = ratio.max(e.abs() / phi[q]);
        }
        a_val = a_val.max(powf(mean / half_vol, 1.0 / p));
    }
    let full_vol: f64 = (0..d.len()).filter(|&q| d[q] < radius).map(|q| w0[q]).sum();
    let full_int: f64 = (0..d.len()).filter(|&q| d[q] < radius).map(|q| pow_nonneg(snaps[0].rm[q], p) * w0[q]).sum();
    let initial_average = if full_vol > 0.0 { full_int / full_vol } else { 0.0 };
    let kp = exp(p * ln(k) - 2.0 * p * ln(rho));
    let c_n = 3.0 * powf(normalized_factor.max(0.0) * (initial_average + kp), 1.0 / p) + 3.0 * c_m * l * l + 3.0;
    let envelope = exp(horizon + radius) * (1.0 + c_n + k / (rho * rho) + 1.0 / horizon);
    let logs: Vec<f64> = sup_phi.iter().map(|v| ln(*v)).collect();
    let growth_rate = diff::time_derivative(&times, &logs)?.into_iter().fold(0.0, f64::max);
    let growth_bounded = times
        .iter()
        .zip(&sup_phi)
        .all(|(t, v)| *v <= 10.0 * sup_phi[0] * exp(growth_rate * t));
    Ok(MoserReport {
        horizon,
        sup_phi_inner,
        sup_phi,
        a: a_val,
        initial_average,
        c_n,
        implied_constant: sup_phi_inner / envelope,
        growth_rate,
        growth_bounded,
        lower_scalar_bound: lower,
        scalar_phi_ratio: ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{evolve, StepControl};
    use crate::grid::PeriodicGrid;
    use core::f64::consts::PI;

    fn flat_snaps() -> Vec<ExtensionSnapshot> {
        let grid = PeriodicGrid::new(2, &[2.0 * PI, 2.0 * PI], &[16, 8]).unwrap();
        let g = MetricField::flat(grid);
        let u = ScalarField::constant(grid, 0.7);
        let s0 = FlowState::new(0.0, g, u).unwrap();
        let traj = evolve(s0, &StepControl::new(0.2, 4), &mut []).unwrap();
        traj.snapshots
            .iter()
            .map(|s| ExtensionSnapshot::new(s, &CurvaturePack::compute(&s.g, &s.u).unwrap()).unwrap())
            .collect()
    }

    #[test]
    fn phi_by_hand() {
        assert_eq!(phi_values(&[2.0], &[0.25], 2.0), alloc::vec![3.5]);
        assert!(check_c_m(1.5).is_err());
    }

    #[test]
    fn flat_audits_are_trivial() {
        let snaps = flat_snaps();
        let phi = build_phi(&snaps[2], 2.0).unwrap();
        assert!(phi.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let fit = heat_bound_fit(&snaps).unwrap();
        assert!(fit.c < 1e-12);
        let r = riccati_check(&snaps, 2.0).unwrap();
        assert!(r.pass);
        let grid = snaps[0].g.grid();
        let d0 = localization::geodesic_distance(&snaps[0].g, 0).unwrap();
        let cut = half_ball_cutoff(&d0, 2.0).unwrap();
        let e = energy_inequality_check(&snaps, 1.0, &cut, 2.0).unwrap();
        assert!(e.feasible && e.c_fit == 0.0);
        assert_eq!(cut.grid(), &grid);
        let m = moser_sup_report(
            &snaps,
            &d0,
            &MoserInputs { p: 3.0, k: 1.0, l: 0.0, rho: 2.0, c_m: 2.0, normalized_factor: 0.0 },
        )
        .unwrap();
        assert!((m.sup_phi_inner - 1.0).abs() < 1e-12 && (m.a - 1.0).abs() < 1e-12);
        assert!(m.implied_constant <= 1.0);
        assert!(m.growth_bounded);
    }

    #[test]
    fn energy_rejects_small_exponent() {
        let snaps = flat_snaps();
        let cut = ScalarField::constant(snaps[0].g.grid(), 0.0);
        assert!(energy_inequality_check(&snaps, 0.5, &cut, 2.0).is_err());
    }
}
