//! Method-of-lines integration of the coupled flow
//! `∂t g = −2 Ric + 4 du⊗du`, `∂t u = Δ_g u` with classical RK4 and a parabolic
//! step bound, plus the run-wide sup bounds and the identity diagnostics that
//! hold along exact solutions.

use alloc::vec::Vec;

use crate::curvature::{self, CurvaturePack};
use crate::diff;
use crate::error::{invalid, Error, Result};
use crate::grid::{self, MetricField, ScalarField, TensorField};
use crate::linalg;
use crate::math::{exp, max_of};

/// One snapshot `(t, g(t), u(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub g: MetricField,
    pub u: ScalarField,
}

impl FlowState {
    pub fn new(t: f64, g: MetricField, u: ScalarField) -> Result<Self> {
        if g.grid() != *u.grid() {
            return Err(Error::GridMismatch);
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid("time must be nonnegative"));
        }
        Ok(Self { t, g, u })
    }

    /// Copies a state that depends on the first coordinate only onto a lattice
    /// with `n` points along every other axis. Exact for such states; any
    /// transverse variation is rejected.
    pub fn with_transverse_resolution(&self, n: usize) -> Result<Self> {
        let old = self.g.grid();
        let dim = old.dim();
        let extents: Vec<f64> = (0..dim).map(|a| old.extent(a)).collect();
        let mut res = alloc::vec![n; dim];
        res[0] = old.resolution(0);
        let grid = grid::PeriodicGrid::new(dim, &extents, &res)?;
        let source = |p: usize| old.linear_index(&[grid.multi_index(p)[0] as isize]);
        let gt = self.g.tensor();
        let u = self.u.values();
        for p in 0..old.len() {
            let s = old.linear_index(&[old.multi_index(p)[0] as isize]);
            let same = u[p] == u[s] && (0..gt.n_components()).all(|c| gt.component(c)[p] == gt.component(c)[s]);
            if !same {
                return Err(invalid("state varies along a transverse axis"));
            }
        }
        let mut t = TensorField::covariant(grid, 2);
        for c in 0..gt.n_components() {
            let src = gt.component(c);
            let dst = t.component_mut(c);
            for (p, v) in dst.iter_mut().enumerate() {
                *v = src[source(p)];
            }
        }
        let u = (0..grid.len()).map(|p| u[source(p)]).collect();
        Ok(Self { t: self.t, g: MetricField::new(t)?, u: ScalarField::new(grid, u)? })
    }
}

/// Step size policy and output schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// Upper bound on the step; the parabolic bound is applied on top.
    pub max_dt: f64,
    /// Fraction σ of the parabolic bound actually used.
    pub safety: f64,
    pub t_max: f64,
    /// Number of equal intervals between stored snapshots.
    pub snapshots: usize,
}

impl StepControl {
    pub fn new(t_max: f64, snapshots: usize) -> Self {
        Self { max_dt: f64::INFINITY, safety: 0.9, t_max, snapshots }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(invalid("t_max must be positive"));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(invalid("safety factor must lie in (0, 1]"));
        }
        if !(self.max_dt > 0.0) {
            return Err(invalid("max_dt must be positive"));
        }
        if self.snapshots == 0 {
            return Err(invalid("need at least one snapshot interval"));
        }
        Ok(())
    }

    /// `σ λ_min(g) min_i h_i² / (2n)`.
    pub fn parabolic_limit(&self, g: &MetricField) -> f64 {
        let grid = g.grid();
        let h = grid.min_spacing();
        let (lo, _) = g.eigen_range();
        self.safety * lo * h * h / (2.0 * grid.dim() as f64)
    }
}

/// Right-hand side `(−2 Ric + 4 du⊗du, Δ_g u)`.
pub fn flow_rhs(state: &FlowState) -> Result<(TensorField, ScalarField)> {
    let g = &state.g;
    let gamma = curvature::christoffel(g)?;
    let rm = curvature::riemann(g, &gamma)?;
    let ric = curvature::ricci(&rm, g)?;
    let du = curvature::gradient(&state.u);
    let lap = curvature::laplacian(&state.u, g, &gamma)?;
    let grid = g.grid();
    let n = grid.dim();
    let np = grid.len();
    let mut dg = TensorField::covariant(grid, 2);
    for i in 0..n {
        for j in 0..n {
            let c = dg.comp(&[i, j]);
            let (ri, di, dj) = (ric.component(c), du.component(i), du.component(j));
            let out = dg.component_mut(c);
            for p in 0..np {
                out[p] = -2.0 * ri[p] + 4.0 * di[p] * dj[p];
            }
        }
    }
    Ok((dg, lap))
}

fn shifted(base: &FlowState, k: &(TensorField, ScalarField), h: f64) -> Result<FlowState> {
    let g = base.g.tensor().add_scaled(&k.0, h)?;
    let u: Vec<f64> = base.u.values().iter().zip(k.1.values()).map(|(a, b)| a + h * b).collect();
    let t = base.t + h;
    let g = MetricField::new(g).map_err(|e| singular(e, t))?;
    Ok(FlowState { t, g, u: ScalarField::new(*base.u.grid(), u)? })
}

fn singular(e: Error, t: f64) -> Error {
    match e {
        Error::NotPositiveDefinite { point } | Error::NonFinite { point } => Error::FlowSingularity { t, point },
        Error::NotSymmetric { point, .. } => Error::FlowSingularity { t, point },
        other => other,
    }
}

/// One classical RK4 step of exactly `dt`.
pub fn rk4_step(state: &FlowState, dt: f64) -> Result<FlowState> {
    let k1 = flow_rhs(state)?;
    let k2 = flow_rhs(&shifted(state, &k1, 0.5 * dt)?)?;
    let k3 = flow_rhs(&shifted(state, &k2, 0.5 * dt)?)?;
    let k4 = flow_rhs(&shifted(state, &k3, dt)?)?;
    let w = dt / 6.0;
    let mut g = state.g.tensor().clone();
    {
        let gd = g.data_mut();
        let (a, b, c, d) = (k1.0.data(), k2.0.data(), k3.0.data(), k4.0.data());
        for i in 0..gd.len() {
            gd[i] += w * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
        }
    }
    let (a, b, c, d) = (k1.1.values(), k2.1.values(), k3.1.values(), k4.1.values());
    let u: Vec<f64> = state
        .u
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v + w * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
        .collect();
    let t = state.t + dt;
    let g = MetricField::new(g).map_err(|e| singular(e, t))?;
    let u = ScalarField::new(*state.u.grid(), u).map_err(|e| singular(e, t))?;
    Ok(FlowState { t, g, u })
}

/// Advances by `min(requested, max_dt, parabolic limit)`; returns the new state and the step used.
pub fn advance_step(state: &FlowState, control: &StepControl, requested: f64) -> Result<(FlowState, f64)> {
    control.validate()?;
    if !(requested > 0.0) {
        return Err(invalid("requested step must be positive"));
    }
    let dt = requested.min(control.max_dt).min(control.parabolic_limit(&state.g));
    Ok((rk4_step(state, dt)?, dt))
}

/// Callback run on every stored snapshot.
pub trait Observer {
    fn on_snapshot(&mut self, state: &FlowState) -> Result<()>;
}

/// Per-step record of the gradient maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub sup_grad_u_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub snapshots: Vec<FlowState>,
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn initial(&self) -> Result<&FlowState> {
        self.snapshots.first().ok_or(Error::EmptyTrajectory)
    }
}

/// Evolution interrupted by an error; `partial` holds everything computed before it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{error}")]
pub struct EvolveError {
    pub error: Error,
    pub partial: Trajectory,
}

pub fn sup_grad_u_sq(state: &FlowState) -> Result<f64> {
    let ginv = state.g.inverse()?;
    let du = curvature::gradient(&state.u);
    Ok(max_of(&curvature::gradient_norm_sq(&du, &ginv)))
}

/// Integrates to `control.t_max`, storing `control.snapshots + 1` equally spaced snapshots.
pub fn evolve(
    initial: FlowState,
    control: &StepControl,
    observers: &mut [&mut dyn Observer],
) -> core::result::Result<Trajectory, EvolveError> {
    let mut traj = Trajectory::default();
    let fail = |error: Error, traj: Trajectory| EvolveError { error, partial: traj };
    if let Err(e) = control.validate() {
        return Err(fail(e, traj));
    }
    let t0 = initial.t;
    let interval = control.t_max / control.snapshots as f64;
    let mut state = initial;
    match sup_grad_u_sq(&state) {
        Ok(s) => traj.steps.push(StepRecord { t: state.t, dt: 0.0, sup_grad_u_sq: s }),
        Err(e) => return Err(fail(e, traj)),
    }
    for obs in observers.iter_mut() {
        if let Err(e) = obs.on_snapshot(&state) {
            return Err(fail(e, traj));
        }
    }
    traj.snapshots.push(state.clone());
    for j in 1..=control.snapshots {
        let target = t0 + j as f64 * interval;
        while state.t < target {
            let remaining = target - state.t;
            let result = advance_step(&state, control, remaining).and_then(|(mut next, dt)| {
                // land exactly on the snapshot time
                if dt >= remaining {
                    next.t = target;
                }
                let s = sup_grad_u_sq(&next)?;
                Ok((next, dt, s))
            });
            match result {
                Ok((next, dt, s)) => {
                    traj.steps.push(StepRecord { t: next.t, dt, sup_grad_u_sq: s });
                    state = next;
                }
                Err(e) => return Err(fail(e, traj)),
            }
        }
        for obs in observers.iter_mut() {
            if let Err(e) = obs.on_snapshot(&state) {
                return Err(fail(e, traj));
            }
        }
        traj.snapshots.push(state.clone());
    }
    Ok(traj)
}

/// Run-wide `K = sup |Ric|` and `L = sup |∇u|` over every snapshot.
pub fn measure_sup_bounds(traj: &Trajectory) -> Result<(f64, f64)> {
    if traj.snapshots.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut k = 0.0f64;
    let mut l = 0.0f64;
    for s in &traj.snapshots {
        let gamma = curvature::christoffel(&s.g)?;
        let rm = curvature::riemann(&s.g, &gamma)?;
        let ric = curvature::ricci(&rm, &s.g)?;
        k = k.max(curvature::tensor_norm(&ric, &s.g)?.max());
        l = l.max(crate::math::sqrt(sup_grad_u_sq(s)?));
    }
    Ok((k, l))
}

/// Spread of the eigenvalues of `g(0)⁻¹ g(t)` against an exponential envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceSample {
    pub t: f64,
    pub min_eigen: f64,
    pub max_eigen: f64,
}

pub fn metric_equivalence(traj: &Trajectory) -> Result<Vec<EquivalenceSample>> {
    let g0 = &traj.initial()?.g;
    let n = g0.dim();
    traj.snapshots
        .iter()
        .map(|s| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in 0..g0.grid().len() {
                let ev = linalg::generalized_eigenvalues(n, &s.g.at(p), &g0.at(p))
                    .ok_or(Error::NotPositiveDefinite { point: p })?;
                lo = lo.min(ev[0]);
                hi = hi.max(ev[n - 1]);
            }
            Ok(EquivalenceSample { t: s.t, min_eigen: lo, max_eigen: hi })
        })
        .collect()
}

/// Worst relative violation of `e^{−a t} ≤ λ ≤ e^{b t}` (0 when inside).
pub fn equivalence_violation(samples: &[EquivalenceSample], lower_rate: f64, upper_rate: f64) -> f64 {
    samples
        .iter()
        .map(|s| {
            let lo = exp(-lower_rate * s.t);
            let hi = exp(upper_rate * s.t);
            ((lo - s.min_eigen) / lo).max((s.max_eigen - hi) / hi).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Residuals of the identities that hold along exact solutions, per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResiduals {
    /// `|d/dt Vol − ∫(−R + 2|∇u|²) dV|` per snapshot.
    pub volume: Vec<f64>,
    /// `max_x |□|∇u|² + 2|∇²u|² + 4|∇u|⁴|` per snapshot.
    pub gradient: Vec<f64>,
}

impl IdentityResiduals {
    /// Largest residuals over interior snapshots.
    pub fn interior_max(&self) -> (f64, f64) {
        let n = self.volume.len();
        let inner = |v: &[f64]| if n > 2 { max_of(&v[1..n - 1]) } else { max_of(v) };
        (inner(&self.volume), inner(&self.gradient))
    }
}

pub fn identity_residuals(traj: &Trajectory) -> Result<IdentityResiduals> {
    let times = traj.times();
    diff::check_times(&times)?;
    let grid = traj.initial()?.g.grid();
    let cell = grid.cell_volume();
    let mut vols = Vec::with_capacity(times.len());
    let mut vol_rhs = Vec::with_capacity(times.len());
    let mut grad_sq = Vec::with_capacity(times.len());
    let mut gamma_all = Vec::with_capacity(times.len());
    let mut pointwise_rest = Vec::with_capacity(times.len());
    for s in &traj.snapshots {
        let pack = CurvaturePack::compute(&s.g, &s.u)?;
        let ginv = s.g.inverse()?;
        let vol = s.g.volume_element();
        let gsq = curvature::gradient_norm_sq(&pack.du, &ginv);
        let integrand: Vec<f64> =
            pack.scalar.values().iter().zip(&gsq).map(|(r, w)| -r + 2.0 * w).collect();
        vols.push(s.g.volume());
        vol_rhs.push(grid::weighted_sum(&integrand, &vol, cell));
        let hess = pack.norms.hess_u.values();
        // −Δ|∇u|² + 2|∇²u|² + 4|∇u|⁴
        let lap = curvature::laplacian_with(&gsq, &grid, &pack.christoffel, &ginv);
        let rest: Vec<f64> = (0..grid.len())
            .map(|p| -lap[p] + 2.0 * hess[p] * hess[p] + 4.0 * gsq[p] * gsq[p])
            .collect();
        grad_sq.push(gsq);
        gamma_all.push(pack.christoffel);
        pointwise_rest.push(rest);
    }
    let dvol = diff::time_derivative(&times, &vols)?;
    let volume = dvol.iter().zip(&vol_rhs).map(|(a, b)| (a - b).abs()).collect();
    let fields: Vec<&[f64]> = grad_sq.iter().map(|v| v.as_slice()).collect();
    let mut gradient = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let dt = diff::field_time_derivative(&times, &fields, i)?;
        let worst = dt
            .iter()
            .zip(&pointwise_rest[i])
            .map(|(a, b)| (a + b).abs())
            .fold(0.0, f64::max);
        gradient.push(worst);
    }
    Ok(IdentityResiduals { volume, gradient })
}

/// Largest increase of `sup|∇u|²` between consecutive steps (0 if monotone).
pub fn max_gradient_increase(traj: &Trajectory) -> f64 {
    traj.steps
        .windows(2)
        .map(|w| w[1].sup_grad_u_sq - w[0].sup_grad_u_sq)
        .fold(0.0, f64::max)
}
