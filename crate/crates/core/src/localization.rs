//! Lattice geodesic distance from a base point, the Lipschitz cutoff
//! `φ = ((r − d)/r)₊` with `r = ρ/√K`, and geodesic-ball quadrature.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::curvature;
use crate::error::{invalid, Error, Result};
use crate::grid::{self, MetricField, PeriodicGrid, ScalarField};
use crate::math::{ln, sqrt};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    point: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties broken by lattice index for determinism
        other.dist.total_cmp(&self.dist).then_with(|| other.point.cmp(&self.point))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Stencil reach of [`geodesic_distance`] along the most coarsely resolved axis.
pub const DEFAULT_REACH: isize = 3;

fn gcd(a: isize, b: isize) -> isize {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Primitive lattice vectors with component `i` in `[-reach[i], reach[i]]`.
fn offsets(dim: usize, reach: [isize; 3]) -> Vec<[isize; 3]> {
    let mut out = Vec::new();
    let r = |axis: usize| if axis < dim { -reach[axis]..=reach[axis] } else { 0..=0 };
    for a in r(0) {
        for b in r(1) {
            for c in r(2) {
                if gcd(gcd(a, b), c) == 1 {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// Per-axis reach giving roughly isotropic edge directions in coordinate
/// space: [`DEFAULT_REACH`] cells on the coarsest axis, proportionally more on
/// finer ones, never wrapping past half the period.
pub fn default_reach(grid: &PeriodicGrid) -> [isize; 3] {
    let hmax = (0..grid.dim()).map(|a| grid.spacing(a)).fold(0.0, f64::max);
    let mut reach = [0isize; 3];
    for (a, r) in reach.iter_mut().enumerate().take(grid.dim()) {
        let want = crate::math::floor(DEFAULT_REACH as f64 * hmax / grid.spacing(a) + 0.5) as isize;
        let cap = (grid.resolution(a) as isize - 1) / 2;
        *r = want.clamp(1, cap);
    }
    reach
}

/// Shortest-path distance from `x0` over the periodic lattice graph whose edges
/// are the primitive lattice vectors within [`default_reach`]. An edge is
/// weighted by its length under the average of the metrics at its two ends.
pub fn geodesic_distance(g0: &MetricField, x0: usize) -> Result<ScalarField> {
    geodesic_distance_with_reach(g0, x0, default_reach(&g0.grid()))
}

/// As [`geodesic_distance`] with an explicit per-axis reach; reach 1 on every
/// axis is the 8-neighbour (2D) / 26-neighbour (3D) graph.
pub fn geodesic_distance_with_reach(g0: &MetricField, x0: usize, reach: [isize; 3]) -> Result<ScalarField> {
    let grid = g0.grid();
    let n = grid.dim();
    let np = grid.len();
    if x0 >= np {
        return Err(invalid("base point outside the lattice"));
    }
    if (0..n).any(|a| reach[a] < 1 || grid.resolution(a) as isize <= 2 * reach[a]) {
        return Err(invalid("stencil reach must be at least 1 and below half the resolution"));
    }
    let offs = offsets(n, reach);
    let h: Vec<f64> = (0..n).map(|a| grid.spacing(a)).collect();
    let mut dist = vec![f64::INFINITY; np];
    let mut done = vec![false; np];
    let mut heap = BinaryHeap::new();
    dist[x0] = 0.0;
    heap.push(Entry { dist: 0.0, point: x0 });
    while let Some(Entry { dist: d, point }) = heap.pop() {
        if done[point] {
            continue;
        }
        done[point] = true;
        let gp = g0.at(point);
        for off in &offs {
            let mut q = point;
            for (axis, &o) in off.iter().enumerate().take(n) {
                if o != 0 {
                    q = grid.neighbor(q, axis, o);
                }
            }
            if done[q] {
                continue;
            }
            let gq = g0.at(q);
            let mut len2 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let avg = 0.5 * (gp[i][j] + gq[i][j]);
                    len2 += avg * off[i] as f64 * h[i] * off[j] as f64 * h[j];
                }
            }
            let nd = d + sqrt(len2);
            if nd < dist[q] {
                dist[q] = nd;
                heap.push(Entry { dist: nd, point: q });
            }
        }
    }
    ScalarField::new(grid, dist)
}

/// `φ = ((ρ/√K − d)/(ρ/√K))₊`.
pub fn cutoff(d0: &ScalarField, rho: f64, k: f64) -> Result<ScalarField> {
    if !(rho > 0.0 && k > 0.0) {
        return Err(invalid("cutoff needs rho > 0 and K > 0"));
    }
    let r = rho / sqrt(k);
    Ok(d0.map(|d| ((r - d) / r).max(0.0)))
}

fn ball_mask(d0: &ScalarField, r: f64) -> Result<Vec<bool>> {
    if !(r > 0.0) {
        return Err(invalid("ball radius must be positive"));
    }
    let mask: Vec<bool> = d0.values().iter().map(|&d| d < r).collect();
    if mask.iter().filter(|m| **m).count() <= 1 {
        return Err(Error::EmptyBall { radius: r });
    }
    Ok(mask)
}

/// `∫_{d0 < r} f dV_g`.
pub fn ball_integral(f: &ScalarField, g: &MetricField, d0: &ScalarField, r: f64) -> Result<f64> {
    if f.grid() != d0.grid() || *f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    let mask = ball_mask(d0, r)?;
    let vol = g.volume_element();
    let masked: Vec<f64> = f.values().iter().zip(&mask).map(|(v, m)| if *m { *v } else { 0.0 }).collect();
    Ok(grid::weighted_sum(&masked, &vol, g.grid().cell_volume()))
}

/// `Vol_g({d0 < r})`.
pub fn ball_volume(g: &MetricField, d0: &ScalarField, r: f64) -> Result<f64> {
    ball_integral(&ScalarField::constant(g.grid(), 1.0), g, d0, r)
}

/// Pointwise `|∇f|_g` from centred differences.
pub fn gradient_norm(f: &ScalarField, g: &MetricField) -> Result<ScalarField> {
    if *f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    let du = curvature::gradient(f);
    let ginv = g.inverse()?;
    let sq = curvature::gradient_norm_sq(&du, &ginv);
    Ok(ScalarField::from_vec_unchecked(g.grid(), sq.into_iter().map(|v| sqrt(v.max(0.0))).collect()))
}

/// Everything the localized integrals need about the base point and the cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffData {
    pub x0: usize,
    pub rho: f64,
    pub k: f64,
    /// `ρ/√K`.
    pub radius: f64,
    pub distance: ScalarField,
    pub phi: ScalarField,
}

impl CutoffData {
    pub fn new(g0: &MetricField, x0: usize, rho: f64, k: f64) -> Result<Self> {
        let distance = geodesic_distance(g0, x0)?;
        let phi = cutoff(&distance, rho, k)?;
        let radius = rho / sqrt(k);
        ball_mask(&distance, radius)?;
        ball_mask(&distance, 0.5 * radius)?;
        Ok(Self { x0, rho, k, radius, distance, phi })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.distance.grid()
    }

    /// Cutoff support is the ball `{d < ρ/√K}`.
    pub fn support(&self) -> Vec<bool> {
        self.distance.values().iter().map(|&d| d < self.radius).collect()
    }

    /// Whether the ball reaches past half of the (flat) injectivity radius of `g0`.
    pub fn self_overlaps(&self, g0: &MetricField) -> bool {
        let grid = g0.grid();
        let (lo, _) = g0.eigen_range();
        let inj = (0..grid.dim()).map(|a| 0.5 * grid.extent(a) * sqrt(lo)).fold(f64::INFINITY, f64::min);
        self.radius > 0.5 * inj
    }

    /// Largest `|∇φ|_{g0} ρ/√K` over the lattice; 1 for an exact cone.
    pub fn gradient_ratio(&self, g0: &MetricField) -> Result<f64> {
        Ok(gradient_norm(&self.phi, g0)?.max() * self.rho / sqrt(self.k))
    }

    /// Largest `|φ(p) − φ(q)| / (√K/ρ · d_edge(p, q))` over lattice edges.
    pub fn lipschitz_ratio(&self, g0: &MetricField) -> f64 {
        let grid = g0.grid();
        let n = grid.dim();
        let scale = sqrt(self.k) / self.rho;
        let phi = self.phi.values();
        let mut worst = 0.0f64;
        for p in 0..grid.len() {
            for axis in 0..n {
                let q = grid.neighbor(p, axis, 1);
                let gavg = 0.5 * (g0.at(p)[axis][axis] + g0.at(q)[axis][axis]);
                let len = grid.spacing(axis) * sqrt(gavg);
                worst = worst.max((phi[p] - phi[q]).abs() / (scale * len));
            }
        }
        worst
    }
}

/// Smallest `c ≥ 0` with `V(t)/V(τ) ≤ e^{cT}` over all sampled pairs.
pub fn fit_volume_ratio(volumes: &[f64], horizon: f64) -> Result<f64> {
    if volumes.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if !(horizon > 0.0) || volumes.iter().any(|v| !(*v > 0.0)) {
        return Err(invalid("volume ratio needs positive volumes and horizon"));
    }
    let hi = crate::math::max_of(volumes);
    let lo = crate::math::min_of(volumes);
    Ok((ln(hi / lo) / horizon).max(0.0))
}
