//! Periodic coordinate lattice on the flat n-torus, field containers, centred
//! finite differences and midpoint quadrature.
//!
//! Lattice points are stored in row-major order: the last axis varies fastest,
//! so the linear index of `(i0, i1, i2)` is `(i0 * N1 + i1) * N2 + i2`.
//! Tensor components use the same convention over their slot indices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, Mat};
use crate::math::sqrt;

pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    dim: usize,
    extents: [f64; 3],
    resolution: [usize; 3],
}

impl PeriodicGrid {
    pub fn new(dim: usize, extents: &[f64], resolutions: &[usize]) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidDimension(dim));
        }
        if extents.len() != dim || resolutions.len() != dim {
            return Err(Error::ShapeMismatch("extents and resolutions must have one entry per axis"));
        }
        let mut e = [1.0; 3];
        let mut r = [1usize; 3];
        for axis in 0..dim {
            if !(extents[axis] > 0.0 && extents[axis].is_finite()) {
                return Err(Error::NonPositiveExtent { axis, extent: extents[axis] });
            }
            if resolutions[axis] < MIN_RESOLUTION {
                return Err(Error::ResolutionTooSmall { axis, resolution: resolutions[axis] });
            }
            e[axis] = extents[axis];
            r[axis] = resolutions[axis];
        }
        Ok(Self { dim, extents: e, resolution: r })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.extents[axis]
    }

    pub fn resolution(&self, axis: usize) -> usize {
        self.resolution[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / self.resolution[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Number of lattice points.
    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate volume of one lattice cell, `∏ h_i`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.resolution[axis + 1..].iter().product()
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis < self.dim {
            Ok(())
        } else {
            Err(Error::AxisOutOfRange { axis, dim: self.dim })
        }
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let i2 = idx % self.resolution[2];
        let rest = idx / self.resolution[2];
        [rest / self.resolution[1], rest % self.resolution[1], i2]
    }

    /// Linear index of a multi-index, wrapping every coordinate periodically.
    pub fn linear_index(&self, idx: &[isize]) -> usize {
        let mut out = 0usize;
        for axis in 0..3 {
            let n = self.resolution[axis] as isize;
            let i = if axis < idx.len() { idx[axis].rem_euclid(n) } else { 0 };
            out = out * self.resolution[axis] + i as usize;
        }
        out
    }

    /// Coordinates `(i0 h0, i1 h1, i2 h2)` of a lattice point.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = m[axis] as f64 * self.spacing(axis);
        }
        x
    }

    /// Neighbour of `idx` shifted by `offset` cells along `axis`, with wraparound.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let n = self.resolution[axis] as isize;
        let stride = self.stride(axis) as isize;
        let i = ((idx as isize) / stride) % n;
        let j = (i + offset).rem_euclid(n);
        (idx as isize + (j - i) * stride) as usize
    }
}

/// Precomputed ±1 neighbour tables, one pair per axis.
#[derive(Debug, Clone)]
pub(crate) struct Neighbors {
    plus: Vec<Vec<usize>>,
    minus: Vec<Vec<usize>>,
}

impl Neighbors {
    pub(crate) fn new(grid: &PeriodicGrid) -> Self {
        let mut plus = Vec::with_capacity(grid.dim());
        let mut minus = Vec::with_capacity(grid.dim());
        for axis in 0..grid.dim() {
            plus.push((0..grid.len()).map(|p| grid.neighbor(p, axis, 1)).collect());
            minus.push((0..grid.len()).map(|p| grid.neighbor(p, axis, -1)).collect());
        }
        Self { plus, minus }
    }
}

/// Centred first difference along `axis`.
pub fn partial(grid: &PeriodicGrid, values: &[f64], axis: usize) -> Vec<f64> {
    let nb = Neighbors::new(grid);
    partial_with(&nb, grid, values, axis)
}

pub(crate) fn partial_with(nb: &Neighbors, grid: &PeriodicGrid, values: &[f64], axis: usize) -> Vec<f64> {
    let inv = 1.0 / (2.0 * grid.spacing(axis));
    let (p, m) = (&nb.plus[axis], &nb.minus[axis]);
    (0..values.len()).map(|i| (values[p[i]] - values[m[i]]) * inv).collect()
}

/// Second difference `∂_a ∂_b`: compact three-point stencil on the diagonal,
/// composed centred differences off it. The operator is symmetric in `(a, b)`.
pub fn second_partial(grid: &PeriodicGrid, values: &[f64], a: usize, b: usize) -> Vec<f64> {
    let nb = Neighbors::new(grid);
    second_partial_with(&nb, grid, values, a, b)
}

pub(crate) fn second_partial_with(
    nb: &Neighbors,
    grid: &PeriodicGrid,
    values: &[f64],
    a: usize,
    b: usize,
) -> Vec<f64> {
    if a == b {
        let h = grid.spacing(a);
        let inv = 1.0 / (h * h);
        let (p, m) = (&nb.plus[a], &nb.minus[a]);
        (0..values.len())
            .map(|i| (values[p[i]] - 2.0 * values[i] + values[m[i]]) * inv)
            .collect()
    } else {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let first = partial_with(nb, grid, values, hi);
        partial_with(nb, grid, &first, lo)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch("scalar field length must equal the number of lattice points"));
        }
        if let Some(point) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { point });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: PeriodicGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: PeriodicGrid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    /// Samples `f` at the lattice point coordinates.
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|p| f(grid.point(p))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn max(&self) -> f64 {
        crate::math::max_of(&self.values)
    }

    pub fn min(&self) -> f64 {
        crate::math::min_of(&self.values)
    }
}

/// Centred second-order difference of a scalar field along `axis`.
pub fn partial_derivative(f: &ScalarField, axis: usize) -> Result<ScalarField> {
    f.grid.check_axis(axis)?;
    Ok(ScalarField::from_vec_unchecked(f.grid, partial(&f.grid, &f.values, axis)))
}

/// Midpoint quadrature `Σ f √det g ∏h_i` against the volume form of `g`.
pub fn integrate(f: &ScalarField, g: &MetricField) -> Result<f64> {
    if f.grid != g.grid() {
        return Err(Error::GridMismatch);
    }
    let vol = g.volume_element();
    Ok(weighted_sum(&f.values, &vol, f.grid.cell_volume()))
}

pub(crate) fn weighted_sum(f: &[f64], vol: &[f64], cell: f64) -> f64 {
    f.iter().zip(vol).map(|(a, b)| a * b).sum::<f64>() * cell
}

/// Variance of one tensor slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Co,
    Contra,
}

/// Tensor field with `dim^rank` components per lattice point, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: PeriodicGrid,
    slots: Vec<Slot>,
    data: Vec<f64>,
}

impl TensorField {
    pub fn zeros(grid: PeriodicGrid, slots: &[Slot]) -> Self {
        let ncomp = grid.dim().pow(slots.len() as u32);
        Self { grid, slots: slots.to_vec(), data: vec![0.0; ncomp * grid.len()] }
    }

    pub fn from_data(grid: PeriodicGrid, slots: &[Slot], data: Vec<f64>) -> Result<Self> {
        let ncomp = grid.dim().pow(slots.len() as u32);
        if data.len() != ncomp * grid.len() {
            return Err(Error::ShapeMismatch("tensor data length must be dim^rank times the number of points"));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { point: i % grid.len() });
        }
        Ok(Self { grid, slots: slots.to_vec(), data })
    }

    pub fn covariant(grid: PeriodicGrid, rank: usize) -> Self {
        Self::zeros(grid, &vec![Slot::Co; rank])
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn n_components(&self) -> usize {
        self.grid.dim().pow(self.slots.len() as u32)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Linear component number of a slot multi-index.
    #[inline]
    pub fn comp(&self, idx: &[usize]) -> usize {
        let n = self.grid.dim();
        idx.iter().fold(0, |acc, &i| acc * n + i)
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let np = self.grid.len();
        &self.data[c * np..(c + 1) * np]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let np = self.grid.len();
        &mut self.data[c * np..(c + 1) * np]
    }

    #[inline]
    pub fn get(&self, point: usize, idx: &[usize]) -> f64 {
        self.data[self.comp(idx) * self.grid.len() + point]
    }

    #[inline]
    pub fn set(&mut self, point: usize, idx: &[usize], v: f64) {
        let c = self.comp(idx);
        let np = self.grid.len();
        self.data[c * np + point] = v;
    }

    /// All components at one point, in component order.
    pub fn at_point(&self, point: usize) -> Vec<f64> {
        let np = self.grid.len();
        (0..self.n_components()).map(|c| self.data[c * np + point]).collect()
    }

    /// Componentwise coordinate derivative along `axis` (same slot signature).
    pub fn partial(&self, axis: usize) -> Result<TensorField> {
        self.grid.check_axis(axis)?;
        let nb = Neighbors::new(&self.grid);
        let mut out = Self::zeros(self.grid, &self.slots);
        for c in 0..self.n_components() {
            let d = partial_with(&nb, &self.grid, self.component(c), axis);
            out.component_mut(c).copy_from_slice(&d);
        }
        Ok(out)
    }

    /// Largest relative asymmetry between slots `a` and `b`.
    pub fn symmetry_residual(&self, a: usize, b: usize) -> (f64, usize) {
        let n = self.grid.dim();
        let r = self.rank();
        let ncomp = self.n_components();
        let mut worst = (0.0, 0);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut idx = vec![0usize; r];
        for c in 0..ncomp {
            decode(c, n, &mut idx);
            if idx[a] >= idx[b] {
                continue;
            }
            let mut swapped = idx.clone();
            swapped.swap(a, b);
            let c2 = self.comp(&swapped);
            for (p, (x, y)) in self.component(c).iter().zip(self.component(c2)).enumerate() {
                let res = (x - y).abs() / scale;
                if res > worst.0 {
                    worst = (res, p);
                }
            }
        }
        worst
    }

    pub fn verify_symmetric(&self, a: usize, b: usize) -> Result<()> {
        let (res, point) = self.symmetry_residual(a, b);
        if res > 1e-12 {
            Err(Error::NotSymmetric { point, residual: res })
        } else {
            Ok(())
        }
    }

    /// `self + s * other`, slot signatures must agree.
    pub fn add_scaled(&self, other: &TensorField, s: f64) -> Result<TensorField> {
        if self.grid != other.grid || self.slots != other.slots {
            return Err(Error::GridMismatch);
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect();
        Ok(TensorField { grid: self.grid, slots: self.slots.clone(), data })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn decode(mut c: usize, n: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = c % n;
        c /= n;
    }
}

/// Symmetric positive-definite covariant 2-tensor field.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    tensor: TensorField,
}

impl MetricField {
    /// Wraps a covariant 2-tensor after checking symmetry and pointwise positive-definiteness.
    pub fn new(tensor: TensorField) -> Result<Self> {
        if tensor.slots() != [Slot::Co, Slot::Co] {
            return Err(invalid("metric must be a covariant 2-tensor"));
        }
        tensor.verify_symmetric(0, 1)?;
        let m = Self { tensor };
        m.check_spd()?;
        Ok(m)
    }

    pub fn flat(grid: PeriodicGrid) -> Self {
        Self::scaled_identity(grid, 1.0)
    }

    pub fn scaled_identity(grid: PeriodicGrid, s: f64) -> Self {
        let mut t = TensorField::covariant(grid, 2);
        for i in 0..grid.dim() {
            let c = t.comp(&[i, i]);
            t.component_mut(c).fill(s);
        }
        Self { tensor: t }
    }

    /// Diagonal metric `Σ d_i(x)² dx_i²`-style construction from per-axis component values.
    pub fn diagonal(grid: PeriodicGrid, diag: &[Vec<f64>]) -> Result<Self> {
        if diag.len() != grid.dim() {
            return Err(Error::ShapeMismatch("one diagonal component per axis"));
        }
        let mut t = TensorField::covariant(grid, 2);
        for (i, d) in diag.iter().enumerate() {
            if d.len() != grid.len() {
                return Err(Error::ShapeMismatch("diagonal component length"));
            }
            let c = t.comp(&[i, i]);
            t.component_mut(c).copy_from_slice(d);
        }
        Self::new(t)
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.tensor.grid()
    }

    pub fn dim(&self) -> usize {
        self.tensor.grid().dim()
    }

    pub fn tensor(&self) -> &TensorField {
        &self.tensor
    }

    pub fn into_tensor(self) -> TensorField {
        self.tensor
    }

    /// The `n × n` matrix at one lattice point.
    #[inline]
    pub fn at(&self, point: usize) -> Mat {
        let n = self.dim();
        let np = self.grid().len();
        let data = self.tensor.data();
        let mut m = linalg::ZERO;
        for i in 0..n {
            for j in 0..n {
                m[i][j] = data[(i * n + j) * np + point];
            }
        }
        m
    }

    pub fn check_spd(&self) -> Result<()> {
        let n = self.dim();
        for p in 0..self.grid().len() {
            let m = self.at(p);
            if linalg::cholesky(n, &m).is_none() {
                return Err(Error::NotPositiveDefinite { point: p });
            }
        }
        Ok(())
    }

    /// Inverse metric `g^ij` as a contravariant 2-tensor.
    pub fn inverse(&self) -> Result<TensorField> {
        let n = self.dim();
        let grid = self.grid();
        let mut out = TensorField::zeros(grid, &[Slot::Contra, Slot::Contra]);
        for p in 0..grid.len() {
            let inv = linalg::inverse(n, &self.at(p)).ok_or(Error::NotPositiveDefinite { point: p })?;
            for i in 0..n {
                for j in 0..n {
                    out.set(p, &[i, j], inv[i][j]);
                }
            }
        }
        Ok(out)
    }

    /// Pointwise `√det g`.
    pub fn volume_element(&self) -> Vec<f64> {
        let n = self.dim();
        (0..self.grid().len()).map(|p| sqrt(linalg::det(n, &self.at(p)).max(0.0))).collect()
    }

    /// Smallest and largest eigenvalue of `g` over the lattice.
    pub fn eigen_range(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in 0..self.grid().len() {
            let ev = linalg::sym_eigenvalues(n, &self.at(p));
            lo = lo.min(ev[0]);
            hi = hi.max(ev[n - 1]);
        }
        (lo, hi)
    }

    /// Total Riemannian volume.
    pub fn volume(&self) -> f64 {
        self.volume_element().iter().sum::<f64>() * self.grid().cell_volume()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn grid2(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(2, &[2.0 * PI, 2.0 * PI], &[n, n]).unwrap()
    }

    #[test]
    fn build_grid_spacing_and_size() {
        let g = grid2(64);
        assert!((g.spacing(0) - 0.0982).abs() < 1e-4);
        assert!((g.spacing(1) - 0.0982).abs() < 1e-4);
        let g3 = PeriodicGrid::new(3, &[2.0 * PI; 3], &[16; 3]).unwrap();
        assert_eq!(g3.len(), 4096);
    }

    #[test]
    fn build_grid_rejects_bad_input() {
        assert_eq!(
            PeriodicGrid::new(2, &[2.0 * PI, 2.0 * PI], &[4, 4]),
            Err(Error::ResolutionTooSmall { axis: 0, resolution: 4 })
        );
        assert_eq!(PeriodicGrid::new(1, &[1.0], &[8]), Err(Error::InvalidDimension(1)));
        assert!(matches!(
            PeriodicGrid::new(2, &[1.0, -1.0], &[8, 8]),
            Err(Error::NonPositiveExtent { axis: 1, .. })
        ));
    }

    #[test]
    fn neighbors_wrap() {
        let g = PeriodicGrid::new(3, &[1.0; 3], &[8, 9, 10]).unwrap();
        let p = g.linear_index(&[7, 8, 9]);
        assert_eq!(g.multi_index(g.neighbor(p, 0, 1)), [0, 8, 9]);
        assert_eq!(g.multi_index(g.neighbor(p, 1, 1)), [7, 0, 9]);
        assert_eq!(g.multi_index(g.neighbor(p, 2, 1)), [7, 8, 0]);
        let q = g.linear_index(&[0, 0, 0]);
        assert_eq!(g.multi_index(g.neighbor(q, 1, -1)), [0, 8, 0]);
    }

    #[test]
    fn derivative_of_sin() {
        let g = grid2(64);
        let f = ScalarField::from_fn(g, |x| libm::sin(x[0])).unwrap();
        let df = partial_derivative(&f, 0).unwrap();
        let err = (0..g.len())
            .map(|p| (df.values()[p] - libm::cos(g.point(p)[0])).abs())
            .fold(0.0, f64::max);
        assert!(err <= 2e-3, "err = {err}");
        assert!(partial_derivative(&f, 2).is_err());
    }

    #[test]
    fn derivative_error_scales_with_frequency_squared() {
        // centred difference error for sin(kx) is k (1 - sinc(kh)) ~ k^3 h^2 / 6; for the
        // normalised comparison 2cos(2x) the max error is 8x larger in absolute terms, i.e.
        // 4x once divided by the amplitude 2
        let g = grid2(64);
        let max_err = |k: f64| {
            let f = ScalarField::from_fn(g, |x| libm::sin(k * x[0])).unwrap();
            let df = partial_derivative(&f, 0).unwrap();
            (0..g.len())
                .map(|p| (df.values()[p] - k * libm::cos(k * g.point(p)[0])).abs())
                .fold(0.0, f64::max)
                / k
        };
        let ratio = max_err(2.0) / max_err(1.0);
        assert!((ratio - 4.0).abs() < 1.0, "ratio = {ratio}");
    }

    #[test]
    fn constant_field_has_zero_derivative() {
        let g = grid2(16);
        let f = ScalarField::constant(g, 3.7);
        for axis in 0..2 {
            assert!(partial_derivative(&f, axis).unwrap().values().iter().all(|v| v.abs() <= 1e-14));
        }
    }

    #[test]
    fn integrate_volume_and_scaling() {
        let g = grid2(32);
        let one = ScalarField::constant(g, 1.0);
        let flat = MetricField::flat(g);
        let v = integrate(&one, &flat).unwrap();
        assert!((v - 4.0 * PI * PI).abs() < 1e-12);
        let sinx = ScalarField::from_fn(g, |x| libm::sin(x[0])).unwrap();
        assert!(integrate(&sinx, &flat).unwrap().abs() < 1e-12);
        let four = MetricField::scaled_identity(g, 4.0);
        let v4 = integrate(&one, &four).unwrap();
        assert!((v4 - 16.0 * PI * PI).abs() < 1e-11);
    }

    #[test]
    fn integrate_rejects_grid_mismatch() {
        let f = ScalarField::constant(grid2(16), 1.0);
        let g = MetricField::flat(grid2(32));
        assert_eq!(integrate(&f, &g), Err(Error::GridMismatch));
    }

    #[test]
    fn metric_rejects_indefinite_and_asymmetric() {
        let g = grid2(8);
        let mut t = TensorField::covariant(g, 2);
        let c00 = t.comp(&[0, 0]);
        let c11 = t.comp(&[1, 1]);
        t.component_mut(c00).fill(1.0);
        t.component_mut(c11).fill(-1.0);
        assert!(matches!(MetricField::new(t.clone()), Err(Error::NotPositiveDefinite { .. })));
        t.component_mut(c11).fill(1.0);
        let c01 = t.comp(&[0, 1]);
        t.component_mut(c01)[3] = 0.5;
        assert!(matches!(MetricField::new(t), Err(Error::NotSymmetric { point: 3, .. })));
    }
}
