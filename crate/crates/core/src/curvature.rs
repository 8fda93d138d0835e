//! Discrete Riemannian tensor calculus on a [`MetricField`].
//!
//! Coordinate derivatives are the centred stencils of [`crate::grid`]. The
//! Riemann tensor is assembled from second derivatives of the metric plus
//! Christoffel products,
//!
//! ```text
//! R_ijkl = ½(∂i∂k g_jl + ∂j∂l g_ik − ∂i∂l g_jk − ∂j∂k g_il)
//!        + g_mp (Γ^m_jl Γ^p_ik − Γ^m_il Γ^p_jk),
//! ```
//!
//! which is algebraically identical to
//! `g_lm(∂iΓ^m_jk − ∂jΓ^m_ik + Γ^m_ip Γ^p_jk − Γ^m_jp Γ^p_ik)`. Because the
//! discrete `∂a∂b` is symmetric in `(a, b)` and the discrete Γ is symmetric in
//! its lower pair, the antisymmetries, pair exchange and first Bianchi identity
//! hold to rounding, and the diagonal second derivatives use compact stencils.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::grid::{self, decode, MetricField, Neighbors, ScalarField, Slot, TensorField};
use crate::linalg::{self, Mat};
use crate::math::sqrt;

fn inverse_mats(g: &MetricField) -> Result<Vec<Mat>> {
    let n = g.dim();
    (0..g.grid().len())
        .map(|p| linalg::inverse(n, &g.at(p)).ok_or(Error::NotPositiveDefinite { point: p }))
        .collect()
}

fn metric_mats(g: &MetricField) -> Vec<Mat> {
    (0..g.grid().len()).map(|p| g.at(p)).collect()
}

fn check_gamma(g: &MetricField, gamma: &TensorField) -> Result<()> {
    if gamma.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    if gamma.slots() != [Slot::Contra, Slot::Co, Slot::Co] {
        return Err(invalid("Christoffel symbols must have slots (contra, co, co)"));
    }
    Ok(())
}

/// `Γ^k_ij = ½ g^kl (∂i g_jl + ∂j g_il − ∂l g_ij)`, stored with index order `(k, i, j)`.
pub fn christoffel(g: &MetricField) -> Result<TensorField> {
    let grid = g.grid();
    let n = grid.dim();
    let np = grid.len();
    let ginv = inverse_mats(g)?;
    let nb = Neighbors::new(&grid);
    let gt = g.tensor();
    // dg[a][i][j] = ∂_a g_ij
    let mut dg = vec![vec![Vec::new(); n * n]; n];
    for (a, row) in dg.iter_mut().enumerate() {
        for i in 0..n {
            for j in i..n {
                let d = grid::partial_with(&nb, &grid, gt.component(gt.comp(&[i, j])), a);
                row[j * n + i] = d.clone();
                row[i * n + j] = d;
            }
        }
    }
    let mut gamma = TensorField::zeros(grid, &[Slot::Contra, Slot::Co, Slot::Co]);
    let mut lowered = [[[0.0; 3]; 3]; 3];
    for p in 0..np {
        // Γ_lij = ½ (∂i g_jl + ∂j g_il − ∂l g_ij)
        for l in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v = 0.5 * (dg[i][j * n + l][p] + dg[j][i * n + l][p] - dg[l][i * n + j][p]);
                    lowered[l][i][j] = v;
                    lowered[l][j][i] = v;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v: f64 = (0..n).map(|l| ginv[p][k][l] * lowered[l][i][j]).sum();
                    gamma.set(p, &[k, i, j], v);
                    gamma.set(p, &[k, j, i], v);
                }
            }
        }
    }
    Ok(gamma)
}

/// Fully covariant Riemann tensor `R_ijkl = g(R(∂i, ∂j)∂k, ∂l)`.
pub fn riemann(g: &MetricField, gamma: &TensorField) -> Result<TensorField> {
    check_gamma(g, gamma)?;
    let grid = g.grid();
    let n = grid.dim();
    let np = grid.len();
    let nb = Neighbors::new(&grid);
    let gt = g.tensor();
    // d2[(a,b)][(c,d)] = ∂a∂b g_cd for every ordered pair, shared storage for symmetric ones
    let pair = |a: usize, b: usize| if a <= b { a * n + b } else { b * n + a };
    let mut d2: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n * n]; n * n];
    for a in 0..n {
        for b in a..n {
            for c in 0..n {
                for d in c..n {
                    d2[a * n + b][c * n + d] =
                        grid::second_partial_with(&nb, &grid, gt.component(gt.comp(&[c, d])), a, b);
                }
            }
        }
    }
    let gm = metric_mats(g);
    let mut rm = TensorField::covariant(grid, 4);
    let gdata = gamma.data();
    let gam = |p: usize, m: usize, i: usize, j: usize| gdata[((m * n + i) * n + j) * np + p];
    for p in 0..np {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        if k == l {
                            continue;
                        }
                        let dd = |a: usize, b: usize, c: usize, d: usize| d2[pair(a, b)][pair(c, d)][p];
                        let second = 0.5
                            * (dd(i, k, j, l) + dd(j, l, i, k) - dd(i, l, j, k) - dd(j, k, i, l));
                        let mut quad = 0.0;
                        for m in 0..n {
                            for q in 0..n {
                                quad += gm[p][m][q]
                                    * (gam(p, m, j, l) * gam(p, q, i, k) - gam(p, m, i, l) * gam(p, q, j, k));
                            }
                        }
                        rm.set(p, &[i, j, k, l], second + quad);
                    }
                }
            }
        }
    }
    Ok(rm)
}

/// `Ric_jk = g^il R_ijkl`.
pub fn ricci(rm: &TensorField, g: &MetricField) -> Result<TensorField> {
    let grid = g.grid();
    if rm.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if rm.slots() != [Slot::Co; 4] {
        return Err(invalid("Riemann tensor must be fully covariant"));
    }
    let n = grid.dim();
    let ginv = inverse_mats(g)?;
    let mut ric = TensorField::covariant(grid, 2);
    for (p, gi) in ginv.iter().enumerate() {
        for j in 0..n {
            for k in j..n {
                let mut s = 0.0;
                for i in 0..n {
                    for l in 0..n {
                        s += gi[i][l] * rm.get(p, &[i, j, k, l]);
                    }
                }
                ric.set(p, &[j, k], s);
                ric.set(p, &[k, j], s);
            }
        }
    }
    Ok(ric)
}

/// `R = g^jk Ric_jk`.
pub fn scalar_curvature(ric: &TensorField, g: &MetricField) -> Result<ScalarField> {
    trace(ric, g)
}

fn trace(t: &TensorField, g: &MetricField) -> Result<ScalarField> {
    let grid = g.grid();
    if t.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if t.slots() != [Slot::Co, Slot::Co] {
        return Err(invalid("trace needs a covariant 2-tensor"));
    }
    let n = grid.dim();
    let ginv = inverse_mats(g)?;
    let values = ginv
        .iter()
        .enumerate()
        .map(|(p, gi)| {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    s += gi[j][k] * t.get(p, &[j, k]);
                }
            }
            s
        })
        .collect();
    Ok(ScalarField::from_vec_unchecked(grid, values))
}

/// `(∇T)_{a i1…ir} = ∂a T_{i1…ir} − Σ_s Γ^m_{a i_s} T_{i1…m…ir}` for a fully covariant `T`.
/// The new derivative slot comes first.
pub fn covariant_derivative(t: &TensorField, gamma: &TensorField) -> Result<TensorField> {
    if t.grid() != gamma.grid() {
        return Err(Error::GridMismatch);
    }
    if t.slots().iter().any(|s| *s != Slot::Co) {
        return Err(invalid("covariant derivative implemented for covariant tensors"));
    }
    let grid = t.grid();
    let n = grid.dim();
    let np = grid.len();
    let r = t.rank();
    let nb = Neighbors::new(&grid);
    let ncomp = t.n_components();
    let partials: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|a| (0..ncomp).map(|c| grid::partial_with(&nb, &grid, t.component(c), a)).collect())
        .collect();
    let mut out = TensorField::covariant(grid, r + 1);
    let gdata = gamma.data();
    let tdata = t.data();
    let mut idx = vec![0usize; r];
    let mut shifted = vec![0usize; r];
    for a in 0..n {
        for c in 0..ncomp {
            decode(c, n, &mut idx);
            let oc = a * ncomp + c;
            let dst = out.component_mut(oc);
            dst.copy_from_slice(&partials[a][c]);
            for s in 0..r {
                shifted.copy_from_slice(&idx);
                for m in 0..n {
                    shifted[s] = m;
                    let tc = shifted.iter().fold(0, |acc, &i| acc * n + i);
                    let gc = (m * n + a) * n + idx[s];
                    let gslice = &gdata[gc * np..(gc + 1) * np];
                    let tslice = &tdata[tc * np..(tc + 1) * np];
                    for p in 0..np {
                        dst[p] -= gslice[p] * tslice[p];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Differential `du` as a covariant 1-tensor.
pub fn gradient(u: &ScalarField) -> TensorField {
    let grid = *u.grid();
    let nb = Neighbors::new(&grid);
    let mut du = TensorField::covariant(grid, 1);
    for a in 0..grid.dim() {
        let d = grid::partial_with(&nb, &grid, u.values(), a);
        du.component_mut(a).copy_from_slice(&d);
    }
    du
}

/// Covariant Hessian `(∇²u)_ij = ∂i∂j u − Γ^k_ij ∂k u`.
pub fn hessian(u: &ScalarField, gamma: &TensorField) -> Result<TensorField> {
    let grid = *u.grid();
    if gamma.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let n = grid.dim();
    let np = grid.len();
    let nb = Neighbors::new(&grid);
    let du: Vec<Vec<f64>> = (0..n).map(|a| grid::partial_with(&nb, &grid, u.values(), a)).collect();
    let mut h = TensorField::covariant(grid, 2);
    for i in 0..n {
        for j in i..n {
            let mut v = grid::second_partial_with(&nb, &grid, u.values(), i, j);
            for (k, duk) in du.iter().enumerate() {
                let gc = gamma.comp(&[k, i, j]);
                let gs = gamma.component(gc);
                for p in 0..np {
                    v[p] -= gs[p] * duk[p];
                }
            }
            let c1 = h.comp(&[i, j]);
            let c2 = h.comp(&[j, i]);
            h.component_mut(c1).copy_from_slice(&v);
            if c1 != c2 {
                h.component_mut(c2).copy_from_slice(&v);
            }
        }
    }
    Ok(h)
}

/// Laplace–Beltrami `Δu = g^ij (∇²u)_ij`.
pub fn laplacian(u: &ScalarField, g: &MetricField, gamma: &TensorField) -> Result<ScalarField> {
    if u.grid() != &g.grid() {
        return Err(Error::GridMismatch);
    }
    let h = hessian(u, gamma)?;
    trace(&h, g)
}

/// Pointwise `|T|_g`: full contraction of `T ⊗ T` with `g⁻¹` on covariant slots and
/// `g` on contravariant ones, clamped at zero before the square root.
pub fn tensor_norm(t: &TensorField, g: &MetricField) -> Result<ScalarField> {
    let grid = g.grid();
    if t.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let n = grid.dim();
    let np = grid.len();
    let r = t.rank();
    let ncomp = t.n_components();
    let ginv = inverse_mats(g)?;
    let mut values = Vec::with_capacity(np);
    let mut cur = vec![0.0; ncomp];
    let mut next = vec![0.0; ncomp];
    let mut idx = vec![0usize; r];
    let stride: Vec<usize> = (0..r).map(|s| n.pow((r - 1 - s) as u32)).collect();
    for p in 0..np {
        let gp = g.at(p);
        let orig = t.at_point(p);
        cur.copy_from_slice(&orig);
        for (s, slot) in t.slots().iter().enumerate() {
            let m = match slot {
                Slot::Co => &ginv[p],
                Slot::Contra => &gp,
            };
            for c in 0..ncomp {
                decode(c, n, &mut idx);
                let base = c - idx[s] * stride[s];
                let mut v = 0.0;
                for j in 0..n {
                    v += m[idx[s]][j] * cur[base + j * stride[s]];
                }
                next[c] = v;
            }
            core::mem::swap(&mut cur, &mut next);
        }
        let q: f64 = orig.iter().zip(&cur).map(|(a, b)| a * b).sum();
        values.push(sqrt(q.max(0.0)));
    }
    Ok(ScalarField::from_vec_unchecked(grid, values))
}

/// `|du|²_g` without going through the generic norm.
pub fn gradient_norm_sq(du: &TensorField, ginv: &TensorField) -> Vec<f64> {
    let grid = du.grid();
    let n = grid.dim();
    (0..grid.len())
        .map(|p| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += ginv.get(p, &[i, j]) * du.get(p, &[i]) * du.get(p, &[j]);
                }
            }
            s
        })
        .collect()
}

/// Laplace–Beltrami of an arbitrary scalar given precomputed `Γ` and `g⁻¹`.
pub(crate) fn laplacian_with(
    values: &[f64],
    grid: &grid::PeriodicGrid,
    gamma: &TensorField,
    ginv: &TensorField,
) -> Vec<f64> {
    let n = grid.dim();
    let np = grid.len();
    let nb = Neighbors::new(grid);
    let du: Vec<Vec<f64>> = (0..n).map(|a| grid::partial_with(&nb, grid, values, a)).collect();
    let mut out = vec![0.0; np];
    for i in 0..n {
        for j in i..n {
            let d2 = grid::second_partial_with(&nb, grid, values, i, j);
            let w = if i == j { 1.0 } else { 2.0 };
            let gi = ginv.component(ginv.comp(&[i, j]));
            for p in 0..np {
                let mut h = d2[p];
                for (k, duk) in du.iter().enumerate() {
                    h -= gamma.get(p, &[k, i, j]) * duk[p];
                }
                out[p] += w * gi[p] * h;
            }
        }
    }
    out
}

/// Every geometric quantity of one `(g, u)` snapshot.
#[derive(Debug, Clone)]
pub struct CurvaturePack {
    pub christoffel: TensorField,
    pub riemann: TensorField,
    pub ricci: TensorField,
    pub scalar: ScalarField,
    pub grad_ricci: TensorField,
    pub grad_riemann: TensorField,
    pub du: TensorField,
    pub hessian_u: TensorField,
    pub laplacian_u: ScalarField,
    pub norms: PackNorms,
}

/// Pointwise norms and scalars extracted from a [`CurvaturePack`].
#[derive(Debug, Clone, PartialEq)]
pub struct PackNorms {
    pub rm: ScalarField,
    pub ric: ScalarField,
    pub grad_rm: ScalarField,
    pub grad_ric: ScalarField,
    pub grad_u: ScalarField,
    pub hess_u: ScalarField,
    pub laplacian_u: ScalarField,
    pub scalar: ScalarField,
}

impl CurvaturePack {
    pub fn compute(g: &MetricField, u: &ScalarField) -> Result<Self> {
        if u.grid() != &g.grid() {
            return Err(Error::GridMismatch);
        }
        let christoffel = christoffel(g)?;
        let riemann = riemann(g, &christoffel)?;
        let ricci = ricci(&riemann, g)?;
        let scalar = scalar_curvature(&ricci, g)?;
        let grad_ricci = covariant_derivative(&ricci, &christoffel)?;
        let grad_riemann = covariant_derivative(&riemann, &christoffel)?;
        let du = gradient(u);
        let hessian_u = hessian(u, &christoffel)?;
        let laplacian_u = trace(&hessian_u, g)?;
        let norms = PackNorms {
            rm: tensor_norm(&riemann, g)?,
            ric: tensor_norm(&ricci, g)?,
            grad_rm: tensor_norm(&grad_riemann, g)?,
            grad_ric: tensor_norm(&grad_ricci, g)?,
            grad_u: tensor_norm(&du, g)?,
            hess_u: tensor_norm(&hessian_u, g)?,
            laplacian_u: laplacian_u.clone(),
            scalar: scalar.clone(),
        };
        Ok(Self {
            christoffel,
            riemann,
            ricci,
            scalar,
            grad_ricci,
            grad_riemann,
            du,
            hessian_u,
            laplacian_u,
            norms,
        })
    }
}

/// Largest relative residuals of the algebraic Riemann symmetries:
/// `(antisymmetry ij, antisymmetry kl, pair exchange, first Bianchi)`.
pub fn riemann_symmetry_residuals(rm: &TensorField) -> [f64; 4] {
    let n = rm.grid().dim();
    let np = rm.grid().len();
    let scale = rm.max_abs().max(f64::MIN_POSITIVE);
    let mut res = [0.0f64; 4];
    for p in 0..np {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = rm.get(p, &[i, j, k, l]);
                        res[0] = res[0].max((r + rm.get(p, &[j, i, k, l])).abs());
                        res[1] = res[1].max((r + rm.get(p, &[i, j, l, k])).abs());
                        res[2] = res[2].max((r - rm.get(p, &[k, l, i, j])).abs());
                        let b = r + rm.get(p, &[j, k, i, l]) + rm.get(p, &[k, i, j, l]);
                        res[3] = res[3].max(b.abs());
                    }
                }
            }
        }
    }
    res.map(|v| v / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use core::f64::consts::PI;

    fn grid2(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(2, &[2.0 * PI, 2.0 * PI], &[n, 8]).unwrap()
    }

    fn warped(grid: PeriodicGrid) -> MetricField {
        let b2: Vec<f64> = (0..grid.len()).map(|p| (2.0 + libm::cos(grid.point(p)[0])).powi(2)).collect();
        MetricField::diagonal(grid, &[vec![1.0; grid.len()], b2]).unwrap()
    }

    #[test]
    fn flat_metric_has_no_curvature() {
        let grid = PeriodicGrid::new(3, &[2.0 * PI; 3], &[8; 3]).unwrap();
        let g = MetricField::flat(grid);
        let u = ScalarField::constant(grid, 1.0);
        let pack = CurvaturePack::compute(&g, &u).unwrap();
        assert!(pack.christoffel.max_abs() <= 1e-14);
        assert!(pack.riemann.max_abs() <= 1e-14);
        assert!(pack.norms.ric.max() <= 1e-14);
        assert!(pack.hessian_u.max_abs() <= 1e-14);
    }

    #[test]
    fn warped_curvature_at_origin() {
        let grid = grid2(128);
        let g = warped(grid);
        let gamma = christoffel(&g).unwrap();
        let rm = riemann(&g, &gamma).unwrap();
        let ric = ricci(&rm, &g).unwrap();
        let r = scalar_curvature(&ric, &g).unwrap();
        // sectional curvature 1/3 at x = 0 with b = 3
        assert!((rm.get(0, &[0, 1, 1, 0]) - 3.0).abs() < 1e-2);
        assert!((rm.get(0, &[0, 1, 0, 1]) + 3.0).abs() < 1e-2);
        assert!((ric.get(0, &[0, 0]) - 1.0 / 3.0).abs() < 1e-3);
        assert!((ric.get(0, &[1, 1]) - 3.0).abs() < 1e-2);
        assert!((r.values()[0] - 2.0 / 3.0).abs() < 1e-3);
        let norm = tensor_norm(&ric, &g).unwrap();
        assert!((norm.values()[0] - libm::sqrt(2.0) / 3.0).abs() < 1e-3);
    }

    #[test]
    fn metric_self_norm_is_sqrt_n() {
        let grid = grid2(16);
        let g = warped(grid);
        let norm = tensor_norm(g.tensor(), &g).unwrap();
        assert!(norm.values().iter().all(|v| (v - libm::sqrt(2.0)).abs() < 1e-12));
        let zero = TensorField::covariant(grid, 3);
        assert!(tensor_norm(&zero, &g).unwrap().max() == 0.0);
    }

    #[test]
    fn metric_is_parallel() {
        let grid = grid2(32);
        let g = warped(grid);
        let gamma = christoffel(&g).unwrap();
        let dg = covariant_derivative(g.tensor(), &gamma).unwrap();
        assert!(dg.max_abs() < 1e-12);
    }

    #[test]
    fn riemann_symmetries_are_exact() {
        let grid = PeriodicGrid::new(3, &[2.0 * PI; 3], &[16, 8, 8]).unwrap();
        let mut t = TensorField::covariant(grid, 2);
        for p in 0..grid.len() {
            let x = grid.point(p);
            t.set(p, &[0, 0], 1.0 + 0.2 * libm::sin(x[0]));
            t.set(p, &[1, 1], 2.0 + libm::cos(x[0] + x[2]));
            t.set(p, &[2, 2], 1.5 + 0.3 * libm::sin(x[1]));
            let off = 0.1 * libm::cos(x[1]);
            t.set(p, &[0, 1], off);
            t.set(p, &[1, 0], off);
        }
        let g = MetricField::new(t).unwrap();
        let gamma = christoffel(&g).unwrap();
        let rm = riemann(&g, &gamma).unwrap();
        for r in riemann_symmetry_residuals(&rm) {
            assert!(r <= 1e-12, "{r}");
        }
    }

    #[test]
    fn laplacian_is_trace_of_hessian_and_bounded() {
        let grid = grid2(32);
        let g = warped(grid);
        let u = ScalarField::from_fn(grid, |x| libm::sin(x[0]) + 0.3 * libm::cos(2.0 * x[1])).unwrap();
        let pack = CurvaturePack::compute(&g, &u).unwrap();
        let direct = laplacian(&u, &g, &pack.christoffel).unwrap();
        let ginv = g.inverse().unwrap();
        let other = laplacian_with(u.values(), &grid, &pack.christoffel, &ginv);
        for p in 0..grid.len() {
            let a = pack.laplacian_u.values()[p];
            assert!((a - direct.values()[p]).abs() <= 1e-12 * (1.0 + a.abs()));
            assert!((a - other[p]).abs() <= 1e-12 * (1.0 + a.abs()));
            assert!(a.abs() <= libm::sqrt(2.0) * pack.norms.hess_u.values()[p]);
        }
    }

    #[test]
    fn hessian_of_cos_on_flat() {
        let grid = PeriodicGrid::new(2, &[2.0 * PI, 2.0 * PI], &[128, 8]).unwrap();
        let g = MetricField::flat(grid);
        let u = ScalarField::from_fn(grid, |x| libm::cos(x[0])).unwrap();
        let gamma = christoffel(&g).unwrap();
        let h = hessian(&u, &gamma).unwrap();
        let lap = laplacian(&u, &g, &gamma).unwrap();
        for p in 0..grid.len() {
            let c = libm::cos(grid.point(p)[0]);
            assert!((h.get(p, &[0, 0]) + c).abs() < 1e-3);
            assert!(h.get(p, &[1, 1]).abs() < 1e-14 && h.get(p, &[0, 1]).abs() < 1e-14);
            assert!((lap.values()[p] + c).abs() < 1e-3);
        }
    }
}
