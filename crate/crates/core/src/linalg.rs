//! Dense linear algebra on the per-point 2×2 / 3×3 matrices that metrics and
//! Ricci tensors reduce to. Only the leading `n × n` block of a [`Mat`] is used.

use crate::math::sqrt;

pub type Mat = [[f64; 3]; 3];

pub const ZERO: Mat = [[0.0; 3]; 3];

pub fn identity(n: usize) -> Mat {
    let mut m = ZERO;
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    m
}

pub fn det(n: usize, m: &Mat) -> f64 {
    match n {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }
}

/// Inverse by cofactors; `None` when the determinant vanishes.
pub fn inverse(n: usize, m: &Mat) -> Option<Mat> {
    let d = det(n, m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut inv = ZERO;
    match n {
        1 => inv[0][0] = 1.0 / d,
        2 => {
            inv[0][0] = m[1][1] / d;
            inv[0][1] = -m[0][1] / d;
            inv[1][0] = -m[1][0] / d;
            inv[1][1] = m[0][0] / d;
        }
        _ => {
            inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
            inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
            inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
            inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
            inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
            inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
            inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
            inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
            inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
        }
    }
    Some(inv)
}

/// Lower Cholesky factor of a symmetric matrix, `None` unless positive definite.
pub fn cholesky(n: usize, m: &Mat) -> Option<Mat> {
    let mut l = ZERO;
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending in the first `n` slots.
pub fn sym_eigenvalues(n: usize, m: &Mat) -> [f64; 3] {
    let mut a = *m;
    for _sweep in 0..50 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev = [0.0; 3];
    for i in 0..n {
        ev[i] = a[i][i];
    }
    ev[..n].sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Eigenvalues of `b⁻¹ a` for symmetric `a` and SPD `b`, via `L⁻¹ a L⁻ᵀ` with `b = L Lᵀ`.
pub fn generalized_eigenvalues(n: usize, a: &Mat, b: &Mat) -> Option<[f64; 3]> {
    let l = cholesky(n, b)?;
    let li = inverse(n, &l)?;
    let mut tmp = ZERO;
    for i in 0..n {
        for j in 0..n {
            tmp[i][j] = (0..n).map(|k| li[i][k] * a[k][j]).sum();
        }
    }
    let mut c = ZERO;
    for i in 0..n {
        for j in 0..n {
            c[i][j] = (0..n).map(|k| tmp[i][k] * li[j][k]).sum();
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (c[i][j] + c[j][i]);
            c[i][j] = avg;
            c[j][i] = avg;
        }
    }
    Some(sym_eigenvalues(n, &c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip_3x3() {
        let m = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let inv = inverse(3, &m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eigenvalues_of_known_matrix() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3
        let m = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0; 3]];
        let ev = sym_eigenvalues(2, &m);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
        let m3 = [[2.0, 0.0, 0.0], [0.0, 3.0, 4.0], [0.0, 4.0, 9.0]];
        let ev = sym_eigenvalues(3, &m3);
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!((ev[1] - 2.0).abs() < 1e-12);
        assert!((ev[2] - 11.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = [[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0; 3]];
        assert!(cholesky(2, &m).is_none());
        assert!(cholesky(2, &identity(2)).is_some());
    }

    #[test]
    fn generalized_eigenvalues_scale() {
        let b = [[2.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0; 3]];
        let a = [[4.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0; 3]];
        let ev = generalized_eigenvalues(2, &a, &b).unwrap();
        assert!((ev[0] - 2.0).abs() < 1e-14 && (ev[1] - 4.0).abs() < 1e-14);
    }
}
