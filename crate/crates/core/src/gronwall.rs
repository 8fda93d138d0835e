//! Discrete Grönwall comparison for `U′ ≤ Λ₁U + Λ₂F` along a sampled run.

use alloc::vec::Vec;

use crate::diff;
use crate::error::{invalid, Error, Result};
use crate::math::{exp, expm1};

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonProblem {
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub forcing: Vec<f64>,
}

impl ComparisonProblem {
    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        if self.u.len() != n || self.forcing.len() != n {
            return Err(Error::ShapeMismatch("series and time grid differ in length"));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("time grid must be strictly increasing"));
        }
        if self.u.iter().chain(&self.forcing).any(|v| !(*v >= 0.0)) {
            return Err(invalid("U and the forcing must be nonnegative"));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(invalid("lambda1 and lambda2 must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Comparison bound at every sample time.
    pub envelope: Vec<f64>,
    /// `(bound − U)/bound`, zero where both vanish.
    pub margins: Vec<f64>,
    pub first_violation: Option<f64>,
}

impl ComparisonReport {
    pub fn pass(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// `(e^{λh} − 1)/λ`, equal to `h` at `λ = 0`.
fn phi1(lambda: f64, h: f64) -> f64 {
    if lambda == 0.0 {
        h
    } else {
        expm1(lambda * h) / lambda
    }
}

/// Integrates `B′ = Λ₁B + Λ₂F` from `B(t₀) = U(t₀)` exactly on each
/// subinterval, with `F` frozen at the trapezoid mean of its endpoint values.
pub fn comparison_envelope(p: &ComparisonProblem) -> Result<Vec<f64>> {
    p.validate()?;
    let mut b = Vec::with_capacity(p.times.len());
    b.push(p.u[0]);
    for i in 0..p.times.len() - 1 {
        let h = p.times[i + 1] - p.times[i];
        let f = 0.5 * (p.forcing[i] + p.forcing[i + 1]);
        let next = exp(p.lambda1 * h) * b[i] + p.lambda2 * f * phi1(p.lambda1, h);
        b.push(next);
    }
    Ok(b)
}

pub fn verify_comparison(p: &ComparisonProblem) -> Result<ComparisonReport> {
    let envelope = comparison_envelope(p)?;
    let mut margins = Vec::with_capacity(envelope.len());
    let mut first_violation = None;
    for (i, (&b, &u)) in envelope.iter().zip(&p.u).enumerate() {
        let m = if b > 0.0 { (b - u) / b } else if u > 0.0 { f64::NEG_INFINITY } else { 0.0 };
        if u > b * (1.0 + 1e-9) && first_violation.is_none() {
            first_violation = Some(p.times[i]);
        }
        margins.push(m);
    }
    Ok(ComparisonReport { envelope, margins, first_violation })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaFit {
    Feasible { lambda1: f64, lambda2: f64 },
    /// `U′ > 0` at a time where `U = F = 0`.
    Infeasible { t: f64 },
}

/// Minimal `Λ₁ + Λ₂` with `U′ ≤ Λ₁U + Λ₂F` at interior samples (centred `U′`),
/// then scaled up just enough that [`verify_comparison`] passes.
pub fn fit_lambdas(times: &[f64], u: &[f64], forcing: &[f64]) -> Result<LambdaFit> {
    let probe = ComparisonProblem {
        times: times.to_vec(),
        u: u.to_vec(),
        lambda1: 0.0,
        lambda2: 0.0,
        forcing: forcing.to_vec(),
    };
    probe.validate()?;
    let du = diff::time_derivative(times, u)?;
    let scale = u.iter().chain(forcing).chain(&du).fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let n = times.len();
    let mut rows = Vec::new();
    for i in 1..n - 1 {
        if du[i] <= tol {
            continue;
        }
        if u[i] <= 0.0 && forcing[i] <= 0.0 {
            return Ok(LambdaFit::Infeasible { t: times[i] });
        }
        rows.push((u[i], forcing[i], du[i]));
    }
    let (mut l1, mut l2) = minimal_sum(&rows);
    for &(a, b, d) in &rows {
        let have = l1 * a + l2 * b;
        if have < d {
            if b > 0.0 {
                l2 = (d - l1 * a) / b;
            } else {
                l1 = (d - l2 * b) / a;
            }
        }
    }
    let passes = |l1: f64, l2: f64, s: f64| {
        let q = ComparisonProblem { lambda1: l1 * s, lambda2: l2 * s, ..probe.clone() };
        verify_comparison(&q).map(|r| r.pass())
    };
    if passes(l1, l2, 1.0)? {
        return Ok(LambdaFit::Feasible { lambda1: l1, lambda2: l2 });
    }
    if l1 == 0.0 && l2 == 0.0 {
        // the derivative constraints are slack but the integrated bound is not
        l1 = tol.max(f64::MIN_POSITIVE);
        l2 = l1;
    }
    let mut hi = 2.0;
    while !passes(l1, l2, hi)? {
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(LambdaFit::Infeasible { t: times[0] });
        }
    }
    let mut lo = 1.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if passes(l1, l2, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(LambdaFit::Feasible { lambda1: l1 * hi, lambda2: l2 * hi })
}

/// Vertex enumeration of `min x + y` over `{x, y ≥ 0, a x + b y ≥ d}`.
fn minimal_sum(rows: &[(f64, f64, f64)]) -> (f64, f64) {
    if rows.is_empty() {
        return (0.0, 0.0);
    }
    let feasible = |x: f64, y: f64| rows.iter().all(|&(a, b, d)| a * x + b * y >= d * (1.0 - 1e-12));
    let mut cands = Vec::new();
    for &(a, b, d) in rows {
        if a > 0.0 {
            cands.push((d / a, 0.0));
        }
        if b > 0.0 {
            cands.push((0.0, d / b));
        }
    }
    for (i, &(a1, b1, d1)) in rows.iter().enumerate() {
        for &(a2, b2, d2) in &rows[i + 1..] {
            let det = a1 * b2 - a2 * b1;
            if det.abs() <= 1e-14 * (a1 * b2).abs().max((a2 * b1).abs()) {
                continue;
            }
            let x = (d1 * b2 - d2 * b1) / det;
            let y = (a1 * d2 - a2 * d1) / det;
            if x >= 0.0 && y >= 0.0 {
                cands.push((x, y));
            }
        }
    }
    cands
        .into_iter()
        .filter(|&(x, y)| feasible(x, y))
        .min_by(|p, q| (p.0 + p.1).total_cmp(&(q.0 + q.1)))
        .unwrap_or_else(|| {
            let need = |w: fn(&(f64, f64, f64)) -> f64| {
                rows.iter().map(|r| if w(r) > 0.0 { r.2 / w(r) } else { 0.0 }).fold(0.0, f64::max)
            };
            (need(|r| r.0), need(|r| r.1))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, t: f64) -> Vec<f64> {
        (0..n).map(|i| t * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exponential_is_exact() {
        let t = grid(21, 1.0);
        let u: Vec<f64> = t.iter().map(|s| exp(2.0 * s)).collect();
        let p = ComparisonProblem { times: t.clone(), u: u.clone(), lambda1: 2.0, lambda2: 0.0, forcing: alloc::vec![0.0; 21] };
        let r = verify_comparison(&p).unwrap();
        assert!(r.pass());
        for (b, v) in r.envelope.iter().zip(&u) {
            assert!((b - v).abs() <= 1e-9 * v);
        }
    }

    #[test]
    fn constant_is_equality() {
        let t = grid(5, 1.0);
        let p = ComparisonProblem { times: t, u: alloc::vec![3.0; 5], lambda1: 0.0, lambda2: 0.0, forcing: alloc::vec![0.0; 5] };
        let r = verify_comparison(&p).unwrap();
        assert!(r.pass() && r.margins.iter().all(|m| m.abs() < 1e-15));
    }

    #[test]
    fn fit_exponential() {
        let t = grid(201, 1.0);
        let u: Vec<f64> = t.iter().map(|s| exp(2.0 * s)).collect();
        let LambdaFit::Feasible { lambda1, lambda2 } = fit_lambdas(&t, &u, &alloc::vec![1.0; 201]).unwrap() else {
            panic!("infeasible")
        };
        assert!((lambda1 - 2.0).abs() < 1e-3, "{lambda1}");
        assert!(lambda2.abs() < 1e-3, "{lambda2}");
    }

    #[test]
    fn fit_linear_and_zero() {
        let t = grid(11, 1.0);
        let LambdaFit::Feasible { lambda1, lambda2 } = fit_lambdas(&t, &t, &alloc::vec![1.0; 11]).unwrap() else {
            panic!("infeasible")
        };
        assert!(lambda1 == 0.0 && (lambda2 - 1.0).abs() < 1e-9, "{lambda1} {lambda2}");
        let z = alloc::vec![0.0; 11];
        assert_eq!(fit_lambdas(&t, &z, &z).unwrap(), LambdaFit::Feasible { lambda1: 0.0, lambda2: 0.0 });
    }

    #[test]
    fn infeasible_when_nothing_drives_growth() {
        let t = grid(5, 1.0);
        let u = [0.0, 0.0, 0.0, 1.0, 2.0];
        let f = [0.0; 5];
        // U′ at t = 0.5 is positive while U = F = 0
        assert!(matches!(fit_lambdas(&t, &u, &f).unwrap(), LambdaFit::Infeasible { .. }));
    }
}
