//! One-variable profiles and the closed-form curvature of diagonal metrics
//! `a(x)² dx² + b(x)² dy² [+ c(x)² dz²]` whose coefficients depend on the first
//! coordinate only.
//!
//! Profiles are trigonometric series in the angle `θ = 2πx/L`, optionally
//! exponentiated. The textual form is a whitespace separated list of terms:
//! a bare number is a constant, `cos:<amp>:<mode>` and `sin:<amp>:<mode>` are
//! harmonics, and a leading `exp` exponentiates the whole series. For example
//! `2 cos:1:1` is `2 + cos θ` and `exp sin:0.1:1` is `e^{0.1 sin θ}`.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::grid::{MetricField, PeriodicGrid, ScalarField};
use crate::math::{cos, exp, sin};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Harmonic {
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTerm {
    pub kind: Harmonic,
    pub amplitude: f64,
    pub mode: u32,
}

/// `constant + Σ amplitude · cos|sin(mode · θ)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigSeries {
    pub constant: f64,
    pub terms: Vec<TrigTerm>,
}

impl TrigSeries {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: Vec::new() }
    }

    pub fn with(mut self, kind: Harmonic, amplitude: f64, mode: u32) -> Self {
        self.terms.push(TrigTerm { kind, amplitude, mode });
        self
    }

    /// Value and first two derivatives in `x` for period `period`.
    pub fn jet(&self, x: f64, period: f64) -> [f64; 3] {
        let w = 2.0 * PI / period;
        let mut out = [self.constant, 0.0, 0.0];
        for t in &self.terms {
            let k = t.mode as f64 * w;
            let (s, c) = (sin(k * x), cos(k * x));
            let a = t.amplitude;
            match t.kind {
                Harmonic::Cos => {
                    out[0] += a * c;
                    out[1] -= a * k * s;
                    out[2] -= a * k * k * c;
                }
                Harmonic::Sin => {
                    out[0] += a * s;
                    out[1] += a * k * c;
                    out[2] -= a * k * k * s;
                }
            }
        }
        out
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.amplitude == 0.0 || t.mode == 0)
    }
}

/// A positive-or-not one-variable profile.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Trig(TrigSeries),
    ExpOf(TrigSeries),
}

impl Profile {
    pub fn constant(c: f64) -> Self {
        Profile::Trig(TrigSeries::constant(c))
    }

    /// Value and first two `x`-derivatives.
    pub fn jet(&self, x: f64, period: f64) -> [f64; 3] {
        match self {
            Profile::Trig(s) => s.jet(x, period),
            Profile::ExpOf(s) => {
                let [v, d1, d2] = s.jet(x, period);
                let e = exp(v);
                [e, d1 * e, (d2 + d1 * d1) * e]
            }
        }
    }

    pub fn value(&self, x: f64, period: f64) -> f64 {
        self.jet(x, period)[0]
    }

    /// Samples the profile along axis 0 of `grid`.
    pub fn sample(&self, grid: &PeriodicGrid) -> Result<ScalarField> {
        let period = grid.extent(0);
        ScalarField::from_fn(*grid, |x| self.value(x[0], period))
    }

    fn check_positive(&self, grid: &PeriodicGrid) -> Result<()> {
        let period = grid.extent(0);
        let min = (0..grid.resolution(0))
            .map(|i| self.value(i as f64 * grid.spacing(0), period))
            .fold(f64::INFINITY, f64::min);
        if min > 0.0 && min.is_finite() {
            Ok(())
        } else {
            Err(Error::NonPositiveProfile { min })
        }
    }
}

fn fmt_num(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    // shortest representation that round-trips
    write!(f, "{v:?}")
}

impl fmt::Display for TrigSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_num(f, self.constant)?;
        for t in &self.terms {
            let name = match t.kind {
                Harmonic::Cos => "cos",
                Harmonic::Sin => "sin",
            };
            write!(f, " {name}:")?;
            fmt_num(f, t.amplitude)?;
            write!(f, ":{}", t.mode)?;
        }
        Ok(())
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Trig(s) => write!(f, "{s}"),
            Profile::ExpOf(s) => write!(f, "exp {s}"),
        }
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| invalid(alloc::format!("cannot parse {what} `{s}`")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(alloc::format!("{what} must be finite")))
    }
}

impl FromStr for TrigSeries {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut series = TrigSeries::default();
        let mut any = false;
        for tok in s.split_whitespace() {
            any = true;
            let parts: Vec<&str> = tok.split(':').collect();
            match parts.as_slice() {
                [c] => series.constant += parse_f64(c, "profile constant")?,
                [kind, amp, mode] => {
                    let kind = match *kind {
                        "cos" => Harmonic::Cos,
                        "sin" => Harmonic::Sin,
                        other => return Err(invalid(alloc::format!("unknown harmonic `{other}`"))),
                    };
                    let amplitude = parse_f64(amp, "amplitude")?;
                    let mode = mode
                        .parse()
                        .map_err(|_| invalid(alloc::format!("mode must be a nonnegative integer, got `{mode}`")))?;
                    series.terms.push(TrigTerm { kind, amplitude, mode });
                }
                _ => return Err(invalid(alloc::format!("malformed profile term `{tok}`"))),
            }
        }
        if !any {
            return Err(invalid("empty profile"));
        }
        Ok(series)
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.strip_prefix("exp") {
            Some(rest) if rest.is_empty() || rest.starts_with(char::is_whitespace) => {
                Ok(Profile::ExpOf(rest.parse()?))
            }
            _ => Ok(Profile::Trig(t.parse()?)),
        }
    }
}

/// Diagonal metric `Σ f_i(x)² dx_i²` with one profile per axis.
pub fn warped_metric(grid: &PeriodicGrid, profiles: &[Profile]) -> Result<MetricField> {
    if profiles.len() != grid.dim() {
        return Err(Error::ShapeMismatch("one warping profile per axis"));
    }
    let mut diag = Vec::with_capacity(grid.dim());
    for prof in profiles {
        prof.check_positive(grid)?;
        let f = prof.sample(grid)?;
        diag.push(f.values().iter().map(|v| v * v).collect());
    }
    MetricField::diagonal(*grid, &diag)
}

/// Closed-form curvature of a warped diagonal metric, sampled at the lattice points.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedCurvature {
    /// Sectional curvatures `[K_xy, K_xz, K_yz]` (only `K_xy` is meaningful in 2D).
    pub sectional: Vec<[f64; 3]>,
    /// Diagonal coordinate components `Ric_ii`.
    pub ricci: Vec<[f64; 3]>,
    pub scalar: ScalarField,
}

impl WarpedCurvature {
    /// Gauss curvature in 2D.
    pub fn gauss(&self) -> Vec<f64> {
        self.sectional.iter().map(|s| s[0]).collect()
    }
}

/// Evaluates `K = −(1/(ab))(b′/a)′` in 2D and its diagonal analogues in 3D:
/// `K_xz = −(1/(ac))(c′/a)′`, `K_yz = −b′c′/(a²bc)`.
pub fn reduced_warped_curvature(grid: &PeriodicGrid, profiles: &[Profile]) -> Result<WarpedCurvature> {
    let n = grid.dim();
    if profiles.len() != n {
        return Err(Error::ShapeMismatch("one warping profile per axis"));
    }
    for p in profiles {
        p.check_positive(grid)?;
    }
    let period = grid.extent(0);
    let np = grid.len();
    let mut sectional = Vec::with_capacity(np);
    let mut ricci = Vec::with_capacity(np);
    let mut scalar = Vec::with_capacity(np);
    for p in 0..np {
        let x = grid.point(p)[0];
        let [a, a1, _] = profiles[0].jet(x, period);
        let [b, b1, b2] = profiles[1].jet(x, period);
        let along = |f: f64, f1: f64, f2: f64| -(f2 / a - a1 * f1 / (a * a)) / (a * f);
        let kxy = along(b, b1, b2);
        let (kxz, kyz, c) = if n == 3 {
            let [c, c1, c2] = profiles[2].jet(x, period);
            (along(c, c1, c2), -b1 * c1 / (a * a * b * c), c)
        } else {
            (0.0, 0.0, 1.0)
        };
        sectional.push([kxy, kxz, kyz]);
        ricci.push([(kxy + kxz) * a * a, (kxy + kyz) * b * b, (kxz + kyz) * c * c]);
        scalar.push(2.0 * (kxy + kxz + kyz));
    }
    Ok(WarpedCurvature { sectional, ricci, scalar: ScalarField::new(*grid, scalar)? })
}
