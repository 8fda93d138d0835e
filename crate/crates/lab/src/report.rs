//! JSON report written next to the CSV files of a run.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const SCHEMA: &str = "rhlab.report/1";

/// A float that survives JSON even when infinite or NaN (written as a string).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Real(pub f64);

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        Real(v)
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Real(v)),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(Real(f64::INFINITY)),
                "-inf" => Ok(Real(f64::NEG_INFINITY)),
                "nan" => Ok(Real(f64::NAN)),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub scenario_name: String,
    pub scenario_hash: String,
    pub scenario: String,
    /// `complete` or `singular at t=<time>`.
    pub status: String,
    pub flow: FlowSection,
    pub monitor: Option<MonitorSection>,
    pub extension: Option<ExtensionSection>,
    pub verdicts: Vec<VerdictLine>,
    pub diagnostics: Vec<VerdictLine>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.status == "complete" && self.verdicts.iter().all(|v| v.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictLine {
    pub id: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSection {
    pub steps: usize,
    pub final_time: Real,
    pub snapshots: usize,
    pub singular_point: Option<usize>,
    /// Measured `sup|Ric|` over the run.
    pub k_measured: Real,
    /// `max(k_measured, k_floor)`, the curvature bound used downstream.
    pub k_used: Real,
    pub l_measured: Real,
    pub volume_identity_residual: Real,
    pub gradient_identity_residual: Real,
    pub max_gradient_increase: Real,
    /// Violation of `[e^{−2Kt}, e^{2Kt}]` with the measured `K`.
    pub equivalence_violation_literal: Real,
    /// Violation of `[e^{−2Kt}, e^{(2K+4L²)t}]`.
    pub equivalence_violation_corrected: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityLine {
    pub id: String,
    pub c_fit: Real,
    pub binding_time: Option<Real>,
    pub feasible: bool,
    pub alt_c_fit: Option<Real>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSection {
    pub c_in: Real,
    pub lambda1: Real,
    pub lambda2: Real,
    pub gamma1: Real,
    pub gamma2: Real,
    pub ln_gamma1: Real,
    pub ln_gamma2: Real,
    pub overflow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedLine {
    pub p: Real,
    pub ratio: Real,
    pub c: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSection {
    pub p: Real,
    pub rho: Real,
    pub x0_index: usize,
    pub cutoff_radius: Real,
    pub cutoff_self_overlaps: bool,
    pub cutoff_gradient_ratio: Real,
    pub transverse_resolution: usize,
    pub interpolation_checks: usize,
    pub interpolation_failures: usize,
    pub synthetic_interpolation_checks: usize,
    pub synthetic_interpolation_failures: usize,
    /// Largest relative violation of the Hölder, `S` and Ricci bounds over all samples.
    pub sample_bound_violation: Real,
    pub negative_sample_values: usize,
    pub inequalities: Vec<InequalityLine>,
    /// Smallest constant for which the initial value `U(0)` obeys the bound feeding `Γ₁, Γ₂`.
    pub absorption_c: Option<Real>,
    pub gamma: GammaSection,
    pub ball_rhs: Real,
    pub ball_min_margin: Real,
    pub ball_first_violation: Option<Real>,
    pub comparison_min_margin: Real,
    pub comparison_first_violation: Option<Real>,
    pub fitted_lambda1: Option<Real>,
    pub fitted_lambda2: Option<Real>,
    pub fitted_comparison_pass: bool,
    pub normalized: Vec<NormalizedLine>,
    pub normalized_spread: Real,
    pub normalized_uniform: bool,
    /// Smallest `c` with `Vol(Ω)(t)/Vol(Ω)(τ) ≤ e^{cT}` over sampled pairs.
    pub volume_rate: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLine {
    pub a: Real,
    pub c_fit: Real,
    pub derived_c_fit: Real,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionSection {
    pub c_m: Real,
    pub heat_bound_c: Real,
    pub heat_bound_witness: Option<(Real, usize)>,
    pub riccati_slack: Real,
    pub riccati_worst_excess: Real,
    pub riccati_pass: bool,
    pub riccati_witness: Option<(Real, usize)>,
    pub energy: Vec<EnergyLine>,
    pub sup_phi_inner: Real,
    pub moser_a: Real,
    pub moser_c_n: Real,
    pub moser_implied_constant: Real,
    pub phi_growth_rate: Real,
    pub phi_growth_bounded: bool,
    pub scalar_lower_bound: Real,
    pub scalar_phi_ratio: Real,
    pub exponent_convention: String,
}
