//! Plain-text scenario files: one `section.key = value` per line, `#` comments.
//!
//! ```text
//! name = warped_coupled
//! grid.dim = 2
//! grid.extent = 6.283185307179586 6.283185307179586
//! grid.resolution = 64 8
//! metric.kind = warped
//! metric.profiles = 1; 2 cos:1:1
//! field.kind = cosine
//! field.amplitude = 0.3
//! ```
//!
//! Unset keys take documented defaults; [`Scenario::to_text`] writes every key
//! so a saved scenario is fully explicit.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rhlab_core::flow::FlowState;
use rhlab_core::grid::{MetricField, PeriodicGrid, ScalarField};
use rhlab_core::warped::{warped_metric, Profile, TrigSeries};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    DuplicateKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("`{key}`: {msg}")]
    BadValue { key: String, msg: String },
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("no bundled preset named `{0}`")]
    UnknownPreset(String),
}

type Result<T> = std::result::Result<T, ScenarioError>;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec {
    Flat,
    /// `diag(f₁², …, f_n²)` with each `f_i` a function of the first coordinate.
    Warped(Vec<Profile>),
    /// `e^{2v} δ` with `v` a function of the first coordinate.
    Conformal(TrigSeries),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Constant(f64),
    /// `amplitude · cos(mode · 2πx/L)`.
    Cosine { amplitude: f64, mode: u32 },
    /// Values at equally spaced points of the first axis, periodic linear interpolation.
    Table(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstantPolicy {
    Fitted,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    pub extent: Vec<f64>,
    pub resolution: Vec<usize>,
    pub metric: MetricSpec,
    pub field: FieldSpec,
    pub horizon: f64,
    pub snapshots: usize,
    pub safety: f64,
    pub max_dt: Option<f64>,
    /// Base point coordinate along the first axis; the others are 0.
    pub x0: f64,
    pub rho: f64,
    pub p: f64,
    pub p_list: Vec<f64>,
    pub c_in: ConstantPolicy,
    /// Lower bound applied to the measured `sup|Ric|`.
    pub k_floor: f64,
    pub transverse_resolution: usize,
    pub c_m: ConstantPolicy,
    pub energy_exponents: Vec<f64>,
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "name",
    "grid.dim",
    "grid.extent",
    "grid.resolution",
    "metric.kind",
    "metric.profiles",
    "metric.potential",
    "field.kind",
    "field.value",
    "field.amplitude",
    "field.mode",
    "field.table",
    "flow.horizon",
    "flow.snapshots",
    "flow.safety",
    "flow.max_dt",
    "localization.x0",
    "localization.rho",
    "monitor.p",
    "monitor.p_list",
    "monitor.c_in",
    "monitor.k_floor",
    "monitor.transverse_resolution",
    "extension.c_m",
    "extension.exponents",
    "seed",
];

pub const PRESETS: &[(&str, &str)] = &[
    ("flat_static", include_str!("../presets/flat_static.scn")),
    ("flat_coupled", include_str!("../presets/flat_coupled.scn")),
    ("warped_ricci", include_str!("../presets/warped_ricci.scn")),
    ("warped_coupled", include_str!("../presets/warped_coupled.scn")),
    ("conformal_ricci", include_str!("../presets/conformal_ricci.scn")),
    ("warped3d_coupled", include_str!("../presets/warped3d_coupled.scn")),
];

pub fn preset(name: &str) -> Result<Scenario> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ScenarioError::UnknownPreset(name.to_string()))?;
    Scenario::parse(text)
}

struct Entries(BTreeMap<String, String>);

impl Entries {
    fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.take(key)
            .map(|v| v.parse::<T>().map_err(|e| bad(key, e.to_string())))
            .transpose()
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.take(key)
            .map(|v| {
                v.split_whitespace()
                    .map(|t| t.parse::<T>().map_err(|e| bad(key, format!("`{t}`: {e}"))))
                    .collect()
            })
            .transpose()
    }
}

fn bad(key: &str, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::BadValue { key: key.to_string(), msg: msg.into() }
}

fn require(ok: bool, constraint: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(ScenarioError::Constraint(constraint.to_string()))
    }
}

fn parse_policy(key: &str, v: &str) -> Result<ConstantPolicy> {
    match v {
        "fitted" | "auto" => Ok(ConstantPolicy::Fitted),
        other => other
            .parse::<f64>()
            .map(ConstantPolicy::Fixed)
            .map_err(|_| bad(key, "expected `fitted` or a number")),
    }
}

fn join<T: std::fmt::Debug>(v: &[T]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ScenarioError::Syntax { line: i + 1, msg: "expected `key = value`".into() })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !KEYS.contains(&k.as_str()) {
                return Err(ScenarioError::UnknownKey(k));
            }
            if map.insert(k.clone(), v).is_some() {
                return Err(ScenarioError::DuplicateKey(k));
            }
        }
        let mut e = Entries(map);
        let name = e.take("name").unwrap_or_else(|| "unnamed".to_string());
        let dim: usize = e.parse("grid.dim")?.ok_or_else(|| ScenarioError::MissingKey("grid.dim".into()))?;
        require(dim == 2 || dim == 3, "grid.dim in {2, 3}")?;
        let extent = e.list("grid.extent")?.unwrap_or_else(|| vec![2.0 * PI; dim]);
        let resolution: Vec<usize> =
            e.list("grid.resolution")?.ok_or_else(|| ScenarioError::MissingKey("grid.resolution".into()))?;
        let metric = match e.take("metric.kind").as_deref().unwrap_or("flat") {
            "flat" => MetricSpec::Flat,
            "warped" => {
                let text = e.take("metric.profiles").ok_or_else(|| ScenarioError::MissingKey("metric.profiles".into()))?;
                let profiles = text
                    .split(';')
                    .map(|t| t.trim().parse::<Profile>().map_err(|err| bad("metric.profiles", err.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                MetricSpec::Warped(profiles)
            }
            "conformal" => {
                let text = e.take("metric.potential").ok_or_else(|| ScenarioError::MissingKey("metric.potential".into()))?;
                MetricSpec::Conformal(text.parse().map_err(|err: rhlab_core::Error| bad("metric.potential", err.to_string()))?)
            }
            other => return Err(bad("metric.kind", format!("unknown kind `{other}` (flat | warped | conformal)"))),
        };
        let field = match e.take("field.kind").as_deref().unwrap_or("constant") {
            "constant" => FieldSpec::Constant(e.parse("field.value")?.unwrap_or(0.0)),
            "cosine" => FieldSpec::Cosine {
                amplitude: e.parse("field.amplitude")?.ok_or_else(|| ScenarioError::MissingKey("field.amplitude".into()))?,
                mode: e.parse("field.mode")?.unwrap_or(1),
            },
            "table" => FieldSpec::Table(e.list("field.table")?.ok_or_else(|| ScenarioError::MissingKey("field.table".into()))?),
            other => return Err(bad("field.kind", format!("unknown kind `{other}` (constant | cosine | table)"))),
        };
        let horizon = e.parse("flow.horizon")?.ok_or_else(|| ScenarioError::MissingKey("flow.horizon".into()))?;
        let snapshots = e.parse("flow.snapshots")?.unwrap_or(20);
        let safety = e.parse("flow.safety")?.unwrap_or(0.9);
        let max_dt = match e.take("flow.max_dt").as_deref() {
            None | Some("none") => None,
            Some(v) => Some(v.parse::<f64>().map_err(|err| bad("flow.max_dt", err.to_string()))?),
        };
        let x0 = e.parse("localization.x0")?.unwrap_or(0.0);
        let rho = e.parse("localization.rho")?.ok_or_else(|| ScenarioError::MissingKey("localization.rho".into()))?;
        let p = e.parse("monitor.p")?.unwrap_or(3.0);
        let p_list = e.list("monitor.p_list")?.unwrap_or_else(|| vec![3.0, 4.0, 6.0]);
        let c_in = match e.take("monitor.c_in") {
            Some(v) => parse_policy("monitor.c_in", &v)?,
            None => ConstantPolicy::Fitted,
        };
        let k_floor = e.parse("monitor.k_floor")?.unwrap_or(1.0);
        let transverse_resolution = e.parse("monitor.transverse_resolution")?.unwrap_or(if dim == 2 { 32 } else { 16 });
        let c_m = match e.take("extension.c_m") {
            Some(v) => parse_policy("extension.c_m", &v)?,
            None => ConstantPolicy::Fitted,
        };
        let energy_exponents = e.list("extension.exponents")?.unwrap_or_else(|| vec![1.0, 2.0, 4.0]);
        let seed = e.parse("seed")?.unwrap_or(0);
        if let Some(k) = e.0.keys().next() {
            return Err(bad(k, "key does not apply to the selected kind"));
        }
        let s = Scenario {
            name,
            dim,
            extent,
            resolution,
            metric,
            field,
            horizon,
            snapshots,
            safety,
            max_dt,
            x0,
            rho,
            p,
            p_list,
            c_in,
            k_floor,
            transverse_resolution,
            c_m,
            energy_exponents,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        require(d == 2 || d == 3, "grid.dim in {2, 3}")?;
        require(self.extent.len() == d, "grid.extent has grid.dim entries")?;
        require(self.extent.iter().all(|v| *v > 0.0 && v.is_finite()), "grid.extent > 0")?;
        require(self.resolution.len() == d, "grid.resolution has grid.dim entries")?;
        require(self.resolution.iter().all(|n| *n >= 8), "grid.resolution >= 8")?;
        match &self.metric {
            MetricSpec::Flat => {}
            MetricSpec::Warped(p) => require(p.len() == d, "metric.profiles has grid.dim entries")?,
            MetricSpec::Conformal(_) => {}
        }
        require(self.horizon > 0.0 && self.horizon.is_finite(), "flow.horizon > 0")?;
        require(self.snapshots >= 4, "flow.snapshots >= 4")?;
        require(self.safety > 0.0 && self.safety <= 1.0, "flow.safety in (0, 1]")?;
        if let Some(m) = self.max_dt {
            require(m > 0.0, "flow.max_dt > 0")?;
        }
        require(self.rho > 0.0 && self.rho.is_finite(), "localization.rho > 0")?;
        require(self.x0.is_finite(), "localization.x0 finite")?;
        require(self.p >= 3.0 && self.p.is_finite(), "monitor.p >= 3")?;
        require(self.p_list.iter().all(|q| (3.0..=8.0).contains(q)), "monitor.p_list within [3, 8]")?;
        if let ConstantPolicy::Fixed(c) = self.c_in {
            require(c > 0.0, "monitor.c_in > 0")?;
        }
        require(self.k_floor > 0.0, "monitor.k_floor > 0")?;
        require(self.transverse_resolution >= 8, "monitor.transverse_resolution >= 8")?;
        if let ConstantPolicy::Fixed(c) = self.c_m {
            require(c >= 2.0, "extension.c_m >= 2")?;
        }
        require(self.energy_exponents.iter().all(|a| *a >= 1.0), "extension.exponents >= 1")?;
        if let FieldSpec::Table(t) = &self.field {
            require(t.len() >= 2, "field.table has at least 2 values")?;
        }
        let state = self.initial_state().map_err(|e| ScenarioError::Constraint(format!("initial data: {e}")))?;
        state.g.check_spd().map_err(|_| ScenarioError::Constraint("metric profiles keep g SPD".into()))?;
        Ok(())
    }

    /// Canonical text with every key written out.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("name", self.name.clone());
        kv("grid.dim", self.dim.to_string());
        kv("grid.extent", join(&self.extent));
        kv("grid.resolution", join(&self.resolution));
        match &self.metric {
            MetricSpec::Flat => kv("metric.kind", "flat".into()),
            MetricSpec::Warped(p) => {
                kv("metric.kind", "warped".into());
                kv("metric.profiles", p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "));
            }
            MetricSpec::Conformal(v) => {
                kv("metric.kind", "conformal".into());
                kv("metric.potential", v.to_string());
            }
        }
        match &self.field {
            FieldSpec::Constant(c) => {
                kv("field.kind", "constant".into());
                kv("field.value", format!("{c:?}"));
            }
            FieldSpec::Cosine { amplitude, mode } => {
                kv("field.kind", "cosine".into());
                kv("field.amplitude", format!("{amplitude:?}"));
                kv("field.mode", mode.to_string());
            }
            FieldSpec::Table(t) => {
                kv("field.kind", "table".into());
                kv("field.table", join(t));
            }
        }
        kv("flow.horizon", format!("{:?}", self.horizon));
        kv("flow.snapshots", self.snapshots.to_string());
        kv("flow.safety", format!("{:?}", self.safety));
        kv("flow.max_dt", self.max_dt.map_or("none".into(), |m| format!("{m:?}")));
        kv("localization.x0", format!("{:?}", self.x0));
        kv("localization.rho", format!("{:?}", self.rho));
        kv("monitor.p", format!("{:?}", self.p));
        kv("monitor.p_list", join(&self.p_list));
        let policy = |c: ConstantPolicy| match c {
            ConstantPolicy::Fitted => "fitted".to_string(),
            ConstantPolicy::Fixed(v) => format!("{v:?}"),
        };
        kv("monitor.c_in", policy(self.c_in));
        kv("monitor.k_floor", format!("{:?}", self.k_floor));
        kv("monitor.transverse_resolution", self.transverse_resolution.to_string());
        kv("extension.c_m", policy(self.c_m));
        kv("extension.exponents", join(&self.energy_exponents));
        kv("seed", self.seed.to_string());
        s
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn grid(&self) -> rhlab_core::Result<PeriodicGrid> {
        PeriodicGrid::new(self.dim, &self.extent, &self.resolution)
    }

    pub fn initial_metric(&self, grid: &PeriodicGrid) -> rhlab_core::Result<MetricField> {
        match &self.metric {
            MetricSpec::Flat => Ok(MetricField::flat(*grid)),
            MetricSpec::Warped(p) => warped_metric(grid, p),
            MetricSpec::Conformal(v) => warped_metric(grid, &vec![Profile::ExpOf(v.clone()); self.dim]),
        }
    }

    pub fn initial_field(&self, grid: &PeriodicGrid) -> rhlab_core::Result<ScalarField> {
        let period = grid.extent(0);
        match &self.field {
            FieldSpec::Constant(c) => Ok(ScalarField::constant(*grid, *c)),
            FieldSpec::Cosine { amplitude, mode } => ScalarField::from_fn(*grid, |x| {
                amplitude * (2.0 * PI * f64::from(*mode) * x[0] / period).cos()
            }),
            FieldSpec::Table(t) => {
                let m = t.len();
                ScalarField::from_fn(*grid, |x| {
                    let s = (x[0] / period).rem_euclid(1.0) * m as f64;
                    let i = s.floor() as usize % m;
                    let w = s - s.floor();
                    (1.0 - w) * t[i] + w * t[(i + 1) % m]
                })
            }
        }
    }

    pub fn initial_state(&self) -> rhlab_core::Result<FlowState> {
        let grid = self.grid()?;
        FlowState::new(0.0, self.initial_metric(&grid)?, self.initial_field(&grid)?)
    }

    /// Lattice index of the base point on `grid`.
    pub fn base_point(&self, grid: &PeriodicGrid) -> usize {
        let n = grid.resolution(0) as isize;
        let i = (self.x0 / grid.spacing(0)).round() as isize;
        grid.linear_index(&[i.rem_euclid(n), 0, 0][..grid.dim()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_round_trips() {
        for (name, _) in PRESETS {
            let s = preset(name).unwrap();
            assert_eq!(&s.name, name);
            let again = Scenario::parse(&s.to_text()).unwrap();
            assert_eq!(s, again);
            assert_eq!(s.hash(), again.hash());
        }
    }

    #[test]
    fn flat_coupled_contents() {
        let s = preset("flat_coupled").unwrap();
        assert_eq!(s.metric, MetricSpec::Flat);
        assert_eq!(s.field, FieldSpec::Cosine { amplitude: 0.3, mode: 1 });
        assert_eq!(s.horizon, 1.0);
    }

    #[test]
    fn negative_rho_names_the_constraint() {
        let text = preset("flat_static").unwrap().to_text().replace("localization.rho = 1.0", "localization.rho = -1");
        let err = Scenario::parse(&text).unwrap_err().to_string();
        assert!(err.contains("localization.rho > 0"), "{err}");
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let base = preset("flat_static").unwrap().to_text();
        let err = Scenario::parse(&format!("{base}flow.speed = 3\n")).unwrap_err();
        assert!(matches!(err, ScenarioError::UnknownKey(k) if k == "flow.speed"));
        let err = Scenario::parse(&format!("{base}seed = 1\n")).unwrap_err();
        assert!(matches!(err, ScenarioError::DuplicateKey(_)));
    }

    #[test]
    fn rejects_non_spd_profiles() {
        let text = preset("warped_ricci").unwrap().to_text().replace("2.0 cos:1.0:1", "0.5 cos:1.0:1");
        let err = Scenario::parse(&text).unwrap_err().to_string();
        assert!(err.contains("initial data") || err.contains("SPD"), "{err}");
    }

    #[test]
    fn table_field_interpolates() {
        let mut s = preset("flat_static").unwrap();
        s.field = FieldSpec::Table(vec![0.0, 1.0, 0.0, -1.0]);
        let grid = s.grid().unwrap();
        let u = s.initial_field(&grid).unwrap();
        let n = grid.resolution(0);
        assert!((u.values()[grid.linear_index(&[(n / 4) as isize, 0])] - 1.0).abs() < 1e-12);
        assert!((u.values()[grid.linear_index(&[(n / 8) as isize, 0])] - 0.5).abs() < 1e-12);
    }
}
