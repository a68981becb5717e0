//! Scenario configuration: parsing, defaults and validation.
//!
//! A config is JSON with unknown keys rejected. [`parse_config`] returns a
//! normalized config where every default is explicit, so serializing it
//! and parsing again yields the same value.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::flows::FlowKind;
use crate::frequency::HSchedule;
use crate::geometry::registry::Registry;
use crate::geometry::FieldSpec;
use crate::measures::{Terminal, DEFAULT_TAU0};
use crate::schedule::Schedule;

/// Smallest number of flow steps accepted.
pub const MIN_STEPS: usize = 16;
/// Default flow horizon.
pub const DEFAULT_T_END: f64 = 0.1;

/// Which normalization of the frequency the default check set targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `κ` from the Bakry–Émery bound `Ric_f ≤ κ/(2h)`.
    #[default]
    BakryEmery,
    /// Bounded Ricci curvature with Li–Yau and Hamilton estimates.
    BoundedRicci,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    FrequencyMonotone,
    FrequencyEquality,
    EigenvalueMonotone,
    BackwardUniquenessBound,
    BoundedRicciFrequencyMonotone,
    BoundedRicciEigenvalueMonotone,
    HamiltonGradient,
    LiYau,
    MaximumPrinciple,
    ConjugateMass,
    DriftSelfAdjoint,
    IntegralBochner,
    VolumeEvolution,
    FEquation,
}

impl CheckName {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::FrequencyMonotone => "frequency_monotone",
            CheckName::FrequencyEquality => "frequency_equality",
            CheckName::EigenvalueMonotone => "eigenvalue_monotone",
            CheckName::BackwardUniquenessBound => "backward_uniqueness_bound",
            CheckName::BoundedRicciFrequencyMonotone => "bounded_ricci_frequency_monotone",
            CheckName::BoundedRicciEigenvalueMonotone => "bounded_ricci_eigenvalue_monotone",
            CheckName::HamiltonGradient => "hamilton_gradient",
            CheckName::LiYau => "li_yau",
            CheckName::MaximumPrinciple => "maximum_principle",
            CheckName::ConjugateMass => "conjugate_mass",
            CheckName::DriftSelfAdjoint => "drift_self_adjoint",
            CheckName::IntegralBochner => "integral_bochner",
            CheckName::VolumeEvolution => "volume_evolution",
            CheckName::FEquation => "f_equation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSpec {
    pub kind: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    #[serde(default = "ricci")]
    pub kind: FlowKind,
    /// Coupling `α(t)`; harmonic flow only, defaults to the constant 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Schedule>,
}

fn ricci() -> FlowKind {
    FlowKind::Ricci
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Chosen from the stability bound when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

fn default_t_end() -> f64 {
    DEFAULT_T_END
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon {
            t_end: DEFAULT_T_END,
            steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatSpec {
    #[serde(default = "default_u0")]
    pub u0: FieldSpec,
    #[serde(default)]
    pub a: Schedule,
    /// Abort when the solution stops being positive.
    #[serde(default)]
    pub positivity: bool,
}

fn default_u0() -> FieldSpec {
    FieldSpec::constant(1.0)
}

impl Default for HeatSpec {
    fn default() -> Self {
        HeatSpec {
            u0: default_u0(),
            a: Schedule::default(),
            positivity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencySpec {
    #[serde(default)]
    pub h: HSchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(default)]
    pub normalization: Normalization,
    /// Replaces the admissible `κ = 2hs`; checks are then asserted regardless of hypotheses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_override: Option<f64>,
    /// Upper Ricci bound `K`; measured along the flow when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_bound: Option<f64>,
    /// Compute `λ1` per snapshot.
    #[serde(default = "yes")]
    pub eigenvalue: bool,
    /// Colatitude samples for pointwise checks on the sphere.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn yes() -> bool {
    true
}

fn default_samples() -> usize {
    crate::estimates::DEFAULT_SAMPLES
}

impl Default for FrequencySpec {
    fn default() -> Self {
        FrequencySpec {
            h: HSchedule::default(),
            t0: None,
            t1: None,
            normalization: Normalization::default(),
            kappa_override: None,
            k_bound: None,
            eigenvalue: true,
            samples: default_samples(),
        }
    }
}

/// Per-check tolerances; absent entries take backend defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Consecutive-difference slack of monotone series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone: Option<f64>,
    /// Pointwise gradient estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    /// `|∫dV - 1|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    /// Ratio bound `I(t1)/I(t') ≥ bound`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_adjoint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bochner: Option<f64>,
    /// Relative volume-evolution residual.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
}

/// Tolerances with every default applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedTolerances {
    pub monotone: f64,
    pub estimate: f64,
    pub mass: f64,
    pub ratio: f64,
    pub self_adjoint: f64,
    pub bochner: f64,
    pub volume: f64,
}

impl Tolerances {
    /// Spectral backends default to `1e-10`; grids to `10(Δx² + Δt)`.
    fn fill(&mut self, spacing: Option<f64>, dt: f64) {
        let (series, estimate, mass, bochner) = match spacing {
            None => (1e-10, 1e-8, 1e-10, 1e-10),
            Some(dx) => {
                let g = 10.0 * (dx * dx + dt);
                (g, g, 1e-6, 1e-3)
            }
        };
        self.monotone.get_or_insert(series);
        self.estimate.get_or_insert(estimate);
        self.mass.get_or_insert(mass);
        self.ratio.get_or_insert(1e-8);
        self.self_adjoint.get_or_insert(1e-12);
        self.bochner.get_or_insert(bochner);
        self.volume.get_or_insert(series);
    }

    pub fn resolved(&self) -> Result<ResolvedTolerances> {
        let get = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::config(format!("tolerance.{name}"), "unresolved tolerance"))
        };
        Ok(ResolvedTolerances {
            monotone: get(self.monotone, "monotone")?,
            estimate: get(self.estimate, "estimate")?,
            mass: get(self.mass, "mass")?,
            ratio: get(self.ratio, "ratio")?,
            self_adjoint: get(self.self_adjoint, "self_adjoint")?,
            bochner: get(self.bochner, "bochner")?,
            volume: get(self.volume, "volume")?,
        })
    }

    fn validate(&self) -> Result<()> {
        let entries = [
            ("monotone", self.monotone),
            ("estimate", self.estimate),
            ("mass", self.mass),
            ("ratio", self.ratio),
            ("self_adjoint", self.self_adjoint),
            ("bochner", self.bochner),
            ("volume", self.volume),
        ];
        for (name, v) in entries {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::config(format!("tolerance.{name}"), format!("must be finite and >= 0, got {v}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub backend: BackendSpec,
    pub flow: FlowSpec,
    #[serde(default)]
    pub horizon: Horizon,
    #[serde(default = "default_tau0")]
    pub tau0: f64,
    #[serde(default)]
    pub terminal: Terminal,
    #[serde(default)]
    pub heat: HeatSpec,
    #[serde(default)]
    pub frequency: FrequencySpec,
    /// Checks to run; defaults depend on the normalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckName>>,
    #[serde(default)]
    pub tolerance: Tolerances,
    /// Output directory; `GEOFLOW_OUT` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_tau0() -> f64 {
    DEFAULT_TAU0
}

impl ScenarioConfig {
    pub fn steps(&self) -> usize {
        self.horizon.steps.unwrap_or(MIN_STEPS)
    }

    pub fn dt(&self) -> f64 {
        self.horizon.t_end / self.steps() as f64
    }

    pub fn terminal_time(&self) -> f64 {
        self.horizon.t_end + self.tau0
    }

    /// `(t0, t1)` after defaults.
    pub fn window(&self) -> (f64, f64) {
        let t_end = self.horizon.t_end;
        (
            self.frequency.t0.unwrap_or(0.25 * t_end),
            self.frequency.t1.unwrap_or(t_end),
        )
    }

    pub fn checks(&self) -> Vec<CheckName> {
        self.checks.clone().unwrap_or_else(|| default_checks(&self.frequency))
    }

    pub fn tolerances(&self) -> Result<ResolvedTolerances> {
        self.tolerance.resolved()
    }
}

/// Checks run when a config does not list them.
pub fn default_checks(f: &FrequencySpec) -> Vec<CheckName> {
    use CheckName::*;
    let mut out = match f.normalization {
        Normalization::BakryEmery => vec![FrequencyMonotone, EigenvalueMonotone, BackwardUniquenessBound],
        Normalization::BoundedRicci => vec![
            BoundedRicciFrequencyMonotone,
            BoundedRicciEigenvalueMonotone,
            HamiltonGradient,
            LiYau,
            MaximumPrinciple,
        ],
    };
    if !f.eigenvalue {
        out.retain(|c| !matches!(c, EigenvalueMonotone | BoundedRicciEigenvalueMonotone));
    }
    out.extend([ConjugateMass, DriftSelfAdjoint, IntegralBochner, VolumeEvolution, FEquation]);
    out
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {v}")))
    }
}

/// Parses and normalizes a JSON config.
pub fn parse_config(text: &str, registry: &Registry) -> Result<ScenarioConfig> {
    let raw: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::config(json_path(&e), e.to_string()))?;
    normalize(raw, registry)
}

fn json_path(e: &serde_json::Error) -> String {
    // serde_json does not track paths; report the offending key when it names one.
    let msg = e.to_string();
    msg.split('`').nth(1).map(str::to_string).unwrap_or_else(|| "$".into())
}

/// Validates `cfg` and fills every default.
pub fn normalize(mut cfg: ScenarioConfig, registry: &Registry) -> Result<ScenarioConfig> {
    if cfg.name.is_empty() || !cfg.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(Error::config("name", "use letters, digits, '-' and '_'"));
    }
    let factory = registry.get(&cfg.backend.kind)?;
    cfg.backend.params = factory.normalize(&cfg.backend.params)?;
    let g0 = factory.build(&cfg.backend.params)?;

    match (cfg.flow.kind, cfg.flow.alpha) {
        (FlowKind::Ricci, Some(_)) => return Err(Error::config("flow.alpha", "α only applies to ricci_harmonic")),
        (FlowKind::RicciHarmonic, None) => cfg.flow.alpha = Some(Schedule::constant(1.0)),
        _ => {}
    }
    if let Some(alpha) = cfg.flow.alpha {
        alpha.validate().map_err(|e| Error::config("flow.alpha", e.to_string()))?;
        if alpha.value(0.0) < 0.0 {
            return Err(Error::config("flow.alpha", "α must be non-negative"));
        }
    }

    positive("horizon.t_end", cfg.horizon.t_end)?;
    positive("tau0", cfg.tau0)?;
    cfg.heat.a.validate().map_err(|e| Error::config("heat.a", e.to_string()))?;
    let u0 = g0
        .sample(&cfg.heat.u0)
        .map_err(|e| Error::config("heat.u0", e.to_string()))?;
    match cfg.horizon.steps {
        Some(s) if s < MIN_STEPS => {
            return Err(Error::config("horizon.steps", format!("need at least {MIN_STEPS} steps, got {s}")))
        }
        Some(_) => {}
        None => {
            let limit = g0.stable_step(Some(&u0));
            let steps = if limit.is_finite() {
                (1.25 * cfg.horizon.t_end / limit).ceil() as usize
            } else {
                0
            };
            cfg.horizon.steps = Some(steps.max(MIN_STEPS));
        }
    }

    let t_end = cfg.horizon.t_end;
    let (t0, t1) = cfg.window();
    if !(t0 > 0.0) || !t0.is_finite() {
        return Err(Error::config("frequency.t0", format!("t0 must be positive, got {t0}")));
    }
    if !(t1 > t0) || t1 > t_end * (1.0 + 1e-12) {
        return Err(Error::config(
            "frequency.t1",
            format!("need t0 < t1 <= t_end, got t0 = {t0}, t1 = {t1}, t_end = {t_end}"),
        ));
    }
    let dt = cfg.dt();
    if (t0 / dt).round() < 1.0 {
        return Err(Error::config("frequency.t0", format!("t0 = {t0} rounds to the initial snapshot")));
    }
    cfg.frequency.t0 = Some(t0);
    cfg.frequency.t1 = Some(t1);
    cfg.frequency.h.validate(t0, t1, cfg.terminal_time())?;
    if let Some(k) = cfg.frequency.kappa_override {
        if !k.is_finite() {
            return Err(Error::config("frequency.kappa_override", "must be finite"));
        }
    }
    if let Some(k) = cfg.frequency.k_bound {
        positive("frequency.k_bound", k)?;
    }
    if cfg.frequency.samples < 2 {
        return Err(Error::config("frequency.samples", "need at least two samples"));
    }
    if let Terminal::Bump { amplitude, width } = cfg.terminal {
        if !(width > 0.0) || !(amplitude > -1.0) {
            return Err(Error::config("terminal", "bump needs width > 0 and amplitude > -1"));
        }
    }
    if cfg.checks.is_none() {
        cfg.checks = Some(default_checks(&cfg.frequency));
    }
    cfg.tolerance.validate()?;
    cfg.tolerance.fill(g0.spacing(), dt);
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::registry::global;

    fn parse(text: &str) -> Result<ScenarioConfig> {
        parse_config(text, global())
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse(r#"{"backend": {"kind": "sphere"}, "flow": {"kind": "ricci"}}"#).unwrap();
        assert_eq!(cfg.tau0, 1.0);
        assert_eq!(cfg.backend.params["band_limit"], 32);
        assert_eq!(cfg.steps(), MIN_STEPS);
        assert_eq!(cfg.window(), (0.025, 0.1));
        assert_eq!(cfg.tolerances().unwrap().monotone, 1e-10);
        assert!(cfg.checks().contains(&CheckName::FrequencyMonotone));
    }

    #[test]
    fn grid_defaults() {
        let cfg = parse(r#"{"backend": {"kind": "warped_torus", "params": {"resolution": 32}}, "flow": {"kind": "ricci"}, "horizon": {"t_end": 0.01}}"#).unwrap();
        let dt = cfg.dt();
        assert!(dt <= 0.2 / (32.0 * 32.0));
        let tol = cfg.tolerances().unwrap();
        assert!((tol.monotone - 10.0 * (1.0 / 1024.0 + dt)).abs() < 1e-15);
        assert_eq!(tol.mass, 1e-6);
        let conformal = parse(r#"{"backend": {"kind": "conformal_torus"}, "flow": {"kind": "ricci"}}"#).unwrap();
        assert_eq!(conformal.backend.params["resolution"], 128);
    }

    #[test]
    fn round_trip() {
        let cfg = parse(
            r#"{"name": "rt", "backend": {"kind": "warped_torus", "params": {"resolution": 16}},
                "flow": {"kind": "ricci_harmonic"}, "horizon": {"t_end": 0.01, "steps": 64},
                "frequency": {"h": {"kind": "linear", "c0": -1.0, "c1": 0.5}, "normalization": "bounded_ricci"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.flow.alpha, Some(Schedule::constant(1.0)));
        let again = parse(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejections_name_the_field() {
        let path = |text: &str| match parse(text).unwrap_err() {
            Error::Config { path, .. } => path,
            e => panic!("{e}"),
        };
        let base = |extra: &str| format!(r#"{{"backend": {{"kind": "sphere"}}, "flow": {{"kind": "ricci"}}{extra}}}"#);
        assert_eq!(path(&base(r#", "frequency": {"t0": 0.0}"#)), "frequency.t0");
        assert_eq!(path(&base(r#", "frequency": {"t0": 0.05, "t1": 0.5}"#)), "frequency.t1");
        assert_eq!(path(&base(r#", "horizon": {"steps": 8}"#)), "horizon.steps");
        assert_eq!(path(&base(r#", "frequency": {"h": {"kind": "linear", "c0": -0.05, "c1": 1.0}}"#)), "frequency.h");
        assert_eq!(path(&base(r#", "colour": 1"#)), "colour");
        assert_eq!(path(r#"{"backend": {"kind": "klein"}, "flow": {"kind": "ricci"}}"#), "backend.kind");
        assert_eq!(path(r#"{"backend": {"kind": "sphere", "params": {"r0sq": 1, "radius": 2}}, "flow": {"kind": "ricci"}}"#), "backend.params");
        assert_eq!(path(r#"{"backend": {"kind": "sphere"}, "flow": {"kind": "ricci", "alpha": {"kind": "constant", "a0": 1}}}"#), "flow.alpha");
        assert_eq!(
            path(r#"{"backend": {"kind": "sphere"}, "flow": {"kind": "ricci_harmonic", "alpha": {"kind": "constant", "a0": -1}}}"#),
            "flow.alpha"
        );
        assert_eq!(path(&base(r#", "heat": {"u0": {"kind": "trig", "terms": [{"amplitude": 1, "kx": 1, "trig": "cos"}]}}"#)), "heat.u0");
    }
}
