//! Weighted frequency `U = D/I` along a flow, its normalized forms and the
//! backward-uniqueness ratio bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Backend, ScalarField, Weights};
use crate::quadrature::cumulative;
use crate::schedule::Schedule;

/// The weight `h(t)` multiplying the Dirichlet energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HSchedule {
    Constant { c: f64 },
    /// `h = -(T - t)`, minus the backwards time.
    NegativeBackwardsTime,
    /// `h = c0 + c1·t`.
    Linear { c0: f64, c1: f64 },
}

impl Default for HSchedule {
    fn default() -> Self {
        HSchedule::Constant { c: -1.0 }
    }
}

impl HSchedule {
    pub fn value(&self, t: f64, terminal_time: f64) -> f64 {
        match *self {
            HSchedule::Constant { c } => c,
            HSchedule::NegativeBackwardsTime => t - terminal_time,
            HSchedule::Linear { c0, c1 } => c0 + c1 * t,
        }
    }

    pub fn derivative(&self, _t: f64) -> f64 {
        match *self {
            HSchedule::Constant { .. } => 0.0,
            HSchedule::NegativeBackwardsTime => 1.0,
            HSchedule::Linear { c1, .. } => c1,
        }
    }

    /// Checks that `h` is finite and has one strict sign on `[t0, t1]`; returns that sign.
    pub fn validate(&self, t0: f64, t1: f64, terminal_time: f64) -> Result<f64> {
        // h is affine, so the endpoints decide.
        let (a, b) = (self.value(t0, terminal_time), self.value(t1, terminal_time));
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::config("frequency.h", "h must be finite"));
        }
        if a > 0.0 && b > 0.0 {
            Ok(1.0)
        } else if a < 0.0 && b < 0.0 {
            Ok(-1.0)
        } else {
            Err(Error::config(
                "frequency.h",
                format!("h must keep a strict sign on [{t0}, {t1}], got {a} and {b} at the ends"),
            ))
        }
    }
}

/// Per-snapshot frequency data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyRecord {
    pub t: f64,
    pub h: f64,
    /// `I = ∫ u² dV`.
    pub i: f64,
    /// `D = h ∫ |∇u|² dV`.
    pub d: f64,
    /// Sup of the largest eigenvalue of `Ric + ∇²f - α dφ⊗dφ`.
    pub s: f64,
    pub kappa: f64,
    pub lambda1: Option<f64>,
    /// `∫_{t0}^t (h' + κ)/h`.
    pub exp3: f64,
    /// `e^{-exp3} D/I`.
    pub u3: f64,
    pub exp4: Option<f64>,
    pub u4: Option<f64>,
}

impl FrequencyRecord {
    pub fn raw(&self) -> f64 {
        self.d / self.i
    }
}

/// `(I, D)` for `u` against `dV = K dμ`.
pub fn compute_i_d(g: &dyn Backend, k: &ScalarField, dv: &Weights, u: &ScalarField, h: f64) -> Result<(f64, f64)> {
    let i = g.inner(u, u, dv)?;
    if !(i > 0.0) {
        return Err(Error::Domain(format!("weighted mass of u² must be positive, got {i}")));
    }
    Ok((i, h * g.dirichlet_form(k, u, u)?))
}

/// The admissible choice `κ = 2hs`, so that `Ric_f ≤ κ/(2h)` holds with equality at the sup.
pub fn choose_kappa(s: f64, h: f64) -> Result<f64> {
    if !s.is_finite() || !h.is_finite() || h == 0.0 {
        return Err(Error::Domain(format!("κ needs finite s and nonzero h, got s = {s}, h = {h}")));
    }
    Ok(2.0 * h * s)
}

fn uniform_step(records: &[FrequencyRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Invalid("no frequency records".into()));
    }
    if records.len() == 1 {
        return Ok(0.0);
    }
    let dt = records[1].t - records[0].t;
    let uniform = records
        .windows(2)
        .all(|w| ((w[1].t - w[0].t) - dt).abs() <= 1e-9 * dt.abs().max(1e-300));
    if !(dt > 0.0) || !uniform {
        return Err(Error::Invalid("frequency records must sit on a uniform increasing grid".into()));
    }
    Ok(dt)
}

/// Fills `exp3` and `u3`; `records[0]` is the base time `t0`.
pub fn bakry_emery_frequency(records: &mut [FrequencyRecord], h: &HSchedule) -> Result<()> {
    let dt = uniform_step(records)?;
    let integrand: Vec<f64> = records
        .iter()
        .map(|r| (h.derivative(r.t) + r.kappa) / r.h)
        .collect();
    for (r, e) in records.iter_mut().zip(cumulative(&integrand, dt)) {
        r.exp3 = e;
        r.u3 = (-e).exp() * r.raw();
    }
    Ok(())
}

/// Constants of the bounded-curvature normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundedRicciConstants {
    /// Upper Ricci bound `K`.
    pub k_bound: f64,
    pub dimension: usize,
    /// `log(A/η)` of the positive heat solution.
    pub log_ratio: f64,
    /// Coefficient of `1/t` in the Li–Yau bound: `n` for Ricci flow.
    pub c_n: f64,
}

/// Fills `exp4` and `u4` with
/// `exp4 = log(h/h0) + 2Kn(t - t0) + (n·log(A/η)/2 + c_n) log(t/t0)`.
pub fn bounded_ricci_frequency(records: &mut [FrequencyRecord], c: &BoundedRicciConstants) -> Result<()> {
    uniform_step(records)?;
    let t0 = records[0].t;
    if !(t0 > 0.0) {
        return Err(Error::Domain(format!("the base time must be positive, got {t0}")));
    }
    if !(c.log_ratio >= 0.0) || !c.k_bound.is_finite() || !c.c_n.is_finite() {
        return Err(Error::Domain("bounded-curvature constants must be finite with log(A/η) >= 0".into()));
    }
    let n = c.dimension as f64;
    let h0 = records[0].h;
    let slope = 0.5 * n * c.log_ratio + c.c_n;
    for r in records.iter_mut() {
        let e = (r.h / h0).ln() + 2.0 * c.k_bound * n * (r.t - t0) + slope * (r.t / t0).ln();
        r.exp4 = Some(e);
        r.u4 = Some((-e).exp() * r.raw());
    }
    Ok(())
}

/// `e^{-exp}·h·λ1` per record, using `exp3` or `exp4`.
pub fn normalized_eigenvalues(records: &[FrequencyRecord], bounded_ricci: bool) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| {
            let lam = r.lambda1.ok_or_else(|| Error::Invalid(format!("no eigenvalue at t = {}", r.t)))?;
            let e = if bounded_ricci {
                r.exp4.ok_or_else(|| Error::Invalid("bounded-curvature normalization missing".into()))?
            } else {
                r.exp3
            };
            Ok((-e).exp() * r.h * lam)
        })
        .collect()
}

/// One instance of the ratio bound between `I(t1)` and `I(t')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioBound {
    pub t_prime: f64,
    /// `exp(-2U(t0) ∫_{t'}^{t1} e^{exp3}/h dt + 2∫_{t'}^{t1} a)`.
    pub bound: f64,
    /// `I(t1)/I(t')`.
    pub actual: f64,
}

/// The ratio bound for every `t'` in the record range before `t1`.
pub fn ratio_lower_bounds(records: &[FrequencyRecord], a: &Schedule) -> Result<Vec<RatioBound>> {
    let dt = uniform_step(records)?;
    let integrand: Vec<f64> = records.iter().map(|r| r.exp3.exp() / r.h).collect();
    let g = cumulative(&integrand, dt);
    let last = records.len() - 1;
    let (u0, t1, i1) = (records[0].u3, records[last].t, records[last].i);
    Ok(records[..last]
        .iter()
        .enumerate()
        .map(|(k, r)| RatioBound {
            t_prime: r.t,
            bound: (-2.0 * u0 * (g[last] - g[k]) + 2.0 * a.integral(r.t, t1)).exp(),
            actual: i1 / r.i,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{SphereSpectral, WarpedTorus};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn record(t: f64, h: f64, i: f64, d: f64, kappa: f64) -> FrequencyRecord {
        FrequencyRecord {
            t,
            h,
            i,
            d,
            s: 0.0,
            kappa,
            lambda1: None,
            exp3: 0.0,
            u3: 0.0,
            exp4: None,
            u4: None,
        }
    }

    #[test]
    fn h_sign_validation() {
        assert_eq!(HSchedule::Constant { c: -2.0 }.validate(0.1, 0.5, 2.0).unwrap(), -1.0);
        assert_eq!(HSchedule::NegativeBackwardsTime.validate(0.1, 0.5, 1.5).unwrap(), -1.0);
        assert_eq!(HSchedule::Linear { c0: 1.0, c1: 1.0 }.validate(0.0, 1.0, 2.0).unwrap(), 1.0);
        let err = HSchedule::Linear { c0: -0.2, c1: 1.0 }.validate(0.1, 0.5, 2.0).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "frequency.h"));
        assert!(HSchedule::Constant { c: 0.0 }.validate(0.1, 0.5, 2.0).is_err());
    }

    #[test]
    fn kappa_choice() {
        assert_eq!(choose_kappa(0.5, -1.0).unwrap(), -1.0);
        assert!(choose_kappa(0.5, 0.0).is_err());
        assert!(choose_kappa(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn constant_kappa_normalization_is_exponential() {
        // (h' + κ)/h = 3 for h = -1, κ = -3.
        let mut recs: Vec<_> = (0..=40).map(|k| record(0.1 + 0.01 * k as f64, -1.0, 1.0, -2.0, -3.0)).collect();
        bakry_emery_frequency(&mut recs, &HSchedule::Constant { c: -1.0 }).unwrap();
        for r in &recs {
            assert_relative_eq!(r.exp3, 3.0 * (r.t - 0.1), epsilon = 1e-14);
            assert_relative_eq!(r.u3, -2.0 * (-3.0 * (r.t - 0.1)).exp(), max_relative = 1e-13);
        }
    }

    #[test]
    fn bounded_ricci_exponent() {
        let mut recs: Vec<_> = (0..=10).map(|k| record(0.1 + 0.02 * k as f64, -1.0, 1.0, -1.0, 0.0)).collect();
        let c = BoundedRicciConstants {
            k_bound: 0.5,
            dimension: 2,
            log_ratio: 0.2,
            c_n: 2.0,
        };
        bounded_ricci_frequency(&mut recs, &c).unwrap();
        let r = &recs[10];
        let expect = 2.0 * 0.5 * 2.0 * 0.2 + (0.2 + 2.0) * (0.3f64 / 0.1).ln();
        assert_relative_eq!(r.exp4.unwrap(), expect, max_relative = 1e-14);
        let mut bad = recs.clone();
        bad[0].t = 0.0;
        assert!(bounded_ricci_frequency(&mut bad, &c).is_err());
    }

    #[test]
    fn ratio_bound_is_tight_for_a_single_mode() {
        // u = e^{-λt} with static D/I = -λ (h = -1), κ = 0: I(t) = e^{-2λt}.
        let lam = 2.5;
        let mut recs: Vec<_> = (0..=50)
            .map(|k| {
                let t = 0.1 + 0.004 * k as f64;
                record(t, -1.0, (-2.0 * lam * t).exp(), -lam * (-2.0 * lam * t).exp(), 0.0)
            })
            .collect();
        bakry_emery_frequency(&mut recs, &HSchedule::Constant { c: -1.0 }).unwrap();
        for b in ratio_lower_bounds(&recs, &Schedule::default()).unwrap() {
            assert_relative_eq!(b.bound, b.actual, max_relative = 1e-12);
        }
    }

    #[test]
    fn records_need_a_uniform_grid() {
        let mut recs = vec![record(0.1, -1.0, 1.0, -1.0, 0.0), record(0.2, -1.0, 1.0, -1.0, 0.0), record(0.35, -1.0, 1.0, -1.0, 0.0)];
        assert!(bakry_emery_frequency(&mut recs, &HSchedule::default()).is_err());
        assert!(bakry_emery_frequency(&mut [], &HSchedule::default()).is_err());
    }

    #[test]
    fn sphere_mode_frequency() {
        let g = SphereSpectral::new(2, 1.0, 8).unwrap();
        let k = g.constant_field(1.0 / g.volume());
        let dv = g.measure(&k).unwrap();
        let u = ScalarField::spectral([(2, 1.0)]).unwrap();
        let (i, d) = compute_i_d(&g, &k, &dv, &u, -1.0).unwrap();
        assert_relative_eq!(d / i, -6.0, max_relative = 1e-13);
    }

    proptest! {
        // Cauchy–Schwarz: D² ≤ h² I ∫|Δ_f u|² dV.
        #[test]
        fn cauchy_schwarz(c in proptest::collection::vec(-1.0f64..1.0, 4), h in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0]) {
            let g = WarpedTorus::flat(32);
            let vals: Vec<f64> = (0..32).map(|i| {
                let x = i as f64 / 32.0 * std::f64::consts::TAU;
                c[0] + c[1] * x.cos() + c[2] * (2.0 * x).sin() + c[3] * (3.0 * x).cos()
            }).collect();
            let u = ScalarField::grid(g.kind(), vals);
            let k = g.constant_field(1.0);
            let dv = g.measure(&k).unwrap();
            prop_assume!(g.inner(&u, &u, &dv).unwrap() > 1e-6);
            let (i, d) = compute_i_d(&g, &k, &dv, &u, h).unwrap();
            let lu = g.drift_laplacian(&k, &u).unwrap();
            let e = g.inner(&lu, &lu, &dv).unwrap();
            prop_assert!(d * d <= h * h * i * e * (1.0 + 1e-10) + 1e-14);
        }
    }
}
