//! Pointwise gradient estimates for positive heat solutions and the
//! curvature hypotheses behind them.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flows::Trajectory;
use crate::frequency::FrequencyRecord;
use crate::heat::HeatSolution;

/// Colatitude samples for pointwise checks on spectral backends.
pub const DEFAULT_SAMPLES: usize = 256;

/// Outcome of a pointwise or per-snapshot inequality check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlackReport {
    pub id: String,
    /// Smallest slack found; the inequality holds where it is non-negative.
    pub worst: f64,
    /// `(t, sample index)` of the worst slack.
    pub location: Option<(f64, usize)>,
    pub tolerance: f64,
    pub pass: bool,
    pub hypotheses: BTreeMap<String, bool>,
}

impl SlackReport {
    fn new(id: &str, worst: f64, location: Option<(f64, usize)>, tolerance: f64) -> Self {
        SlackReport {
            id: id.to_string(),
            worst,
            location,
            tolerance,
            pass: worst >= -tolerance,
            hypotheses: BTreeMap::new(),
        }
    }
}

/// Smallest slack per snapshot and the overall report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlackSeries {
    pub report: SlackReport,
    /// `None` where the estimate is not evaluated (`t = 0` for Li–Yau).
    pub per_snapshot: Vec<Option<f64>>,
}

fn run_pointwise(
    id: &str,
    traj: &Trajectory,
    heat: &HeatSolution,
    samples: usize,
    tolerance: f64,
    skip_initial: bool,
    slack: impl Fn(f64, f64, f64, f64) -> f64,
) -> Result<SlackSeries> {
    let mut worst = (f64::INFINITY, None);
    let mut per_snapshot = Vec::with_capacity(traj.len());
    for (k, snap) in traj.snapshots.iter().enumerate() {
        if skip_initial && snap.t <= 0.0 {
            per_snapshot.push(None);
            continue;
        }
        let p = snap.geometry.pointwise(&heat.u[k], samples)?;
        let mut local = f64::INFINITY;
        for (j, ((u, g2), lap)) in p.value.iter().zip(&p.grad_sq).zip(&p.laplacian).enumerate() {
            if !(*u > 0.0) {
                return Err(Error::Positivity {
                    t: snap.t,
                    point: j,
                    value: *u,
                });
            }
            let s = slack(snap.t, *u, *g2, *lap);
            if s < local {
                local = s;
            }
            if s < worst.0 {
                worst = (s, Some((snap.t, j)));
            }
        }
        per_snapshot.push(Some(local));
    }
    Ok(SlackSeries {
        report: SlackReport::new(id, worst.0, worst.1, tolerance),
        per_snapshot,
    })
}

/// `u² log(A/u) - t|∇u|²` over every snapshot and sample.
pub fn hamilton_gradient(traj: &Trajectory, heat: &HeatSolution, samples: usize, tolerance: f64) -> Result<SlackSeries> {
    let a_max = heat.initial_max;
    run_pointwise("hamilton_gradient", traj, heat, samples, tolerance, false, |t, u, g2, _| {
        u * u * (a_max / u).ln() - t * g2
    })
}

/// `(c/2t)u + Knu - (|∇u|²/u - ∂t u)` for `t > 0`, with `∂t u = Δu + a u`.
/// `c` is `n` under Ricci flow and the larger harmonic-flow constant otherwise.
pub fn li_yau(
    traj: &Trajectory,
    heat: &HeatSolution,
    k_bound: f64,
    c: f64,
    samples: usize,
    tolerance: f64,
) -> Result<SlackSeries> {
    let n = traj.dimension() as f64;
    let a = heat.a;
    run_pointwise("li_yau", traj, heat, samples, tolerance, true, |t, u, g2, lap| {
        let ut = lap + a.value(t) * u;
        (0.5 * c / t) * u + k_bound * n * u - (g2 / u - ut)
    })
}

/// `max_k max Ric(t_k)` relative to `g(t_k)` over the given snapshots.
pub fn measure_ricci_upper(traj: &Trajectory, range: std::ops::RangeInclusive<usize>) -> Result<f64> {
    let mut hi = f64::NEG_INFINITY;
    for k in range {
        let g = traj.geometry(k);
        hi = hi.max(g.eigen_extremes(&g.ricci()?)?.1);
    }
    Ok(hi)
}

/// `max_k t_k · max |dφ|²` over the given snapshots, zero without a map field.
pub fn measure_map_constant(traj: &Trajectory, range: std::ops::RangeInclusive<usize>) -> Result<f64> {
    let mut c = 0.0f64;
    for k in range {
        let g = traj.geometry(k);
        if let Some(d) = g.map_differential() {
            c = c.max(traj.snapshots[k].t * g.eigen_extremes(&d)?.1);
        }
    }
    Ok(c)
}

/// Hypotheses checked as bands over snapshots.
#[derive(Debug, Clone, PartialEq)]
pub enum Band {
    /// `0 ≤ Ric ≤ K g`.
    Ricci { k_bound: f64 },
    /// `0 ≤ dφ⊗dφ ≤ (C/t) g` for `t > 0`.
    MapDifferential { c: f64 },
    /// `α` non-increasing and positive.
    AlphaMonotone,
    /// `Ric_f ≤ κ/(2h) g`, from the recorded `s` and `κ`.
    RicciFUpper,
}

/// Evaluates a band hypothesis over snapshots `range`; `records` feeds [`Band::RicciFUpper`].
pub fn hypothesis_band(
    traj: &Trajectory,
    records: &[FrequencyRecord],
    band: &Band,
    range: std::ops::RangeInclusive<usize>,
    tolerance: f64,
) -> Result<SlackReport> {
    let mut worst = (f64::INFINITY, None);
    let mut see = |s: f64, t: f64| {
        if s < worst.0 {
            worst = (s, Some((t, 0)));
        }
    };
    let id = match band {
        Band::Ricci { k_bound } => {
            for k in range {
                let g = traj.geometry(k);
                let (lo, hi) = g.eigen_extremes(&g.ricci()?)?;
                see(lo.min(k_bound - hi), traj.snapshots[k].t);
            }
            "ricci_band"
        }
        Band::MapDifferential { c } => {
            for k in range {
                let t = traj.snapshots[k].t;
                if t <= 0.0 {
                    continue;
                }
                if let Some(d) = traj.geometry(k).map_differential() {
                    let (lo, hi) = traj.geometry(k).eigen_extremes(&d)?;
                    see(lo.min(c / t - hi), t);
                } else {
                    see(0.0, t);
                }
            }
            "map_band"
        }
        Band::AlphaMonotone => {
            let times: Vec<f64> = range.map(|k| traj.snapshots[k].t).collect();
            for w in times.windows(2) {
                see(traj.alpha_at(w[0]) - traj.alpha_at(w[1]), w[1]);
            }
            for &t in &times {
                let a = traj.alpha_at(t);
                // strict positivity cannot be softened by the tolerance
                see(if a > 0.0 { 0.0 } else { f64::NEG_INFINITY }, t);
            }
            "alpha_monotone"
        }
        Band::RicciFUpper => {
            for r in records {
                see(r.kappa / (2.0 * r.h) - r.s, r.t);
            }
            "ricci_f_upper"
        }
    };
    let worst = if worst.0.is_infinite() && worst.0 > 0.0 { (0.0, None) } else { worst };
    Ok(SlackReport::new(id, worst.0, worst.1, tolerance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{evolve_ricci, evolve_ricci_harmonic};
    use crate::geometry::{FieldSpec, ManifoldState, ScalarField, SphereSpectral, Trig, TrigTerm, WarpedTorus};
    use crate::heat::solve_heat;
    use crate::schedule::Schedule;
    use std::sync::Arc;

    fn sphere_run() -> (Trajectory, HeatSolution) {
        let init = ManifoldState::new(0.0, Arc::new(SphereSpectral::new(2, 1.0, 8).unwrap()));
        let traj = evolve_ricci(&init, 0.2, 400).unwrap();
        let u0 = ScalarField::spectral([(0, 1.0), (1, 0.1)]).unwrap();
        let heat = solve_heat(&traj, &u0, &Schedule::default(), true).unwrap();
        (traj, heat)
    }

    #[test]
    fn sphere_estimates_hold() {
        let (traj, heat) = sphere_run();
        let h = hamilton_gradient(&traj, &heat, 64, 1e-10).unwrap();
        assert!(h.report.pass, "{:?}", h.report);
        let k = 1.0 / (1.0 - 2.0 * 0.2);
        let l = li_yau(&traj, &heat, k, 2.0, 64, 1e-10).unwrap();
        assert!(l.report.pass, "{:?}", l.report);
        assert!(l.per_snapshot[0].is_none());
        assert!(l.per_snapshot[1].is_some());
    }

    #[test]
    fn ricci_band_on_the_sphere() {
        let (traj, _) = sphere_run();
        let hi = measure_ricci_upper(&traj, 0..=traj.steps()).unwrap();
        assert!((hi - 1.0 / 0.6).abs() < 1e-12, "{hi}");
        let ok = hypothesis_band(&traj, &[], &Band::Ricci { k_bound: hi }, 0..=traj.steps(), 1e-12).unwrap();
        assert!(ok.pass);
        let tight = hypothesis_band(&traj, &[], &Band::Ricci { k_bound: 1.5 }, 0..=traj.steps(), 1e-12).unwrap();
        assert!(!tight.pass);
        assert_eq!(tight.location.unwrap().0, 0.2);
    }

    #[test]
    fn alpha_band() {
        let phi = FieldSpec::trig(
            0.0,
            vec![TrigTerm {
                amplitude: 0.1,
                kx: 1,
                ky: 0,
                trig: Trig::Sin,
            }],
        );
        let one = FieldSpec::constant(1.0);
        let g = WarpedTorus::from_spec(32, &one, &one, &phi).unwrap();
        let init = ManifoldState::new(0.0, Arc::new(g));
        let traj = evolve_ricci_harmonic(&init, &Schedule::constant(1.0), 0.002, 16).unwrap();
        let r = hypothesis_band(&traj, &[], &Band::AlphaMonotone, 0..=16, 0.0).unwrap();
        assert!(r.pass);
        let c = measure_map_constant(&traj, 0..=16).unwrap();
        assert!(c > 0.0);
        let r = hypothesis_band(&traj, &[], &Band::MapDifferential { c }, 0..=16, 1e-12).unwrap();
        assert!(r.pass, "{r:?}");
        let zero = evolve_ricci_harmonic(&init, &Schedule::constant(0.0), 0.002, 16).unwrap();
        assert!(!hypothesis_band(&zero, &[], &Band::AlphaMonotone, 0..=16, 0.0).unwrap().pass);
    }

    #[test]
    fn non_positive_solution_is_rejected() {
        let init = ManifoldState::new(0.0, Arc::new(WarpedTorus::flat(16)));
        let traj = evolve_ricci(&init, 0.001, 16).unwrap();
        let u0 = ScalarField::grid(traj.geometry(0).kind(), (0..16).map(|i| (i as f64 - 4.0) / 10.0).collect());
        let heat = solve_heat(&traj, &u0, &Schedule::default(), false).unwrap();
        assert!(matches!(hamilton_gradient(&traj, &heat, 16, 0.0), Err(Error::Positivity { .. })));
    }
}
