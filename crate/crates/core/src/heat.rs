//! Forward heat equation `∂t u = Δu + a(t) u` along a stored trajectory.

use crate::error::{Error, Result};
use crate::flows::Trajectory;
use crate::geometry::{Backend, ScalarField};
use crate::schedule::Schedule;

/// Colatitude samples used to read extrema of zonal data.
pub const ZONAL_EXTREMA_SAMPLES: usize = 2049;
/// Colatitude samples used for the per-step positivity check on the sphere.
pub const ZONAL_POSITIVITY_SAMPLES: usize = 257;

#[derive(Debug, Clone)]
pub struct HeatSolution {
    pub u: Vec<ScalarField>,
    pub a: Schedule,
    /// `A = max u(0)`.
    pub initial_max: f64,
    /// `η = min u(0)`.
    pub initial_min: f64,
    pub positivity: bool,
}

impl HeatSolution {
    /// `log(A/η)`, defined for positive data.
    pub fn log_ratio(&self) -> Result<f64> {
        if !(self.initial_min > 0.0) {
            return Err(Error::Hypothesis(format!(
                "initial data is not positive (min {})",
                self.initial_min
            )));
        }
        Ok((self.initial_max / self.initial_min).ln())
    }
}

fn extrema(g: &dyn Backend, u: &ScalarField, samples: usize) -> Result<(f64, f64, usize)> {
    let v = match u.values() {
        Some(v) => v.to_vec(),
        None => g.pointwise(u, samples)?.value,
    };
    let mut lo = (f64::INFINITY, 0);
    let mut hi = f64::NEG_INFINITY;
    for (i, x) in v.iter().enumerate() {
        if *x < lo.0 {
            lo = (*x, i);
        }
        hi = hi.max(*x);
    }
    Ok((lo.0, hi, lo.1))
}

/// `Δu + a u`, the time derivative prescribed by the equation.
pub fn time_derivative(g: &dyn Backend, u: &ScalarField, a: f64) -> Result<ScalarField> {
    g.laplacian(u)?.add_scaled(a, u)
}

pub fn solve_heat(traj: &Trajectory, u0: &ScalarField, a: &Schedule, positivity: bool) -> Result<HeatSolution> {
    a.validate()?;
    let g0 = traj.geometry(0);
    g0.check_field(u0)?;
    let (initial_min, initial_max, p) = extrema(g0.as_ref(), u0, ZONAL_EXTREMA_SAMPLES)?;
    if positivity && !(initial_min > 0.0) {
        return Err(Error::Positivity {
            t: traj.snapshots[0].t,
            point: p,
            value: initial_min,
        });
    }
    let dt = traj.dt;
    let mut u = u0.clone();
    let mut out = Vec::with_capacity(traj.len());
    out.push(u.clone());
    for k in 0..traj.steps() {
        let (g0, g1) = (traj.geometry(k), traj.geometry(k + 1));
        let limit = g0.stable_step(Some(&u)).min(g1.stable_step(Some(&u)));
        if dt > limit {
            return Err(Error::Cfl {
                dt,
                limit,
                min_steps: (traj.t_end / limit).ceil() as usize,
            });
        }
        let gm = traj.midpoint(k)?;
        let t0 = traj.snapshots[k].t;
        let (tm, t1) = (t0 + 0.5 * dt, traj.snapshots[k + 1].t);
        let k1 = time_derivative(g0.as_ref(), &u, a.value(t0))?;
        let k2 = time_derivative(gm.as_ref(), &u.add_scaled(0.5 * dt, &k1)?, a.value(tm))?;
        let k3 = time_derivative(gm.as_ref(), &u.add_scaled(0.5 * dt, &k2)?, a.value(tm))?;
        let k4 = time_derivative(g1.as_ref(), &u.add_scaled(dt, &k3)?, a.value(t1))?;
        u = u
            .add_scaled(dt / 6.0, &k1)?
            .add_scaled(dt / 3.0, &k2)?
            .add_scaled(dt / 3.0, &k3)?
            .add_scaled(dt / 6.0, &k4)?;
        if !u.is_finite() {
            return Err(Error::Divergence {
                step: k + 1,
                t: t1,
                reason: "non-finite heat solution".into(),
            });
        }
        if positivity {
            let (lo, _, p) = extrema(g1.as_ref(), &u, ZONAL_POSITIVITY_SAMPLES)?;
            if !(lo > 0.0) {
                return Err(Error::Positivity { t: t1, point: p, value: lo });
            }
        }
        out.push(u.clone());
    }
    Ok(HeatSolution {
        u: out,
        a: *a,
        initial_max,
        initial_min,
        positivity,
    })
}

/// Largest value of `u(t_k)` per snapshot.
pub fn sup_series(traj: &Trajectory, heat: &HeatSolution) -> Result<Vec<f64>> {
    traj.snapshots
        .iter()
        .zip(&heat.u)
        .map(|(s, u)| extrema(s.geometry.as_ref(), u, ZONAL_EXTREMA_SAMPLES).map(|e| e.1))
        .collect()
}

/// Exact zonal coefficients at time `t` on the shrinking sphere:
/// `c_l(t) = c_l(0) e^{∫a} (r²(t)/r0²)^{l(l+n-1)/(2(n-1))}`.
pub fn closed_form_sphere_solution(
    n: usize,
    r0sq: f64,
    modes: &[(usize, f64)],
    a: &Schedule,
    t: f64,
) -> Result<Vec<(usize, f64)>> {
    if n < 2 || !(r0sq > 0.0) {
        return Err(Error::Domain(format!("need n >= 2 and r0² > 0, got n = {n}, r0² = {r0sq}")));
    }
    let nf = n as f64;
    let r2 = r0sq - 2.0 * (nf - 1.0) * t;
    if !(r2 > 0.0) {
        return Err(Error::Extinction { t, r2, floor: 0.0 });
    }
    let growth = a.integral(0.0, t).exp();
    Ok(modes
        .iter()
        .map(|&(l, c)| {
            let lf = l as f64;
            let p = lf * (lf + nf - 1.0) / (2.0 * (nf - 1.0));
            (l, c * growth * (r2 / r0sq).powf(p))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::evolve_ricci;
    use crate::geometry::{FieldSpec, ManifoldState, SphereSpectral, Trig, TrigTerm, WarpedTorus};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn cos_x(constant: f64) -> FieldSpec {
        FieldSpec::trig(
            constant,
            vec![TrigTerm {
                amplitude: 1.0,
                kx: 1,
                ky: 0,
                trig: Trig::Cos,
            }],
        )
    }

    #[test]
    fn closed_form_factors() {
        let s = Schedule::default();
        assert_eq!(closed_form_sphere_solution(2, 1.0, &[(0, 3.0)], &s, 0.2).unwrap()[0].1, 3.0);
        let c = closed_form_sphere_solution(2, 1.0, &[(1, 1.0)], &s, 0.25).unwrap()[0].1;
        assert_relative_eq!(c, 0.5, max_relative = 1e-15);
        let c = closed_form_sphere_solution(3, 1.0, &[(1, 1.0)], &s, 0.1).unwrap()[0].1;
        assert_relative_eq!(c, 0.6f64.powf(0.75), max_relative = 1e-15);
        assert_relative_eq!(c, 0.6817, max_relative = 1e-4);
        assert!(closed_form_sphere_solution(2, 1.0, &[(1, 1.0)], &s, 0.5).is_err());
    }

    #[test]
    fn sphere_heat_matches_closed_form() {
        let init = ManifoldState::new(0.0, Arc::new(SphereSpectral::new(2, 1.0, 8).unwrap()));
        let traj = evolve_ricci(&init, 0.25, 500).unwrap();
        let u0 = ScalarField::spectral([(0, 1.0), (1, 0.1)]).unwrap();
        let a = Schedule::constant(0.3);
        let heat = solve_heat(&traj, &u0, &a, true).unwrap();
        let exact = closed_form_sphere_solution(2, 1.0, &[(0, 1.0), (1, 0.1)], &a, 0.25).unwrap();
        assert_relative_eq!(heat.u[500].coeff(1), exact[1].1, max_relative = 1e-11);
        assert_relative_eq!(heat.u[500].coeff(0), exact[0].1, max_relative = 1e-11);
        assert_relative_eq!(heat.initial_max, 1.1, max_relative = 1e-14);
        assert_relative_eq!(heat.initial_min, 0.9, max_relative = 1e-14);
    }

    #[test]
    fn flat_mode_decay() {
        let n = 64;
        let init = ManifoldState::new(0.0, Arc::new(WarpedTorus::flat(n)));
        let traj = evolve_ricci(&init, 0.01, 400).unwrap();
        let u0 = traj.geometry(0).sample(&cos_x(2.0)).unwrap();
        let heat = solve_heat(&traj, &u0, &Schedule::default(), true).unwrap();
        let lam_h = 4.0 * (n * n) as f64 * (PI / n as f64).sin().powi(2);
        let v = heat.u[400].values().unwrap();
        assert_relative_eq!(v[0], 2.0 + (-lam_h * 0.01f64).exp(), max_relative = 1e-12);
        let sups = sup_series(&traj, &heat).unwrap();
        assert!(sups.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-10)));
    }

    #[test]
    fn constant_rate_is_an_integrating_factor() {
        let init = ManifoldState::new(0.0, Arc::new(WarpedTorus::flat(32)));
        let traj = evolve_ricci(&init, 0.005, 100).unwrap();
        let u0 = traj.geometry(0).sample(&cos_x(2.0)).unwrap();
        let plain = solve_heat(&traj, &u0, &Schedule::default(), false).unwrap();
        let grown = solve_heat(&traj, &u0, &Schedule::constant(2.0), false).unwrap();
        let (p, g) = (plain.u[100].values().unwrap(), grown.u[100].values().unwrap());
        for i in 0..32 {
            assert_relative_eq!(g[i], p[i] * (2.0f64 * 0.005).exp(), max_relative = 1e-10);
        }
    }

    #[test]
    fn positivity_loss_is_reported() {
        let init = ManifoldState::new(0.0, Arc::new(WarpedTorus::flat(16)));
        let traj = evolve_ricci(&init, 0.001, 16).unwrap();
        let u0 = traj.geometry(0).sample(&cos_x(0.5)).unwrap();
        assert!(matches!(
            solve_heat(&traj, &u0, &Schedule::default(), true),
            Err(Error::Positivity { .. })
        ));
    }
}
