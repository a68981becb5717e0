//! Ricci flow and Ricci-harmonic flow integrators producing stored trajectories.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_values, Backend, ManifoldState, MIN_METRIC};
use crate::schedule::Schedule;

/// Sphere runs stop short of extinction at this fraction of `r0²`.
pub const EXTINCTION_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Ricci,
    RicciHarmonic,
}

/// Snapshots at `t_k = t_end·k/steps`, one per step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: FlowKind,
    pub alpha: Option<Schedule>,
    pub t_end: f64,
    pub dt: f64,
    /// `dt` over the stability bound of the initial geometry.
    pub cfl_ratio: f64,
    pub snapshots: Vec<ManifoldState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn geometry(&self, k: usize) -> &Arc<dyn Backend> {
        &self.snapshots[k].geometry
    }

    pub fn dimension(&self) -> usize {
        self.snapshots[0].dimension()
    }

    /// `α(t_k)`, zero for Ricci flow.
    pub fn alpha_at(&self, t: f64) -> f64 {
        self.alpha.map_or(0.0, |a| a.value(t))
    }

    /// Geometry halfway between snapshots `k` and `k+1`, from averaged flow variables.
    pub fn midpoint(&self, k: usize) -> Result<Arc<dyn Backend>> {
        let a = self.geometry(k).flow_vars();
        let b = self.geometry(k + 1).flow_vars();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        self.geometry(k).with_flow_vars(&mid)
    }

    /// Index of the snapshot nearest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let k = (t / self.dt).round();
        (k.max(0.0) as usize).min(self.steps())
    }
}

fn time_grid(t_end: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Invalid(format!("flow horizon must be positive, got {t_end}")));
    }
    if steps == 0 {
        return Err(Error::Invalid("at least one step is required".into()));
    }
    Ok((0..=steps).map(|k| t_end * k as f64 / steps as f64).collect())
}

pub fn evolve_ricci(initial: &ManifoldState, t_end: f64, steps: usize) -> Result<Trajectory> {
    evolve(initial, None, t_end, steps)
}

pub fn evolve_ricci_harmonic(initial: &ManifoldState, alpha: &Schedule, t_end: f64, steps: usize) -> Result<Trajectory> {
    alpha.validate()?;
    let lo = alpha.min_on(0.0, t_end);
    if lo < 0.0 {
        return Err(Error::Domain(format!("coupling α must be non-negative on the horizon, got {lo}")));
    }
    evolve(initial, Some(*alpha), t_end, steps)
}

fn evolve(initial: &ManifoldState, alpha: Option<Schedule>, t_end: f64, steps: usize) -> Result<Trajectory> {
    let times = time_grid(t_end, steps)?;
    let dt = t_end / steps as f64;
    let g0 = initial.geometry.clone();
    let kind = if alpha.is_some() {
        FlowKind::RicciHarmonic
    } else {
        FlowKind::Ricci
    };
    if alpha.is_some() {
        // Probes support before any stepping.
        g0.flow_rhs(Some(0.0))?;
    }

    if let Some(end) = g0.closed_form_flow(t_end) {
        let r0 = g0.min_metric_coefficient();
        let end = end.map_err(|_| Error::Extinction {
            t: t_end,
            r2: r0 + (g0.flow_rhs(None).map(|v| v[0]).unwrap_or(0.0)) * t_end,
            floor: EXTINCTION_FLOOR * r0,
        })?;
        let r2 = end.min_metric_coefficient();
        if r2 < EXTINCTION_FLOOR * r0 {
            return Err(Error::Extinction {
                t: t_end,
                r2,
                floor: EXTINCTION_FLOOR * r0,
            });
        }
        let snapshots = times
            .iter()
            .map(|&t| {
                let g = if t == 0.0 {
                    Ok(g0.clone())
                } else {
                    g0.closed_form_flow(t).expect("closed form")
                };
                g.map(|g| ManifoldState::new(initial.t + t, g))
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(Trajectory {
            kind,
            alpha,
            t_end,
            dt,
            cfl_ratio: 0.0,
            snapshots,
        });
    }

    let limit = g0.stable_step(None);
    if dt > limit {
        return Err(Error::Cfl {
            dt,
            limit,
            min_steps: (t_end / limit).ceil() as usize,
        });
    }
    let a = |t: f64| alpha.map(|s| s.value(t));
    let mut snapshots = Vec::with_capacity(steps + 1);
    snapshots.push(ManifoldState::new(initial.t, g0.clone()));
    let mut g = g0.clone();
    for k in 0..steps {
        let t = times[k];
        let y = g.flow_vars();
        let fail = |reason: String| Error::Divergence {
            step: k + 1,
            t: times[k + 1],
            reason,
        };
        let stage = |vars: &[f64]| -> Result<Arc<dyn Backend>> {
            check_vars(vars).map_err(fail)?;
            g.with_flow_vars(vars).map_err(|e| fail(e.to_string()))
        };
        let axpy = |s: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
        let k1 = g.flow_rhs(a(t))?;
        let k2 = stage(&axpy(0.5 * dt, &k1))?.flow_rhs(a(t + 0.5 * dt))?;
        let k3 = stage(&axpy(0.5 * dt, &k2))?.flow_rhs(a(t + 0.5 * dt))?;
        let k4 = stage(&axpy(dt, &k3))?.flow_rhs(a(t + dt))?;
        let next: Vec<f64> = (0..y.len())
            .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let g_next = stage(&next)?;
        let m = g_next.min_metric_coefficient();
        if !(m >= MIN_METRIC) {
            return Err(fail(format!("metric coefficient {m:e} fell below {MIN_METRIC:e}")));
        }
        g = g_next;
        snapshots.push(ManifoldState::new(initial.t + times[k + 1], g.clone()));
    }
    Ok(Trajectory {
        kind,
        alpha,
        t_end,
        dt,
        cfl_ratio: dt / limit,
        snapshots,
    })
}

fn check_vars(vars: &[f64]) -> std::result::Result<(), String> {
    match vars.iter().position(|v| !v.is_finite()) {
        Some(p) => Err(format!("non-finite value in flow variable {p}")),
        None => Ok(()),
    }
}

/// Residual of `∂t dμ = (-R + α|∇φ|²) dμ` by central differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeResidual {
    pub max_abs: f64,
    /// `max_abs` over the largest right-hand side magnitude (zero when both vanish).
    pub max_relative: f64,
}

pub fn check_volume_evolution(traj: &Trajectory) -> Result<VolumeResidual> {
    if traj.len() < 3 {
        return Err(Error::Invalid("volume check needs at least three snapshots".into()));
    }
    let mut max_abs = 0.0f64;
    let mut scale = 0.0f64;
    for k in 1..traj.len() - 1 {
        let g = traj.geometry(k);
        let before = traj.geometry(k - 1).volume_elements();
        let after = traj.geometry(k + 1).volume_elements();
        let mu = g.volume_elements();
        let r = sample_values(&g.scalar_curvature()?)?;
        let alpha = traj.alpha_at(traj.snapshots[k].t);
        let energy = match (alpha != 0.0, g.map_energy_density()) {
            (true, Some(e)) => sample_values(&e)?,
            _ => vec![0.0; mu.len()],
        };
        for i in 0..mu.len() {
            let ri = if r.len() == 1 { r[0] } else { r[i] };
            let rhs = (-ri + alpha * energy[i]) * mu[i];
            let lhs = (after[i] - before[i]) / (2.0 * traj.dt);
            max_abs = max_abs.max((lhs - rhs).abs());
            scale = scale.max(rhs.abs());
        }
    }
    let max_relative = if max_abs == 0.0 { 0.0 } else { max_abs / scale.max(f64::MIN_POSITIVE) };
    Ok(VolumeResidual { max_abs, max_relative })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConformalTorus, FieldSpec, SphereSpectral, Trig, TrigTerm, WarpedTorus};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn sin_x(amplitude: f64) -> FieldSpec {
        FieldSpec::trig(
            0.0,
            vec![TrigTerm {
                amplitude,
                kx: 1,
                ky: 0,
                trig: Trig::Sin,
            }],
        )
    }

    fn sphere(r2: f64) -> ManifoldState {
        ManifoldState::new(0.0, Arc::new(SphereSpectral::new(2, r2, 8).unwrap()))
    }

    #[test]
    fn shrinking_sphere_is_exact() {
        let traj = evolve_ricci(&sphere(1.0), 0.25, 10).unwrap();
        let end = traj.geometry(10).min_metric_coefficient();
        assert!((end - 0.5).abs() < 1e-15);
        for s in &traj.snapshots {
            assert!((s.geometry.min_metric_coefficient() - (1.0 - 2.0 * s.t)).abs() <= 1e-14);
        }
        let v = check_volume_evolution(&traj).unwrap();
        assert!(v.max_relative < 1e-12, "{v:?}");
    }

    #[test]
    fn extinction_is_reported() {
        assert!(matches!(
            evolve_ricci(&sphere(1.0), 0.49, 10),
            Err(Error::Extinction { .. })
        ));
    }

    #[test]
    fn flat_torus_is_fixed() {
        let init = ManifoldState::new(0.0, Arc::new(ConformalTorus::flat(8)));
        let traj = evolve_ricci(&init, 0.001, 16).unwrap();
        assert!(traj.geometry(16).flow_vars().iter().all(|v| *v == 0.0));
        assert_eq!(check_volume_evolution(&traj).unwrap().max_abs, 0.0);
    }

    #[test]
    fn cfl_violation_names_required_steps() {
        let init = ManifoldState::new(0.0, Arc::new(ConformalTorus::flat(32)));
        match evolve_ricci(&init, 0.1, 16) {
            Err(Error::Cfl { min_steps, .. }) => assert!(min_steps > 16),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn conformal_mode_decays_at_linear_rate() {
        let n = 32;
        let eps = 0.01;
        let init = ManifoldState::new(0.0, Arc::new(ConformalTorus::from_spec(n, &sin_x(eps)).unwrap()));
        let t_end = 0.005;
        let traj = evolve_ricci(&init, t_end, 64).unwrap();
        let phi = traj.geometry(64).flow_vars();
        let amp = phi[n / 4];
        let lam_h = 4.0 * (n * n) as f64 * (PI / n as f64).sin().powi(2);
        assert_relative_eq!(amp, eps * (-lam_h * t_end).exp(), max_relative = 2e-2);
    }

    #[test]
    fn zero_coupling_reduces_to_ricci_flow() {
        let g = WarpedTorus::from_spec(
            32,
            &FieldSpec::trig(1.0, vec![TrigTerm { amplitude: 0.1, kx: 1, ky: 0, trig: Trig::Cos }]),
            &FieldSpec::constant(1.0),
            &sin_x(0.1),
        )
        .unwrap();
        let init = ManifoldState::new(0.0, Arc::new(g));
        let rf = evolve_ricci(&init, 0.002, 20).unwrap();
        let rhf = evolve_ricci_harmonic(&init, &Schedule::constant(0.0), 0.002, 20).unwrap();
        for (x, y) in rf.snapshots.iter().zip(&rhf.snapshots) {
            let (a, b) = (x.geometry.flow_vars(), y.geometry.flow_vars());
            for i in 0..64 {
                assert!((a[i] - b[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn negative_coupling_is_rejected() {
        let init = ManifoldState::new(0.0, Arc::new(WarpedTorus::flat(8)));
        assert!(matches!(
            evolve_ricci_harmonic(&init, &Schedule::constant(-1.0), 0.001, 16),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rhf_needs_a_map_field() {
        assert!(matches!(
            evolve_ricci_harmonic(&sphere(1.0), &Schedule::constant(1.0), 0.1, 16),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn harmonic_map_amplitude_decays() {
        let n = 32;
        let eps = 0.01;
        let init = ManifoldState::new(
            0.0,
            Arc::new(WarpedTorus::from_spec(n, &FieldSpec::constant(1.0), &FieldSpec::constant(1.0), &sin_x(eps)).unwrap()),
        );
        let t_end = 0.005;
        let traj = evolve_ricci_harmonic(&init, &Schedule::constant(1.0), t_end, 64).unwrap();
        let v = traj.geometry(64).flow_vars();
        let lam_h = 4.0 * (n * n) as f64 * (PI / n as f64).sin().powi(2);
        assert_relative_eq!(v[2 * n + n / 4], eps * (-lam_h * t_end).exp(), max_relative = 1e-3);
        let dev = v[..2 * n].iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
        assert!(dev < 10.0 * eps * eps, "{dev}");
    }
}
