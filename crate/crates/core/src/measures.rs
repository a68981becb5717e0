//! Conjugate heat kernel, potential and weighted measure along a trajectory.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::Trajectory;
use crate::geometry::{sample_values, Backend, BackendKind, ScalarField, SymTensorField, Weights};

/// Default backwards-time offset `T - t_end`.
pub const DEFAULT_TAU0: f64 = 1.0;

/// Terminal data for the conjugate heat kernel before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Terminal {
    #[default]
    Uniform,
    /// `1 + amplitude · G` with `G` a periodized Gaussian centred at the middle of the square.
    Bump { amplitude: f64, width: f64 },
}

#[derive(Debug, Clone)]
pub struct WeightSystem {
    pub tau0: f64,
    /// Terminal time `T = t_end + τ0`.
    pub terminal_time: f64,
    pub tau: Vec<f64>,
    pub k: Vec<ScalarField>,
    pub f: Vec<ScalarField>,
    pub dv: Vec<Weights>,
    /// `∫ K dμ` per snapshot.
    pub mass: Vec<f64>,
}

impl WeightSystem {
    pub fn max_mass_drift(&self) -> f64 {
        self.mass.iter().fold(0.0, |m, v| m.max((v - 1.0).abs()))
    }
}

fn periodized_gaussian(x: f64, width: f64) -> f64 {
    (-1..=1)
        .map(|m| {
            let d = x - 0.5 + m as f64;
            (-d * d / (2.0 * width * width)).exp()
        })
        .sum()
}

/// Terminal density on `g`, normalized to unit mass.
pub fn terminal_density(g: &dyn Backend, terminal: &Terminal) -> Result<ScalarField> {
    let raw = match *terminal {
        Terminal::Uniform => g.constant_field(1.0),
        Terminal::Bump { amplitude, width } => {
            if !(width > 0.0) || !(amplitude > -1.0) {
                return Err(Error::Domain(format!(
                    "bump needs width > 0 and amplitude > -1, got width {width}, amplitude {amplitude}"
                )));
            }
            let n = g.resolution();
            let values = match g.kind() {
                BackendKind::Sphere => {
                    return Err(Error::Unsupported(
                        "the sphere backend carries uniform conjugate densities only".into(),
                    ))
                }
                BackendKind::ConformalTorus => (0..n * n)
                    .map(|p| {
                        let (x, y) = ((p % n) as f64 / n as f64, (p / n) as f64 / n as f64);
                        1.0 + amplitude * periodized_gaussian(x, width) * periodized_gaussian(y, width)
                    })
                    .collect(),
                BackendKind::WarpedTorus => (0..n)
                    .map(|i| 1.0 + amplitude * periodized_gaussian(i as f64 / n as f64, width))
                    .collect(),
            };
            ScalarField::grid(g.kind(), values)
        }
    };
    let mass = g.integrate(&raw, &g.volume_weights())?;
    Ok(raw.scaled(1.0 / mass))
}

/// `ΔK - R K + α |∇φ|² K`, the backward-time derivative of `K`.
fn conjugate_rhs(g: &dyn Backend, k: &ScalarField, alpha: f64) -> Result<ScalarField> {
    let lap = g.laplacian(k)?;
    let rk = g.scalar_curvature()?.mul(k)?;
    let mut out = lap.add_scaled(-1.0, &rk)?;
    if alpha != 0.0 {
        if let Some(e) = g.map_energy_density() {
            out = out.add_scaled(alpha, &e.mul(k)?)?;
        }
    }
    Ok(out)
}

fn min_sample(k: &ScalarField) -> Result<(usize, f64)> {
    let v = sample_values(k)?;
    Ok(v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |m, (i, x)| if x < m.1 { (i, x) } else { m }))
}

/// Integrates the conjugate heat equation from the last snapshot back to the first.
pub fn solve_conjugate_backward(traj: &Trajectory, terminal: &ScalarField, tau0: f64) -> Result<WeightSystem> {
    if !(tau0 > 0.0) {
        return Err(Error::Domain(format!("τ0 must be positive, got {tau0}")));
    }
    let last = traj.steps();
    let g_end = traj.geometry(last);
    g_end.check_field(terminal)?;
    let (p, lo) = min_sample(terminal)?;
    if !(lo > 0.0) {
        return Err(Error::Positivity {
            t: traj.snapshots[last].t,
            point: p,
            value: lo,
        });
    }
    let mass_end = g_end.integrate(terminal, &g_end.volume_weights())?;
    let mut k = terminal.scaled(1.0 / mass_end);
    let dt = traj.dt;

    let mut ks = vec![k.clone(); traj.len()];
    for step in (0..last).rev() {
        let (g1, g0) = (traj.geometry(step + 1), traj.geometry(step));
        let limit = g1.stable_step(Some(&k)).min(g0.stable_step(Some(&k)));
        if dt > limit {
            return Err(Error::Cfl {
                dt,
                limit,
                min_steps: (traj.t_end / limit).ceil() as usize,
            });
        }
        let gm = traj.midpoint(step)?;
        let (t1, t0) = (traj.snapshots[step + 1].t, traj.snapshots[step].t);
        let tm = 0.5 * (t0 + t1);
        let a = |t: f64| traj.alpha_at(t);
        let k1 = conjugate_rhs(g1.as_ref(), &k, a(t1))?;
        let k2 = conjugate_rhs(gm.as_ref(), &k.add_scaled(0.5 * dt, &k1)?, a(tm))?;
        let k3 = conjugate_rhs(gm.as_ref(), &k.add_scaled(0.5 * dt, &k2)?, a(tm))?;
        let k4 = conjugate_rhs(g0.as_ref(), &k.add_scaled(dt, &k3)?, a(t0))?;
        k = k
            .add_scaled(dt / 6.0, &k1)?
            .add_scaled(dt / 3.0, &k2)?
            .add_scaled(dt / 3.0, &k3)?
            .add_scaled(dt / 6.0, &k4)?;
        let (p, lo) = min_sample(&k)?;
        if !(lo > 0.0) || !k.is_finite() {
            return Err(Error::Positivity {
                t: t0,
                point: p,
                value: lo,
            });
        }
        ks[step] = k.clone();
    }

    let n = traj.dimension() as f64;
    let terminal_time = traj.snapshots[last].t + tau0;
    let mut out = WeightSystem {
        tau0,
        terminal_time,
        tau: Vec::with_capacity(traj.len()),
        k: Vec::with_capacity(traj.len()),
        f: Vec::with_capacity(traj.len()),
        dv: Vec::with_capacity(traj.len()),
        mass: Vec::with_capacity(traj.len()),
    };
    for (snap, k) in traj.snapshots.iter().zip(ks) {
        let tau = terminal_time - snap.t;
        let g = &snap.geometry;
        let shift = 0.5 * n * (4.0 * PI * tau).ln();
        out.f.push(k.map(|v| -v.ln() - shift)?);
        out.mass.push(g.integrate(&k, &g.volume_weights())?);
        out.dv.push(g.measure(&k)?);
        out.tau.push(tau);
        out.k.push(k);
    }
    Ok(out)
}

/// `∂t f - (-Δf - R + |∇f|² + n/2τ + α|∇φ|²)` by central differences in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialResidual {
    pub max_abs: f64,
    /// `max_abs` over the largest magnitude of `∂t f`.
    pub max_relative: f64,
}

pub fn f_equation_residual(traj: &Trajectory, ws: &WeightSystem) -> Result<PotentialResidual> {
    if traj.len() < 3 {
        return Err(Error::Invalid("the potential residual needs at least three snapshots".into()));
    }
    let n = traj.dimension() as f64;
    let mut max_abs = 0.0f64;
    let mut scale = 0.0f64;
    for k in 1..traj.len() - 1 {
        let g = traj.geometry(k);
        let f = &ws.f[k];
        let dfdt = ws.f[k + 1].add_scaled(-1.0, &ws.f[k - 1])?.scaled(0.5 / traj.dt);
        let mut rhs = g
            .laplacian(f)?
            .scaled(-1.0)
            .add_scaled(-1.0, &g.scalar_curvature()?)?
            .add_scaled(1.0, &g.gradient_norm_sq(f)?)?
            .add_scaled(1.0, &g.constant_field(0.5 * n / ws.tau[k]))?;
        let alpha = traj.alpha_at(traj.snapshots[k].t);
        if alpha != 0.0 {
            if let Some(e) = g.map_energy_density() {
                rhs = rhs.add_scaled(alpha, &e)?;
            }
        }
        max_abs = max_abs.max(dfdt.max_abs_diff(&rhs)?);
        scale = scale.max(dfdt.max_abs_diff(&g.constant_field(0.0))?);
    }
    let max_relative = if max_abs == 0.0 { 0.0 } else { max_abs / scale.max(f64::MIN_POSITIVE) };
    Ok(PotentialResidual { max_abs, max_relative })
}

/// `Δ_f u = Δu - <∇f, ∇u>` in weighted divergence form.
pub fn drift_laplacian(g: &dyn Backend, f: &ScalarField, u: &ScalarField) -> Result<ScalarField> {
    g.drift_laplacian(&f.map(|v| (-v).exp())?, u)
}

/// `Ric + ∇²f - α dφ⊗dφ` and the supremum `s` of its largest eigenvalue relative to `g`.
pub fn bakry_emery_bound(
    g: &dyn Backend,
    f: &ScalarField,
    alpha: f64,
    dphi: Option<&SymTensorField>,
) -> Result<(SymTensorField, f64)> {
    g.check_resolved(f)?;
    let mut t = g.ricci()?.add_scaled(1.0, &g.hessian(f)?)?;
    if let Some(d) = dphi {
        if alpha != 0.0 {
            t = t.add_scaled(-alpha, d)?;
        }
    }
    let (_, s) = g.eigen_extremes(&t)?;
    Ok((t, s))
}

/// Both sides of the integrated weighted Bochner identity
/// `∫|∇²u|² dV = ∫(|Δ_f u|² - Ric_f(∇u,∇u)) dV`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BochnerDefect {
    pub hessian: f64,
    pub curvature_side: f64,
    pub relative: f64,
}

pub fn integral_bochner(g: &dyn Backend, k: &ScalarField, f: &ScalarField, u: &ScalarField) -> Result<BochnerDefect> {
    let dv = g.measure(k)?;
    let hessian = g.hessian_energy(u, &dv)?;
    let lf = g.drift_laplacian(k, u)?;
    let ricf = g.ricci()?.add_scaled(1.0, &g.hessian(f)?)?;
    let curvature_side = g.inner(&lf, &lf, &dv)? - g.tensor_energy(&ricf, u, &dv)?;
    let relative = (hessian - curvature_side).abs() / hessian.abs().max(f64::MIN_POSITIVE);
    Ok(BochnerDefect {
        hessian,
        curvature_side,
        relative,
    })
}

/// Largest relative self-adjointness defect of `Δ_f` in `dV` over pairs of fields.
pub fn self_adjoint_defect(g: &dyn Backend, k: &ScalarField, pairs: &[(ScalarField, ScalarField)]) -> Result<f64> {
    let dv = g.measure(k)?;
    let mut worst = 0.0f64;
    for (u, v) in pairs {
        let (lu, lv) = (g.drift_laplacian(k, u)?, g.drift_laplacian(k, v)?);
        let a = g.inner(&lu, v, &dv)?;
        let b = g.inner(u, &lv, &dv)?;
        let norm = |x: &ScalarField| g.inner(x, x, &dv).map(f64::sqrt);
        let scale = norm(&lu)? * norm(v)? + norm(u)? * norm(&lv)?;
        if scale > 0.0 {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{evolve_ricci, evolve_ricci_harmonic};
    use crate::geometry::{ConformalTorus, FieldSpec, ManifoldState, SphereSpectral, Trig, TrigTerm, WarpedTorus};
    use crate::schedule::Schedule;
    use std::sync::Arc;
    use approx::assert_relative_eq;

    fn term(amplitude: f64, kx: i32, ky: i32, trig: Trig) -> TrigTerm {
        TrigTerm { amplitude, kx, ky, trig }
    }

    #[test]
    fn flat_static_kernel_is_constant() {
        let init = ManifoldState::new(0.0, Arc::new(ConformalTorus::flat(8)));
        let traj = evolve_ricci(&init, 0.001, 16).unwrap();
        let k = terminal_density(traj.geometry(16).as_ref(), &Terminal::Uniform).unwrap();
        let ws = solve_conjugate_backward(&traj, &k, 1.0).unwrap();
        for k in &ws.k {
            assert!(k.values().unwrap().iter().all(|v| (v - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn sphere_kernel_tracks_inverse_volume() {
        let init = ManifoldState::new(0.0, Arc::new(SphereSpectral::new(2, 1.0, 4).unwrap()));
        let traj = evolve_ricci(&init, 0.25, 200).unwrap();
        let k = terminal_density(traj.geometry(200).as_ref(), &Terminal::Uniform).unwrap();
        let ws = solve_conjugate_backward(&traj, &k, 1.0).unwrap();
        for (s, k) in traj.snapshots.iter().zip(&ws.k) {
            let vol = 4.0 * PI * (1.0 - 2.0 * s.t);
            assert_relative_eq!(k.coeff(0), 1.0 / vol, max_relative = 1e-12);
        }
        assert!(ws.max_mass_drift() < 1e-12);
        let r = f_equation_residual(&traj, &ws).unwrap();
        assert!(r.max_relative < 1e-4, "{r:?}");
    }

    #[test]
    fn potential_of_unit_kernel() {
        // n = 2, τ = 1, K = 1: f = -log 4π.
        let n = 2.0;
        let f = -(1.0f64).ln() - 0.5 * n * (4.0 * PI).ln();
        assert_relative_eq!(f, -2.5310, max_relative = 1e-4);
    }

    #[test]
    fn drift_of_sine_potential() {
        let n = 256;
        let g = WarpedTorus::flat(n);
        let f = g.sample(&FieldSpec::trig(0.0, vec![term(0.1, 1, 0, Trig::Sin)])).unwrap();
        let u = g.sample(&FieldSpec::trig(0.0, vec![term(1.0, 1, 0, Trig::Cos)])).unwrap();
        let lf = drift_laplacian(&g, &f, &u).unwrap();
        for (i, v) in lf.values().unwrap().iter().enumerate() {
            let x = 2.0 * PI * i as f64 / n as f64;
            let exact = -4.0 * PI * PI * x.cos() + 0.4 * PI * PI * x.sin() * x.cos();
            assert!((v - exact).abs() < 5e-3, "{i}: {v} vs {exact}");
        }
    }

    #[test]
    fn einstein_sphere_bound() {
        let g = SphereSpectral::new(2, 0.5, 4).unwrap();
        let f = ScalarField::spectral_constant(-1.0);
        let (_, s) = bakry_emery_bound(&g, &f, 0.0, None).unwrap();
        assert_relative_eq!(s, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn rhf_mass_is_conserved() {
        let g = WarpedTorus::from_spec(
            64,
            &FieldSpec::constant(1.0),
            &FieldSpec::constant(1.0),
            &FieldSpec::trig(0.0, vec![term(0.1, 1, 0, Trig::Sin)]),
        )
        .unwrap();
        let traj = evolve_ricci_harmonic(&ManifoldState::new(0.0, Arc::new(g)), &Schedule::constant(1.0), 0.005, 128)
            .unwrap();
        let k = terminal_density(traj.geometry(128).as_ref(), &Terminal::Bump { amplitude: 0.5, width: 0.15 }).unwrap();
        let ws = solve_conjugate_backward(&traj, &k, 1.0).unwrap();
        assert!(ws.max_mass_drift() < 1e-8, "{}", ws.max_mass_drift());
    }

    #[test]
    fn nonpositive_terminal_is_rejected() {
        let init = ManifoldState::new(0.0, Arc::new(WarpedTorus::flat(8)));
        let traj = evolve_ricci(&init, 0.001, 16).unwrap();
        let k = traj.geometry(16).constant_field(-1.0);
        assert!(matches!(
            solve_conjugate_backward(&traj, &k, 1.0),
            Err(Error::Positivity { .. })
        ));
    }
}
