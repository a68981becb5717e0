use std::collections::BTreeMap;

use super::run::Computed;
use super::{verify_monotone, CheckItem, Direction, Verdict};
use crate::cli::config::CheckName;
use crate::error::Result;
use crate::flows::{check_volume_evolution, FlowKind};
use crate::frequency::{normalized_eigenvalues, ratio_lower_bounds};
use crate::geometry::{Backend, BackendKind, FieldSpec, ScalarField, Trig, TrigTerm};
use crate::heat::sup_series;
use crate::measures::{f_equation_residual, integral_bochner, self_adjoint_defect};

/// Number of field pairs in the self-adjointness test.
pub const SELF_ADJOINT_PAIRS: usize = 20;

pub fn statement(name: CheckName) -> &'static str {
    match name {
        CheckName::FrequencyMonotone => {
            "U = exp(-∫(h'+κ)/h) D/I is nondecreasing for h < 0 and nonincreasing for h > 0 when Ric_f ≤ κ/(2h) g"
        }
        CheckName::FrequencyEquality => "U is constant when u is a single eigenmode and Ric_f = κ/(2h) g",
        CheckName::EigenvalueMonotone => "exp(-∫(h'+κ)/h) h λ1 is monotone in the direction fixed by the sign of h",
        CheckName::BackwardUniquenessBound => {
            "I(t1)/I(t') ≥ exp(-2U(t0) ∫ exp(∫(h'+κ)/h)/h dt + 2∫a) for every t' in [t0, t1]"
        }
        CheckName::BoundedRicciFrequencyMonotone => {
            "with 0 ≤ Ric ≤ K g and positive u, the frequency normalized by h, K, n, log(A/η) and 1/t is monotone"
        }
        CheckName::BoundedRicciEigenvalueMonotone => {
            "with 0 ≤ Ric ≤ K g, h λ1 under the bounded-curvature normalization is monotone"
        }
        CheckName::HamiltonGradient => "t|∇u|² ≤ u² log(A/u) for positive solutions with u(0) ≤ A",
        CheckName::LiYau => "|∇u|²/u - ∂t u ≤ (c/2t) u + K n u with c = n, or C_n under the harmonic flow",
        CheckName::MaximumPrinciple => "sup u is nonincreasing when a vanishes",
        CheckName::ConjugateMass => "the conjugate heat kernel keeps ∫ dV = 1",
        CheckName::DriftSelfAdjoint => "∫ (Δ_f u) v dV = ∫ u (Δ_f v) dV",
        CheckName::IntegralBochner => "∫|∇²u|² dV = ∫ (|Δ_f u|² - Ric_f(∇u,∇u)) dV",
        CheckName::VolumeEvolution => "d/dt Vol = -∫ R dμ, or -∫(R - α|∇φ|²) dμ under the harmonic flow",
        CheckName::FEquation => "the potential f solves ∂t f = -Δf - R + |∇f|² + n/(2τ) (+ α|∇φ|²)",
    }
}

fn flags(entries: &[(&str, bool)]) -> BTreeMap<String, bool> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// A fixed smooth test field; `index` selects frequencies and phases.
fn basis_field(g: &dyn Backend, index: usize) -> Result<ScalarField> {
    match g.kind() {
        BackendKind::Sphere => {
            let l = g.resolution().clamp(1, 6);
            ScalarField::spectral([(index % (l + 1), 1.0), ((index + 2) % (l + 1), 0.5 + 0.1 * index as f64)])
        }
        kind => {
            let x_only = kind == BackendKind::WarpedTorus;
            let kx = 1 + (index % 4) as i32;
            let ky = if x_only { 0 } else { (index / 4 % 3) as i32 };
            let spec = FieldSpec::trig(
                0.1 * index as f64,
                vec![
                    TrigTerm {
                        amplitude: 1.0,
                        kx,
                        ky,
                        trig: Trig::Cos,
                    },
                    TrigTerm {
                        amplitude: 0.3,
                        kx: kx + 1,
                        ky: if x_only { 0 } else { ky + 1 },
                        trig: Trig::Sin,
                    },
                ],
            );
            g.sample(&spec)
        }
    }
}

/// The fixed pair family used for the self-adjointness defect.
pub fn basis_pairs(g: &dyn Backend) -> Result<Vec<(ScalarField, ScalarField)>> {
    (0..SELF_ADJOINT_PAIRS)
        .map(|i| Ok((basis_field(g, i)?, basis_field(g, (i * 7 + 3) % SELF_ADJOINT_PAIRS)?)))
        .collect()
}

fn monotone_item(
    c: &Computed,
    name: CheckName,
    series: &[f64],
    hypotheses: BTreeMap<String, bool>,
    forced: bool,
) -> Result<CheckItem> {
    let dir = Direction::for_h_sign(c.h_sign);
    let out = verify_monotone(series, dir, c.tol.monotone)?;
    let t = c.records.get(out.worst_index + 1).map(|r| r.t);
    Ok(
        CheckItem::assess(name.as_str(), statement(name), out.worst_slack, c.tol.monotone, hypotheses, forced)
            .at(t)
            .with_detail(format!("{:?}, total change {:e}", dir, out.total_change)),
    )
}

pub(crate) fn evaluate(c: &mut Computed) -> Result<Vec<CheckItem>> {
    let mut out = Vec::new();
    for name in c.cfg.checks() {
        let item = evaluate_one(c, name)?;
        out.push(item);
    }
    Ok(out)
}

fn evaluate_one(c: &mut Computed, name: CheckName) -> Result<CheckItem> {
    let stmt = statement(name);
    let id = name.as_str();
    let forced = c.cfg.frequency.kappa_override.is_some();
    let harmonic = c.traj.kind == FlowKind::RicciHarmonic;
    let a_zero = c.heat.a.is_zero();
    let be_hyp = flags(&[("ricci_f_upper", c.ricci_f_band.pass)]);
    Ok(match name {
        CheckName::FrequencyMonotone => {
            let u: Vec<f64> = c.records.iter().map(|r| r.u3).collect();
            monotone_item(c, name, &u, be_hyp, forced)?
        }
        CheckName::FrequencyEquality => {
            let spread = c.measured["u3_spread"];
            CheckItem::assess(id, stmt, -spread, c.tol.monotone, be_hyp, forced)
        }
        CheckName::EigenvalueMonotone => {
            if !c.cfg.frequency.eigenvalue {
                return Ok(CheckItem::not_asserted(id, stmt, "eigenvalues were not computed"));
            }
            let series = normalized_eigenvalues(&c.records, false)?;
            monotone_item(c, name, &series, be_hyp, forced)?
        }
        CheckName::BackwardUniquenessBound => {
            let bounds = ratio_lower_bounds(&c.records, &c.heat.a)?;
            let worst = bounds
                .iter()
                .map(|b| (b.actual - b.bound, b.t_prime))
                .fold((f64::INFINITY, None), |m, (s, t)| if s < m.0 { (s, Some(t)) } else { m });
            let worst = if bounds.is_empty() { (0.0, None) } else { worst };
            c.measured.insert("ratio_worst_gap".into(), worst.0);
            CheckItem::assess(id, stmt, worst.0, c.tol.ratio, be_hyp, forced).at(worst.1)
        }
        CheckName::BoundedRicciFrequencyMonotone | CheckName::BoundedRicciEigenvalueMonotone => {
            let Some(b) = &c.bounded else {
                return Ok(CheckItem::not_asserted(id, stmt, "initial data is not positive"));
            };
            let mut hyp = flags(&[
                ("positive_solution", true),
                ("ricci_band", b.ricci_band.pass),
                ("a_vanishes", a_zero),
            ]);
            if harmonic {
                hyp.insert("alpha_monotone".into(), b.alpha_band.as_ref().is_some_and(|r| r.pass));
                hyp.insert("map_band".into(), b.map_band.as_ref().is_some_and(|r| r.pass));
            }
            let series: Vec<f64> = if name == CheckName::BoundedRicciFrequencyMonotone {
                c.records.iter().map(|r| r.u4.unwrap_or(f64::NAN)).collect()
            } else {
                if !c.cfg.frequency.eigenvalue {
                    return Ok(CheckItem::not_asserted(id, stmt, "eigenvalues were not computed"));
                }
                normalized_eigenvalues(&c.records, true)?
            };
            monotone_item(c, name, &series, hyp, false)?
        }
        CheckName::HamiltonGradient | CheckName::LiYau => {
            let Some(b) = &c.bounded else {
                return Ok(CheckItem::not_asserted(id, stmt, "initial data is not positive"));
            };
            let mut hyp = flags(&[("positive_solution", true), ("a_vanishes", a_zero)]);
            if name == CheckName::LiYau {
                hyp.insert("ricci_band".into(), b.ricci_band.pass);
            }
            if harmonic {
                hyp.insert("alpha_monotone".into(), b.alpha_band.as_ref().is_some_and(|r| r.pass));
                if name == CheckName::LiYau {
                    hyp.insert("map_band".into(), b.map_band.as_ref().is_some_and(|r| r.pass));
                }
            }
            let series = if name == CheckName::HamiltonGradient { &b.hamilton } else { &b.li_yau };
            match series {
                Ok(s) => CheckItem::assess(id, stmt, s.report.worst, s.report.tolerance, hyp, false)
                    .at(s.report.location.map(|l| l.0)),
                Err(e) => CheckItem::not_asserted(id, stmt, e.clone()),
            }
        }
        CheckName::MaximumPrinciple => {
            let sups = sup_series(&c.traj, &c.heat)?;
            let scale = sups[0].abs().max(f64::MIN_POSITIVE);
            let scaled: Vec<f64> = sups.iter().map(|v| v / scale).collect();
            let m = verify_monotone(&scaled, Direction::NonIncreasing, c.tol.monotone)?;
            let hyp = flags(&[("a_vanishes", a_zero)]);
            CheckItem::assess(id, stmt, m.worst_slack, c.tol.monotone, hyp, false)
                .at(Some(c.traj.snapshots[(m.worst_index + 1).min(sups.len() - 1)].t))
        }
        CheckName::ConjugateMass => {
            let drift = c.ws.max_mass_drift();
            c.measured.insert("max_mass_drift".into(), drift);
            CheckItem::assess(id, stmt, -drift, c.tol.mass, BTreeMap::new(), false)
        }
        CheckName::DriftSelfAdjoint => {
            let g = c.traj.geometry(c.k1);
            let defect = self_adjoint_defect(g.as_ref(), &c.ws.k[c.k1], &basis_pairs(g.as_ref())?)?;
            c.measured.insert("self_adjoint_defect".into(), defect);
            CheckItem::assess(id, stmt, -defect, c.tol.self_adjoint, BTreeMap::new(), false)
                .at(Some(c.traj.snapshots[c.k1].t))
        }
        CheckName::IntegralBochner => {
            let k = c.k1;
            let g = c.traj.geometry(k);
            let d = integral_bochner(g.as_ref(), &c.ws.k[k], &c.ws.f[k], &c.heat.u[k])?;
            c.measured.insert("bochner_relative".into(), d.relative);
            CheckItem::assess(id, stmt, -d.relative, c.tol.bochner, BTreeMap::new(), false)
                .at(Some(c.traj.snapshots[k].t))
        }
        CheckName::VolumeEvolution => {
            let v = check_volume_evolution(&c.traj)?;
            c.measured.insert("volume_relative_residual".into(), v.max_relative);
            CheckItem::assess(id, stmt, -v.max_relative, c.tol.volume, BTreeMap::new(), false)
        }
        CheckName::FEquation => {
            let r = f_equation_residual(&c.traj, &c.ws)?;
            c.measured.insert("f_residual_abs".into(), r.max_abs);
            c.measured.insert("f_residual_relative".into(), r.max_relative);
            let mut item = CheckItem::assess(id, stmt, -r.max_relative, 0.0, BTreeMap::new(), false);
            item.verdict = Verdict::Diagnostic;
            item.with_detail("time-discretization residual; its convergence under refinement is the test")
        }
    })
}
