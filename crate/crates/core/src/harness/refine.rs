//! Convergence study under simultaneous space and time refinement.
//!
//! Level `l` doubles the grid resolution `l` times and multiplies the step
//! count by `4^l`, so `Δt ∝ Δx²` and second-order errors shrink by four per
//! level. Observed orders are `log2` of successive error ratios.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};
use serde_json::Value;

use super::run::{frequency_records, simulate};
use crate::cli::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::registry::{ConformalParams, Registry, WarpedParams};
use crate::geometry::{sample_values, Backend, ScalarField};
use crate::measures::{f_equation_residual, integral_bochner};

/// Errors below this are treated as round-off.
pub const EXACT_FLOOR: f64 = 1e-12;

/// An observed order, or `exact` when both errors sit at round-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    Exact,
    Value(f64),
}

impl Order {
    pub fn from_errors(coarse: f64, fine: f64) -> Self {
        if coarse <= EXACT_FLOOR && fine <= EXACT_FLOOR {
            Order::Exact
        } else {
            Order::Value((coarse / fine).log2())
        }
    }

    /// Passes a minimum order; exact always passes.
    pub fn at_least(self, p: f64) -> bool {
        match self {
            Order::Exact => true,
            Order::Value(v) => v >= p,
        }
    }
}

impl Serialize for Order {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Order::Exact => s.serialize_str("exact"),
            Order::Value(v) => s.serialize_f64(*v),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSummary {
    pub resolution: usize,
    pub steps: usize,
    /// Max error of `R` at `t = 0` against the closed form of the initial data.
    pub curvature_error: f64,
    /// Max heat-solution difference to the next finer level at shared points, final time.
    pub heat_difference: Option<f64>,
    pub f_residual: f64,
    pub bochner_relative: f64,
    /// Normalized frequency at `t1`.
    pub u_final: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementReport {
    pub scenario: String,
    pub levels: Vec<LevelSummary>,
    /// Observed orders between consecutive levels, keyed by quantity.
    pub orders: BTreeMap<String, Vec<Order>>,
}

impl RefinementReport {
    pub fn min_order(&self, key: &str) -> Option<Order> {
        self.orders.get(key)?.iter().copied().fold(None, |m, o| match (m, o) {
            (None, o) => Some(o),
            (Some(Order::Exact), o) => Some(o),
            (Some(a), Order::Exact) => Some(a),
            (Some(Order::Value(a)), Order::Value(b)) => Some(Order::Value(a.min(b))),
        })
    }
}

fn level_config(base: &ScenarioConfig, level: usize) -> Result<ScenarioConfig> {
    let mut cfg = base.clone();
    let grid = base.backend.kind != "sphere";
    if grid {
        let n = base.backend.params["resolution"]
            .as_u64()
            .ok_or_else(|| Error::config("backend.params.resolution", "missing resolution"))?;
        cfg.backend.params["resolution"] = Value::from(n << level);
    }
    cfg.horizon.steps = Some(base.steps() << (2 * level));
    Ok(cfg)
}

/// Closed-form scalar curvature of the initial data at each sample.
fn exact_curvature(cfg: &ScenarioConfig, g: &dyn Backend) -> Result<Option<Vec<f64>>> {
    let n = g.resolution();
    let h = 1.0 / n as f64;
    let params = || Error::config("backend.params", "unreadable parameters");
    match cfg.backend.kind.as_str() {
        "conformal_torus" => {
            let p: ConformalParams = serde_json::from_value(cfg.backend.params.clone()).map_err(|_| params())?;
            let mut out = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    let (x, y) = (i as f64 * h, j as f64 * h);
                    let phi = p.phi.value(x, y)?;
                    out.push(-2.0 * (-2.0 * phi).exp() * p.phi.flat_laplacian(x, y)?);
                }
            }
            Ok(Some(out))
        }
        "warped_torus" => {
            let p: WarpedParams = serde_json::from_value(cfg.backend.params.clone()).map_err(|_| params())?;
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let x = i as f64 * h;
                let (a, b) = (p.a.value(x, 0.0)?, p.b.value(x, 0.0)?);
                let (ax, bx) = (p.a.gradient(x, 0.0)?.0, p.b.gradient(x, 0.0)?.0);
                let bxx = p.b.hessian(x, 0.0)?.0;
                // K = -(1/ab) d/dx (b_x / a)
                let k = -(bxx / a - bx * ax / (a * a)) / (a * b);
                out.push(2.0 * k);
            }
            Ok(Some(out))
        }
        _ => Ok(None),
    }
}

fn curvature_error(cfg: &ScenarioConfig, g: &dyn Backend) -> Result<f64> {
    let r = g.scalar_curvature()?;
    match exact_curvature(cfg, g)? {
        Some(exact) => {
            let v = sample_values(&r)?;
            Ok(v.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
        }
        None => {
            let n = g.dimension() as f64;
            let r2 = g.flow_vars()[0];
            let v = sample_values(&r)?;
            Ok((v[0] - n * (n - 1.0) / r2).abs())
        }
    }
}

/// Values of `fine` at the points of the coarser grid.
fn restrict(fine: &[f64], coarse_len: usize, two_d: bool) -> Vec<f64> {
    if two_d {
        let nc = (coarse_len as f64).sqrt().round() as usize;
        let nf = 2 * nc;
        (0..coarse_len).map(|p| fine[(2 * (p / nc)) * nf + 2 * (p % nc)]).collect()
    } else {
        (0..coarse_len).map(|i| fine[2 * i]).collect()
    }
}

fn final_values(u: &ScalarField) -> Vec<f64> {
    match u.values() {
        Some(v) => v.to_vec(),
        None => u.modes().map(|m| m.iter().map(|m| m.coeff).collect()).unwrap_or_default(),
    }
}

/// Runs `levels ≥ 3` refinement levels of `base`.
pub fn refine(base: &ScenarioConfig, registry: &Registry, levels: usize) -> Result<RefinementReport> {
    if levels < 3 {
        return Err(Error::config("levels", format!("need at least three levels, got {levels}")));
    }
    let grid = base.backend.kind != "sphere";
    let two_d = base.backend.kind == "conformal_torus";
    let mut summaries = Vec::with_capacity(levels);
    let mut finals = Vec::with_capacity(levels);
    for level in 0..levels {
        let cfg = level_config(base, level)?;
        let (traj, ws, heat) = simulate(&cfg, registry)?;
        let g0 = traj.geometry(0);
        let (t0, t1) = cfg.window();
        let (k0, k1) = (traj.nearest(t0), traj.nearest(t1));
        let records = frequency_records(&ScenarioConfig {
            frequency: crate::cli::config::FrequencySpec {
                eigenvalue: false,
                ..cfg.frequency.clone()
            },
            ..cfg.clone()
        }, &traj, &ws, &heat, k0, k1)?;
        let last = traj.steps();
        let bochner = integral_bochner(traj.geometry(last).as_ref(), &ws.k[last], &ws.f[last], &heat.u[last])?;
        summaries.push(LevelSummary {
            resolution: g0.resolution(),
            steps: traj.steps(),
            curvature_error: curvature_error(&cfg, g0.as_ref())?,
            heat_difference: None,
            f_residual: f_equation_residual(&traj, &ws)?.max_abs,
            bochner_relative: bochner.relative,
            u_final: records.last().map_or(f64::NAN, |r| r.u3),
        });
        finals.push(final_values(&heat.u[last]));
    }
    for l in 0..levels - 1 {
        let coarse = &finals[l];
        let fine = if grid {
            restrict(&finals[l + 1], coarse.len(), two_d)
        } else {
            finals[l + 1].clone()
        };
        let d = coarse.iter().zip(&fine).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        summaries[l].heat_difference = Some(d);
    }

    let mut orders = BTreeMap::new();
    let pairwise = |xs: Vec<f64>| xs.windows(2).map(|w| Order::from_errors(w[0], w[1])).collect::<Vec<_>>();
    orders.insert("curvature".into(), pairwise(summaries.iter().map(|s| s.curvature_error).collect()));
    orders.insert("f_residual".into(), pairwise(summaries.iter().map(|s| s.f_residual).collect()));
    orders.insert(
        "heat".into(),
        pairwise(summaries.iter().filter_map(|s| s.heat_difference).collect()),
    );
    orders.insert("bochner".into(), pairwise(summaries.iter().map(|s| s.bochner_relative).collect()));
    let u: Vec<f64> = summaries.iter().map(|s| s.u_final).collect();
    orders.insert(
        "frequency".into(),
        pairwise(u.windows(2).map(|w| (w[0] - w[1]).abs()).collect()),
    );
    Ok(RefinementReport {
        scenario: base.name.clone(),
        levels: summaries,
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_arithmetic() {
        assert_eq!(Order::from_errors(4e-4, 1e-4), Order::Value(2.0));
        assert_eq!(Order::from_errors(1e-15, 1e-16), Order::Exact);
        assert!(Order::Exact.at_least(10.0));
        assert!(!Order::Value(1.5).at_least(1.8));
        assert_eq!(serde_json::to_string(&Order::Exact).unwrap(), "\"exact\"");
    }

    #[test]
    fn restriction_picks_shared_points() {
        let fine: Vec<f64> = (0..16).map(|v| v as f64).collect();
        assert_eq!(restrict(&fine, 4, true), vec![0.0, 2.0, 8.0, 10.0]);
        assert_eq!(restrict(&fine, 8, false), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]);
    }
}
