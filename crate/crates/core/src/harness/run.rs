use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::checks::evaluate;
use super::{Report, ScenarioVerdict, Verdict};
use crate::cli::config::{ResolvedTolerances, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimates::{self, Band, SlackReport, SlackSeries};
use crate::flows::{evolve_ricci, evolve_ricci_harmonic, FlowKind, Trajectory};
use crate::frequency::{
    bakry_emery_frequency, bounded_ricci_frequency, choose_kappa, compute_i_d, BoundedRicciConstants, FrequencyRecord,
};
use crate::geometry::registry::Registry;
use crate::geometry::{Backend, ManifoldState};
use crate::heat::{solve_heat, HeatSolution};
use crate::measures::{bakry_emery_bound, solve_conjugate_backward, terminal_density, WeightSystem};
use crate::schedule::Schedule;

/// One row of `series.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    pub i: f64,
    pub d: f64,
    pub u3: f64,
    pub u4: Option<f64>,
    pub kappa: f64,
    pub s_bound: f64,
    pub lambda1: Option<f64>,
    pub slack_hamilton: Option<f64>,
    pub slack_liyau: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: Report,
    pub series: Vec<SeriesRow>,
    /// Frequency data on the window `[t0, t1]`.
    pub records: Vec<FrequencyRecord>,
}

/// Data of the bounded-curvature normalization.
pub(crate) struct Bounded {
    pub ricci_band: SlackReport,
    pub map_band: Option<SlackReport>,
    pub alpha_band: Option<SlackReport>,
    pub hamilton: std::result::Result<SlackSeries, String>,
    pub li_yau: std::result::Result<SlackSeries, String>,
}

/// Everything the checks read.
pub(crate) struct Computed<'a> {
    pub cfg: &'a ScenarioConfig,
    pub tol: ResolvedTolerances,
    pub traj: Trajectory,
    pub ws: WeightSystem,
    pub heat: HeatSolution,
    pub records: Vec<FrequencyRecord>,
    pub k1: usize,
    pub h_sign: f64,
    pub ricci_f_band: SlackReport,
    pub bounded: Option<Bounded>,
    pub measured: BTreeMap<String, f64>,
}

fn record_at(
    traj: &Trajectory,
    ws: &WeightSystem,
    heat: &HeatSolution,
    cfg: &ScenarioConfig,
    k: usize,
) -> Result<FrequencyRecord> {
    let g: &dyn Backend = traj.geometry(k).as_ref();
    let t = traj.snapshots[k].t;
    let h = cfg.frequency.h.value(t, ws.terminal_time);
    let dphi = match traj.kind {
        FlowKind::RicciHarmonic => g.map_differential(),
        FlowKind::Ricci => None,
    };
    let (_, s) = bakry_emery_bound(g, &ws.f[k], traj.alpha_at(t), dphi.as_ref())?;
    let kappa = match cfg.frequency.kappa_override {
        Some(k) => k,
        None => choose_kappa(s, h)?,
    };
    let (i, d) = compute_i_d(g, &ws.k[k], &ws.dv[k], &heat.u[k], h)?;
    let lambda1 = if cfg.frequency.eigenvalue {
        Some(g.first_eigenvalue(&ws.k[k])?)
    } else {
        None
    };
    Ok(FrequencyRecord {
        t,
        h,
        i,
        d,
        s,
        kappa,
        lambda1,
        exp3: 0.0,
        u3: 0.0,
        exp4: None,
        u4: None,
    })
}

/// Flow, conjugate heat kernel and heat solution of a scenario.
pub(crate) fn simulate(cfg: &ScenarioConfig, registry: &Registry) -> Result<(Trajectory, WeightSystem, HeatSolution)> {
    let g0 = registry
        .build(&cfg.backend.kind, &cfg.backend.params)
        .map_err(|e| e.in_stage("backend"))?;
    let init = ManifoldState::new(0.0, Arc::clone(&g0));
    let (t_end, steps) = (cfg.horizon.t_end, cfg.steps());
    let traj = match cfg.flow.kind {
        FlowKind::Ricci => evolve_ricci(&init, t_end, steps),
        FlowKind::RicciHarmonic => {
            let alpha = cfg.flow.alpha.unwrap_or_else(|| Schedule::constant(1.0));
            evolve_ricci_harmonic(&init, &alpha, t_end, steps)
        }
    }
    .map_err(|e| e.in_stage("flow"))?;
    let last = traj.steps();
    let terminal = terminal_density(traj.geometry(last).as_ref(), &cfg.terminal).map_err(|e| e.in_stage("conjugate"))?;
    let ws = solve_conjugate_backward(&traj, &terminal, cfg.tau0).map_err(|e| e.in_stage("conjugate"))?;
    let u0 = g0.sample(&cfg.heat.u0).map_err(|e| e.in_stage("heat"))?;
    let heat = solve_heat(&traj, &u0, &cfg.heat.a, cfg.heat.positivity).map_err(|e| e.in_stage("heat"))?;
    Ok((traj, ws, heat))
}

/// Frequency records on snapshots `k0..=k1` with the Bakry–Émery normalization filled in.
pub(crate) fn frequency_records(
    cfg: &ScenarioConfig,
    traj: &Trajectory,
    ws: &WeightSystem,
    heat: &HeatSolution,
    k0: usize,
    k1: usize,
) -> Result<Vec<FrequencyRecord>> {
    let mut records = (k0..=k1)
        .into_par_iter()
        .map(|k| record_at(traj, ws, heat, cfg, k))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("frequency"))?;
    bakry_emery_frequency(&mut records, &cfg.frequency.h).map_err(|e| e.in_stage("frequency"))?;
    Ok(records)
}

/// Runs a normalized scenario and evaluates its checks.
pub fn run_scenario(cfg: &ScenarioConfig, registry: &Registry) -> Result<ScenarioRun> {
    let start = Instant::now();
    let tol = cfg.tolerances()?;
    let (traj, ws, heat) = simulate(cfg, registry)?;

    let (t0, t1) = cfg.window();
    let (k0, k1) = (traj.nearest(t0), traj.nearest(t1));
    if k0 == 0 {
        return Err(Error::config("frequency.t0", "t0 snaps to the initial snapshot"));
    }
    if k1 <= k0 {
        return Err(Error::config("frequency.t1", "the window holds a single snapshot"));
    }
    let h_sign = cfg.frequency.h.validate(traj.snapshots[k0].t, traj.snapshots[k1].t, ws.terminal_time)?;

    let mut records = frequency_records(cfg, &traj, &ws, &heat, k0, k1)?;
    let ricci_f_band = estimates::hypothesis_band(&traj, &records, &Band::RicciFUpper, k0..=k1, 1e-12)
        .map_err(|e| e.in_stage("frequency"))?;

    let mut measured = BTreeMap::new();
    measured.insert("t0".to_string(), traj.snapshots[k0].t);
    measured.insert("t1".to_string(), traj.snapshots[k1].t);
    measured.insert("terminal_time".to_string(), ws.terminal_time);
    measured.insert("cfl_ratio".to_string(), traj.cfl_ratio);
    measured.insert("initial_max".to_string(), heat.initial_max);
    measured.insert("initial_min".to_string(), heat.initial_min);
    let u3_0 = records[0].u3;
    measured.insert(
        "u3_spread".to_string(),
        records.iter().fold(0.0f64, |m, r| m.max((r.u3 - u3_0).abs())),
    );

    let bounded = if heat.initial_min > 0.0 {
        Some(bounded_data(cfg, &traj, &heat, &tol, &mut records, &mut measured).map_err(|e| e.in_stage("estimates"))?)
    } else {
        None
    };

    let series = series_rows(&records, bounded.as_ref(), k0);
    let mut computed = Computed {
        cfg,
        tol,
        traj,
        ws,
        heat,
        records,
        k1,
        h_sign,
        ricci_f_band,
        bounded,
        measured,
    };
    let checks = evaluate(&mut computed)?;
    let records = std::mem::take(&mut computed.records);
    let verdict = if checks.iter().any(|c| c.verdict == Verdict::Fail) {
        ScenarioVerdict::Fail
    } else {
        ScenarioVerdict::Pass
    };
    Ok(ScenarioRun {
        report: Report {
            scenario: cfg.name.clone(),
            verdict,
            checks,
            measured: computed.measured,
            runtime_seconds: start.elapsed().as_secs_f64(),
            config: cfg.clone(),
        },
        series,
        records,
    })
}

fn bounded_data(
    cfg: &ScenarioConfig,
    traj: &Trajectory,
    heat: &HeatSolution,
    tol: &ResolvedTolerances,
    records: &mut [FrequencyRecord],
    measured: &mut BTreeMap<String, f64>,
) -> Result<Bounded> {
    let last = traj.steps();
    let n = traj.dimension() as f64;
    let measured_k = estimates::measure_ricci_upper(traj, 0..=last)?;
    let k_bound = cfg.frequency.k_bound.unwrap_or(measured_k.max(0.0));
    measured.insert("ricci_upper".to_string(), measured_k);
    measured.insert("k_bound".to_string(), k_bound);
    let log_ratio = heat.log_ratio()?;
    measured.insert("log_ratio".to_string(), log_ratio);

    let (c_n, map_band, alpha_band) = match traj.kind {
        FlowKind::Ricci => (n, None, None),
        FlowKind::RicciHarmonic => {
            let c = estimates::measure_map_constant(traj, 0..=last)?;
            measured.insert("map_constant".to_string(), c);
            let c_n = 0.5 * n + 4.0 * n * c * traj.alpha_at(0.0);
            let map = estimates::hypothesis_band(traj, records, &Band::MapDifferential { c }, 0..=last, 1e-12)?;
            let alpha = estimates::hypothesis_band(traj, records, &Band::AlphaMonotone, 0..=last, 0.0)?;
            (c_n, Some(map), Some(alpha))
        }
    };
    measured.insert("c_n".to_string(), c_n);
    let ricci_band = estimates::hypothesis_band(traj, records, &Band::Ricci { k_bound }, 0..=last, 1e-12)?;
    let constants = BoundedRicciConstants {
        k_bound,
        dimension: traj.dimension(),
        log_ratio,
        c_n,
    };
    bounded_ricci_frequency(records, &constants)?;
    let samples = cfg.frequency.samples;
    let hamilton = estimates::hamilton_gradient(traj, heat, samples, tol.estimate).map_err(|e| e.to_string());
    let li_yau = estimates::li_yau(traj, heat, k_bound, c_n, samples, tol.estimate).map_err(|e| e.to_string());
    Ok(Bounded {
        ricci_band,
        map_band,
        alpha_band,
        hamilton,
        li_yau,
    })
}

fn series_rows(records: &[FrequencyRecord], bounded: Option<&Bounded>, k0: usize) -> Vec<SeriesRow> {
    let slack = |s: Option<&std::result::Result<SlackSeries, String>>, k: usize| {
        s.and_then(|r| r.as_ref().ok()).and_then(|r| r.per_snapshot[k])
    };
    records
        .iter()
        .enumerate()
        .map(|(j, r)| SeriesRow {
            t: r.t,
            i: r.i,
            d: r.d,
            u3: r.u3,
            u4: r.u4,
            kappa: r.kappa,
            s_bound: r.s,
            lambda1: r.lambda1,
            slack_hamilton: slack(bounded.map(|b| &b.hamilton), k0 + j),
            slack_liyau: slack(bounded.map(|b| &b.li_yau), k0 + j),
        })
        .collect()
}
