//! Scenario runner, check catalog and reports.

pub mod catalog;
mod checks;
pub mod refine;
mod run;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::cli::config::ScenarioConfig;
use crate::error::{Error, Result};

pub use run::{run_scenario, ScenarioRun, SeriesRow};

/// Outcome of one check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// A hypothesis did not hold, so the conclusion was not asserted.
    NotAsserted,
    /// Reported for inspection; never decides the scenario verdict.
    Diagnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub statement: String,
    pub verdict: Verdict,
    /// Smallest slack; the check holds when it is at least `-tolerance`.
    pub worst_slack: Option<f64>,
    pub tolerance: f64,
    /// Time of the worst slack, when meaningful.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<f64>,
    pub hypotheses: BTreeMap<String, bool>,
    /// Asserted even though a hypothesis failed (user-supplied `κ`).
    pub forced: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckItem {
    /// Builds an item whose verdict follows from slack, tolerance and hypotheses.
    pub fn assess(
        name: &str,
        statement: &str,
        worst: f64,
        tolerance: f64,
        hypotheses: BTreeMap<String, bool>,
        forced: bool,
    ) -> Self {
        let worst = worst + 0.0;
        let holds = hypotheses.values().all(|v| *v);
        let verdict = if !holds && !forced {
            Verdict::NotAsserted
        } else if worst >= -tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        CheckItem {
            name: name.into(),
            statement: statement.into(),
            verdict,
            worst_slack: worst.is_finite().then_some(worst),
            tolerance,
            location: None,
            hypotheses,
            forced: forced && !holds,
            detail: None,
        }
    }

    pub fn at(mut self, t: Option<f64>) -> Self {
        self.location = t;
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    /// A check that could not be evaluated on this scenario.
    pub fn not_asserted(name: &str, statement: &str, reason: impl Into<String>) -> Self {
        CheckItem {
            name: name.into(),
            statement: statement.into(),
            verdict: Verdict::NotAsserted,
            worst_slack: None,
            tolerance: 0.0,
            location: None,
            hypotheses: BTreeMap::new(),
            forced: false,
            detail: Some(reason.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioVerdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub verdict: ScenarioVerdict,
    pub checks: Vec<CheckItem>,
    pub measured: BTreeMap<String, f64>,
    pub runtime_seconds: f64,
    pub config: ScenarioConfig,
}

impl Report {
    pub fn check(&self, name: &str) -> Option<&CheckItem> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn passed(&self) -> bool {
        self.verdict == ScenarioVerdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
}

impl Direction {
    /// Frequencies increase for `h < 0` and decrease for `h > 0`.
    pub fn for_h_sign(sign: f64) -> Self {
        if sign < 0.0 {
            Direction::NonDecreasing
        } else {
            Direction::NonIncreasing
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotoneOutcome {
    pub pass: bool,
    /// Smallest consecutive difference taken in the expected direction.
    pub worst_slack: f64,
    /// Index `k` of the worst pair `(k, k+1)`.
    pub worst_index: usize,
    /// Last minus first value.
    pub total_change: f64,
}

/// Consecutive-difference monotonicity with slack `tolerance`.
pub fn verify_monotone(series: &[f64], direction: Direction, tolerance: f64) -> Result<MonotoneOutcome> {
    if series.is_empty() {
        return Err(Error::Invalid("empty series".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("series has non-finite values".into()));
    }
    let sign = match direction {
        Direction::NonDecreasing => 1.0,
        Direction::NonIncreasing => -1.0,
    };
    let mut worst = (f64::INFINITY, 0);
    for (k, w) in series.windows(2).enumerate() {
        let s = sign * (w[1] - w[0]);
        if s < worst.0 {
            worst = (s, k);
        }
    }
    if series.len() == 1 {
        worst = (0.0, 0);
    }
    Ok(MonotoneOutcome {
        pass: worst.0 >= -tolerance,
        worst_slack: worst.0,
        worst_index: worst.1,
        total_change: series[series.len() - 1] - series[0],
    })
}
