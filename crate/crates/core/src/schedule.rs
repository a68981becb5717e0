//! Time-dependent coefficients `α(t)` and `a(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `a0` or `a0·e^{-βt}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    Constant { a0: f64 },
    Exponential { a0: f64, beta: f64 },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Constant { a0: 0.0 }
    }
}

impl Schedule {
    pub fn constant(a0: f64) -> Self {
        Schedule::Constant { a0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Constant { a0 } if !a0.is_finite() => Err(Error::Domain("schedule value must be finite".into())),
            Schedule::Exponential { a0, beta } if !a0.is_finite() || !beta.is_finite() => {
                Err(Error::Domain("schedule parameters must be finite".into()))
            }
            Schedule::Exponential { beta, .. } if beta < 0.0 => {
                Err(Error::Domain(format!("decay rate β must be non-negative, got {beta}")))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Schedule::Constant { a0 } => a0,
            Schedule::Exponential { a0, beta } => a0 * (-beta * t).exp(),
        }
    }

    /// `∫_{t0}^{t1} value`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        match *self {
            Schedule::Constant { a0 } => a0 * (t1 - t0),
            Schedule::Exponential { a0, beta: 0.0 } => a0 * (t1 - t0),
            Schedule::Exponential { a0, beta } => a0 * ((-beta * t0).exp() - (-beta * t1).exp()) / beta,
        }
    }

    /// Smallest value on `[t0, t1]`.
    pub fn min_on(&self, t0: f64, t1: f64) -> f64 {
        self.value(t0).min(self.value(t1))
    }

    pub fn is_non_increasing(&self) -> bool {
        match *self {
            Schedule::Constant { .. } => true,
            Schedule::Exponential { a0, .. } => a0 >= 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Schedule::Constant { a0 } | Schedule::Exponential { a0, .. } => a0 == 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_integral() {
        let s = Schedule::Exponential { a0: 2.0, beta: 3.0 };
        assert_relative_eq!(s.integral(0.0, 1.0), 2.0 * (1.0 - (-3.0f64).exp()) / 3.0, max_relative = 1e-15);
        assert_eq!(Schedule::Exponential { a0: 2.0, beta: 0.0 }.integral(1.0, 2.5), 3.0);
    }

    #[test]
    fn monotone_and_validation() {
        assert!(Schedule::Exponential { a0: 1.0, beta: 0.5 }.is_non_increasing());
        assert!(!Schedule::Exponential { a0: -1.0, beta: 0.5 }.is_non_increasing());
        assert!(Schedule::Exponential { a0: 1.0, beta: -0.5 }.validate().is_err());
    }

    #[test]
    fn parses_tagged_json() {
        let s: Schedule = serde_json::from_str(r#"{"kind":"exponential","a0":1,"beta":2}"#).unwrap();
        assert_eq!(s, Schedule::Exponential { a0: 1.0, beta: 2.0 });
    }
}
