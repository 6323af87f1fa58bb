use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slowly varying function models. All of them are functions of `ln u`
/// and use `max(ln u, 1)` so they stay positive and smooth near `u <= e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlowlyVaryingSpec {
    /// `L(u) = value`.
    Constant { value: f64 },
    /// `L(u) = max(ln u, 1)^beta`.
    LogPower { beta: f64 },
    /// `L(u) = 1 + ln(max(ln u, 1))`.
    LogLog,
}

impl Default for SlowlyVaryingSpec {
    fn default() -> Self {
        SlowlyVaryingSpec::Constant { value: 1.0 }
    }
}

impl SlowlyVaryingSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SlowlyVaryingSpec::Constant { value } if !(value > 0.0 && value.is_finite()) => Err(
                Error::SpecInvalid(format!("constant slowly varying function must be positive, got {value}")),
            ),
            SlowlyVaryingSpec::LogPower { beta } if !(beta >= 0.0 && beta.is_finite()) => Err(
                Error::SpecInvalid(format!("log-power exponent must be nonnegative, got {beta}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn is_unbounded(&self) -> bool {
        match *self {
            SlowlyVaryingSpec::Constant { .. } => false,
            SlowlyVaryingSpec::LogPower { beta } => beta > 0.0,
            SlowlyVaryingSpec::LogLog => true,
        }
    }

    /// `ln L(u)` given `ln u`.
    pub fn ln_eval_at_log(&self, ln_u: f64) -> f64 {
        let l = ln_u.max(1.0);
        match *self {
            SlowlyVaryingSpec::Constant { value } => value.ln(),
            SlowlyVaryingSpec::LogPower { beta } => beta * l.ln(),
            SlowlyVaryingSpec::LogLog => (1.0 + l.ln()).ln(),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.ln_eval_at_log(u.ln()).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_and_boundedness() {
        let c = SlowlyVaryingSpec::Constant { value: 2.0 };
        assert_eq!(c.eval(1e9), 2.0);
        assert!(!c.is_unbounded());

        let lp = SlowlyVaryingSpec::LogPower { beta: 1.0 };
        assert!((lp.eval(100.0) - 100f64.ln()).abs() < 1e-12);
        assert_eq!(lp.eval(2.0), 1.0);
        assert!(lp.is_unbounded());
        assert!(!SlowlyVaryingSpec::LogPower { beta: 0.0 }.is_unbounded());

        let ll = SlowlyVaryingSpec::LogLog;
        assert_eq!(ll.eval(2.0), 1.0);
        assert!((ll.eval(1e10) - (1.0 + 1e10f64.ln().ln())).abs() < 1e-12);
    }

    #[test]
    fn slow_variation_spot_check() {
        for l in [
            SlowlyVaryingSpec::Constant { value: 3.0 },
            SlowlyVaryingSpec::LogPower { beta: 2.0 },
            SlowlyVaryingSpec::LogLog,
        ] {
            let far = (1e300f64).ln();
            let r = (l.ln_eval_at_log(far + 2f64.ln()) - l.ln_eval_at_log(far)).exp();
            assert!((r - 1.0).abs() < 1e-2, "{l:?}: {r}");
        }
    }

    #[test]
    fn validation() {
        assert!(SlowlyVaryingSpec::Constant { value: 0.0 }.validate().is_err());
        assert!(SlowlyVaryingSpec::LogPower { beta: -1.0 }.validate().is_err());
        assert!(SlowlyVaryingSpec::LogLog.validate().is_ok());
    }

    #[test]
    fn serde_tags() {
        let s: SlowlyVaryingSpec = serde_json::from_str(r#"{"kind":"log_power","beta":1.0}"#).unwrap();
        assert_eq!(s, SlowlyVaryingSpec::LogPower { beta: 1.0 });
        let s: SlowlyVaryingSpec = serde_json::from_str(r#"{"kind":"log_log"}"#).unwrap();
        assert_eq!(s, SlowlyVaryingSpec::LogLog);
    }
}
