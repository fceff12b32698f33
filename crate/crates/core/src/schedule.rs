//! Step-size schedules for the two coupled timescales.
//!
//! The fast timescale (value and advantage critics) uses `α_n`, the slow one
//! (actor) uses `β_n`. Under a polynomial schedule `α_n = α0 (n+1)^-pf` and
//! `β_n = β0 (n+1)^-ps` with `0.5 < pf < ps ≤ 1`, so `Σα = Σβ = ∞`,
//! `Σ(α+β)² < ∞` and `β_n/α_n → 0`.

use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant,
    Polynomial { p_fast: f64, p_slow: f64 },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Constant
    }
}

impl StepSchedule {
    pub fn polynomial(p_fast: f64, p_slow: f64) -> Result<Self> {
        let s = StepSchedule::Polynomial { p_fast, p_slow };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Constant => Ok(()),
            StepSchedule::Polynomial { p_fast, p_slow } => {
                if 0.5 < p_fast && p_fast < p_slow && p_slow <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "polynomial schedule needs 0.5 < p_fast < p_slow <= 1, got ({p_fast}, {p_slow})"
                    )))
                }
            }
        }
    }

    /// Multiplier applied to fast-timescale base rates at index `n`.
    pub fn fast(&self, n: u64) -> f64 {
        match *self {
            StepSchedule::Constant => 1.0,
            StepSchedule::Polynomial { p_fast, .. } => ((n + 1) as f64).powf(-p_fast),
        }
    }

    /// Multiplier applied to the actor's base rate at index `n`.
    pub fn slow(&self, n: u64) -> f64 {
        match *self {
            StepSchedule::Constant => 1.0,
            StepSchedule::Polynomial { p_slow, .. } => ((n + 1) as f64).powf(-p_slow),
        }
    }
}

impl FromStr for StepSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "constant" {
            return Ok(StepSchedule::Constant);
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 3 && parts[0] == "poly" {
            let parse = |t: &str| {
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad schedule exponent {t:?}")))
            };
            return StepSchedule::polynomial(parse(parts[1])?, parse(parts[2])?);
        }
        Err(Error::Parse(format!("unknown schedule {s:?}; expected constant or poly:<pf>:<ps>")))
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSchedule::Constant => write!(f, "constant"),
            StepSchedule::Polynomial { p_fast, p_slow } => write!(f, "poly:{p_fast}:{p_slow}"),
        }
    }
}
