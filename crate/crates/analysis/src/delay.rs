//! Broadcast delay curves: `F(t)` is the fraction of peers holding a message
//! `t` seconds after it was sent, with `F(t0) = 1`.

use std::fmt;
use std::str::FromStr;

use crate::{domain, AnalysisError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DelayCurve {
    /// `F(t) = (t/t0)(2 - t/t0)`; with `t0 = 2` this is `t - t^2/4`.
    Quadratic { t0: f64 },
    /// `F(t) = t/t0`.
    Uniform { t0: f64 },
    /// Everyone has the message immediately.
    Instant,
    /// Nobody has it before `t0`, everyone at `t0`.
    Step { t0: f64 },
}

impl DelayCurve {
    pub fn new(name: &str, t0: f64) -> Result<Self, AnalysisError> {
        if !(t0.is_finite() && t0 >= 0.0) {
            return Err(domain(format!("t0 must be a finite non-negative number, got {t0}")));
        }
        let c = match name {
            "quadratic" | "polynomial" => DelayCurve::Quadratic { t0 },
            "uniform" | "linear" => DelayCurve::Uniform { t0 },
            "instant" => DelayCurve::Instant,
            "step" => DelayCurve::Step { t0 },
            other => return Err(domain(format!("unknown delay curve {other:?}"))),
        };
        if t0 == 0.0 && !matches!(c, DelayCurve::Instant) {
            return Err(domain("t0 must be positive for a non-instant curve"));
        }
        Ok(c)
    }

    pub fn name(&self) -> &'static str {
        match self {
            DelayCurve::Quadratic { .. } => "quadratic",
            DelayCurve::Uniform { .. } => "uniform",
            DelayCurve::Instant => "instant",
            DelayCurve::Step { .. } => "step",
        }
    }

    pub fn t0(&self) -> f64 {
        match *self {
            DelayCurve::Quadratic { t0 } | DelayCurve::Uniform { t0 } | DelayCurve::Step { t0 } => t0,
            DelayCurve::Instant => 0.0,
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            DelayCurve::Instant => 1.0,
            DelayCurve::Quadratic { t0 } => {
                let s = (t / t0).min(1.0);
                s * (2.0 - s)
            }
            DelayCurve::Uniform { t0 } => (t / t0).min(1.0),
            DelayCurve::Step { t0 } => {
                if t >= t0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Delay for a uniform draw `u` in `[0, 1)`.
    pub fn inverse(&self, u: f64) -> f64 {
        match *self {
            DelayCurve::Instant => 0.0,
            DelayCurve::Quadratic { t0 } => t0 * (1.0 - (1.0 - u).max(0.0).sqrt()),
            DelayCurve::Uniform { t0 } => t0 * u,
            DelayCurve::Step { t0 } => t0,
        }
        .clamp(0.0, self.t0())
    }

    /// `integral t dF(t)`, the mean delay.
    pub fn mean(&self) -> f64 {
        match *self {
            DelayCurve::Instant => 0.0,
            DelayCurve::Quadratic { t0 } => t0 / 3.0,
            DelayCurve::Uniform { t0 } => t0 / 2.0,
            DelayCurve::Step { t0 } => t0,
        }
    }
}

impl fmt::Display for DelayCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name(), self.t0())
    }
}

/// `name` or `name:t0`; a bare name takes `t0 = 2`.
impl FromStr for DelayCurve {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, t0) = match s.split_once(':') {
            Some((n, t)) => (n, t.trim().parse::<f64>().map_err(|e| domain(format!("bad t0 {t:?}: {e}")))?),
            None => (s, 2.0),
        };
        DelayCurve::new(name.trim(), t0)
    }
}
