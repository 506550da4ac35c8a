//! Simulation configuration, read from TOML with one section per concern.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sdag_analysis::DelayCurve;
use sdag_core::Hash256;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    /// Syntax errors and unknown keys; the message carries line and column.
    #[error("{0}")]
    Parse(String),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    None,
    /// Withhold own milestones on a private branch and release it once it
    /// is longer than the public chain and displaces at least `depth`
    /// public milestones.
    PrivateMilestoneFork { depth: u32 },
    /// Build one private milestone chain from genesis for the whole run
    /// and compare its height with the public chain at the horizon.
    PrivateMilestoneRace,
    /// Mine blocks under the victim's peer id, forking its peer chain at a
    /// confirmed interior block.
    PeerChainFork { victim: u32 },
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::None => write!(f, "none"),
            Strategy::PrivateMilestoneFork { depth } => write!(f, "private-milestone-fork:{depth}"),
            Strategy::PrivateMilestoneRace => write!(f, "private-milestone-race"),
            Strategy::PeerChainFork { victim } => write!(f, "peer-chain-fork:{victim}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |default: u32| -> Result<u32, String> {
            arg.map_or(Ok(default), |a| a.trim().parse().map_err(|_| format!("bad argument `{a}`")))
        };
        match name.trim() {
            "none" => Ok(Strategy::None),
            "private-milestone-fork" => Ok(Strategy::PrivateMilestoneFork { depth: num(13)? }),
            "private-milestone-race" => Ok(Strategy::PrivateMilestoneRace),
            "peer-chain-fork" => Ok(Strategy::PeerChainFork { victim: num(0)? }),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub n: u32,
    pub mu: f64,
    pub p: f64,
    pub c: f64,
    pub lambda: f64,
    pub delay_curve: DelayCurve,
    pub t0: f64,
    pub adversary_share: f64,
    pub adversary_strategy: Strategy,
    pub horizon: f64,
    pub seed: u64,
    /// Regular-block difficulty as a fraction of the hash space.
    pub d: f64,
    pub fee: u64,
    /// Samples before this time are discarded.
    pub warmup: f64,
    /// Blocks created in the last `tail` seconds are left out of the
    /// infection samples, which would otherwise be censored.
    pub tail: f64,
    pub sample_interval: f64,
    pub prefix_depth: u32,
    pub trace: bool,
}

impl Default for SimConfig {
    /// Desk-scale network: 100 miners at 0.1 blocks/s, one milestone per
    /// ten seconds, 8 tx/s.
    fn default() -> Self {
        SimConfig {
            n: 100,
            mu: 0.1,
            p: 0.01,
            c: 1.0,
            lambda: 8.0,
            delay_curve: DelayCurve::Quadratic { t0: 2.0 },
            t0: 2.0,
            adversary_share: 0.0,
            adversary_strategy: Strategy::None,
            horizon: 2000.0,
            seed: 1,
            d: 0.5,
            fee: 1,
            warmup: 200.0,
            tail: 200.0,
            sample_interval: 10.0,
            prefix_depth: 13,
            trace: false,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileForm {
    network: Network,
    delay: Delay,
    #[serde(default)]
    adversary: Adversary,
    run: Run,
    #[serde(default)]
    metrics: Metrics,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Network {
    n: u32,
    mu: f64,
    p: f64,
    c: f64,
    lambda: f64,
    #[serde(default = "default_d")]
    d: f64,
    #[serde(default = "default_fee")]
    fee: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Delay {
    delay_curve: String,
    t0: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Adversary {
    #[serde(default)]
    adversary_share: f64,
    #[serde(default = "default_strategy")]
    adversary_strategy: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Run {
    horizon: f64,
    seed: u64,
    #[serde(default)]
    trace: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metrics {
    #[serde(default = "default_warmup")]
    warmup: f64,
    #[serde(default = "default_warmup")]
    tail: f64,
    #[serde(default = "default_interval")]
    sample_interval: f64,
    #[serde(default = "default_depth")]
    prefix_depth: u32,
}

impl Default for Adversary {
    fn default() -> Self {
        Adversary { adversary_share: 0.0, adversary_strategy: default_strategy() }
    }
}

impl Default for Metrics {
    fn default() -> Self {
        Metrics { warmup: default_warmup(), tail: default_warmup(), sample_interval: default_interval(), prefix_depth: default_depth() }
    }
}

fn default_d() -> f64 {
    0.5
}
fn default_fee() -> u64 {
    1
}
fn default_strategy() -> String {
    "none".into()
}
fn default_warmup() -> f64 {
    200.0
}
fn default_interval() -> f64 {
    10.0
}
fn default_depth() -> u32 {
    13
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let f: FileForm = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let delay_curve = DelayCurve::new(&f.delay.delay_curve, f.delay.t0)
            .map_err(|e| invalid("delay_curve", e.to_string()))?;
        let adversary_strategy = f.adversary.adversary_strategy.parse().map_err(|e: String| invalid("adversary_strategy", e))?;
        let cfg = SimConfig {
            n: f.network.n,
            mu: f.network.mu,
            p: f.network.p,
            c: f.network.c,
            lambda: f.network.lambda,
            delay_curve,
            t0: f.delay.t0,
            adversary_share: f.adversary.adversary_share,
            adversary_strategy,
            horizon: f.run.horizon,
            seed: f.run.seed,
            d: f.network.d,
            fee: f.network.fee,
            warmup: f.metrics.warmup,
            tail: f.metrics.tail,
            sample_interval: f.metrics.sample_interval,
            prefix_depth: f.metrics.prefix_depth,
            trace: f.run.trace,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    /// Canonical TOML; parsing it back yields an equal config.
    pub fn to_toml(&self) -> String {
        let f = FileForm {
            network: Network { n: self.n, mu: self.mu, p: self.p, c: self.c, lambda: self.lambda, d: self.d, fee: self.fee },
            delay: Delay { delay_curve: self.delay_curve.name().to_string(), t0: self.t0 },
            adversary: Adversary {
                adversary_share: self.adversary_share,
                adversary_strategy: self.adversary_strategy.to_string(),
            },
            run: Run { horizon: self.horizon, seed: self.seed, trace: self.trace },
            metrics: Metrics {
                warmup: self.warmup,
                tail: self.tail,
                sample_interval: self.sample_interval,
                prefix_depth: self.prefix_depth,
            },
        };
        toml::to_string(&f).expect("config serializes")
    }

    pub fn digest(&self) -> Hash256 {
        Hash256::digest(self.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(invalid("n", "need at least one peer"));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid("mu", "must be positive"));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(invalid("p", "must lie in (0, 1]"));
        }
        if !(self.d > 0.0 && self.d <= 1.0) {
            return Err(invalid("d", "must lie in (0, 1]"));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(invalid("c", "must be nonnegative"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", "must be nonnegative"));
        }
        let mismatch = self.delay_curve != DelayCurve::Instant && self.delay_curve.t0() != self.t0;
        if !(self.t0 >= 0.0 && self.t0.is_finite()) || mismatch {
            return Err(invalid("t0", "must be nonnegative and match the delay curve"));
        }
        if !(0.0..1.0).contains(&self.adversary_share) {
            return Err(invalid("adversary_share", "must lie in [0, 1)"));
        }
        match self.adversary_strategy {
            Strategy::None if self.adversary_share > 0.0 => {
                return Err(invalid("adversary_strategy", "a positive adversary share needs a strategy"))
            }
            Strategy::PeerChainFork { victim } if victim >= self.n => {
                return Err(invalid("adversary_strategy", format!("victim {victim} is not one of the {} peers", self.n)))
            }
            _ => {}
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", "must be positive"));
        }
        if !(self.sample_interval > 0.0) {
            return Err(invalid("sample_interval", "must be positive"));
        }
        if self.warmup < 0.0 || self.tail < 0.0 {
            return Err(invalid("warmup", "warmup and tail must be nonnegative"));
        }
        Ok(())
    }

    /// Per-peer mining rates: honest peers first, then the adversary if any.
    pub fn rates(&self) -> Vec<f64> {
        let total = self.n as f64 * self.mu;
        let honest = (1.0 - self.adversary_share) * self.mu;
        let mut r = vec![honest; self.n as usize];
        if self.adversary_strategy != Strategy::None {
            r.push(self.adversary_share * total);
        }
        r
    }

    /// Mean delivery delay.
    pub fn t_bar(&self) -> f64 {
        self.delay_curve.mean()
    }
}
