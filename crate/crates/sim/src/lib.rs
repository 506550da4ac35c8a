//! Discrete-event simulator: Poisson mining over `n` peers, broadcast
//! delays drawn from a delay curve, the honest node protocol and two
//! attacker strategies.

mod adversary;
pub mod config;
pub mod event;
pub mod metrics;
pub mod sim;

pub use config::{ConfigError, SimConfig, Strategy};
pub use metrics::{mean, mean_se, AttackStats, MinerShare, SimMetrics, TraceRow};
pub use sim::{run, SimError, Simulation};
