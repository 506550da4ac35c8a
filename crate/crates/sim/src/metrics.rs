//! Run outputs and the summary statistics reported for them.

use std::fmt::Write;

use sdag_analysis::format::sig12;
use sdag_core::Hash256;

use crate::event::EventKind;

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub peer: Option<usize>,
    pub kind: &'static str,
    pub block: Option<Hash256>,
}

impl TraceRow {
    pub fn new(time: f64, kind: &EventKind, block: Option<Hash256>) -> Self {
        let p = kind.peer();
        TraceRow { time, peer: (p != usize::MAX).then_some(p), kind: kind.label(), block }
    }

    pub(crate) fn bytes(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(56);
        v.extend_from_slice(&self.time.to_bits().to_le_bytes());
        v.extend_from_slice(&(self.peer.map_or(u64::MAX, |p| p as u64)).to_le_bytes());
        v.extend_from_slice(self.kind.as_bytes());
        if let Some(b) = self.block {
            v.extend_from_slice(&b.0);
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinerShare {
    pub peer: usize,
    pub power_share: f64,
    pub reward: u64,
    pub reward_share: f64,
    pub blocks: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttackStats {
    /// Private branches started, or forked blocks mined.
    pub attempts: u64,
    /// Releases that displaced at least the configured depth.
    pub successes: u64,
    pub abandoned: u64,
    pub attacker_blocks: u64,
    /// Ledger reward of blocks the attacker mined, at the observer.
    pub attacker_reward: u64,
    /// Largest number of public milestones displaced by one release.
    pub max_displaced: u32,
    /// Private minus public milestone height at the horizon, for the
    /// persistent race.
    pub race_lead: Option<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimMetrics {
    pub seed: u64,
    pub horizon: f64,
    pub blocks: u64,
    pub milestones: u64,
    pub main_height: u32,
    pub tps_effective: f64,
    /// Blocks carrying a normal transaction.
    pub tx_blocks: u64,
    /// Of those, blocks whose transaction an earlier block already carried.
    pub duplicate_blocks: u64,
    pub duplicate_tx_fraction: f64,
    pub queueing_latency: Vec<f64>,
    pub infection_latency: Vec<f64>,
    /// Transactions not yet in any block, sampled after warm-up.
    pub mempool_samples: Vec<f64>,
    /// Share of milestones that are not on the observer's main chain.
    pub milestone_fork_rate: f64,
    pub prefix_depth: u32,
    pub common_prefix_violations: u64,
    pub reward_shares: Vec<MinerShare>,
    pub reward_total: u64,
    /// Sum of squared per-block rewards, for the share variance.
    pub reward_sq_sum: f64,
    pub reorgs: u64,
    pub max_reorg: u32,
    pub attack: AttackStats,
    /// Honest peers hold the same main chain after the final deliveries.
    /// An exact tie at the top milestone is not counted as disagreement.
    pub final_agreement: bool,
    pub final_utxo_agreement: bool,
    pub trace_digest: Hash256,
    pub trace: Vec<TraceRow>,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and batch-means standard error; falls back to the i.i.d. error
/// when there are too few samples for the requested batches.
pub fn mean_se(xs: &[f64], batches: usize) -> (f64, f64) {
    let m = mean(xs);
    let n = xs.len();
    if n < 2 {
        return (m, f64::NAN);
    }
    let b = batches.clamp(2, n);
    let size = n / b;
    if size < 2 {
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        return (m, (var / n as f64).sqrt());
    }
    let means: Vec<f64> = (0..b).map(|i| mean(&xs[i * size..(i + 1) * size])).collect();
    let mm = mean(&means);
    let var = means.iter().map(|x| (x - mm).powi(2)).sum::<f64>() / (b - 1) as f64;
    (m, (var / b as f64).sqrt())
}

impl SimMetrics {
    pub fn duplicate_se(&self) -> f64 {
        let f = self.duplicate_tx_fraction;
        (f * (1.0 - f) / self.tx_blocks.max(1) as f64).sqrt()
    }

    pub fn mean_queueing(&self) -> f64 {
        mean(&self.queueing_latency)
    }

    pub fn mean_infection(&self) -> (f64, f64) {
        mean_se(&self.infection_latency, 20)
    }

    pub fn mean_mempool(&self) -> (f64, f64) {
        mean_se(&self.mempool_samples, 10)
    }

    /// Standard deviation of a miner's reward share under independent
    /// block ownership with probability `power_share`.
    pub fn share_sigma(&self, power_share: f64) -> f64 {
        if self.reward_total == 0 {
            return f64::NAN;
        }
        (power_share * (1.0 - power_share) * self.reward_sq_sum).sqrt() / self.reward_total as f64
    }

    pub fn csv_header() -> &'static str {
        "seed,horizon,blocks,milestones,main_height,tps_effective,tx_blocks,duplicate_blocks,duplicate_tx_fraction,\
         mean_queueing_latency,mean_infection_latency,mean_mempool,milestone_fork_rate,common_prefix_violations,\
         reorgs,max_reorg,attack_attempts,attack_successes,attacker_reward,final_agreement,trace_digest"
    }

    pub fn csv_row(&self) -> String {
        let g = sig12;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            g(self.horizon),
            self.blocks,
            self.milestones,
            self.main_height,
            g(self.tps_effective),
            self.tx_blocks,
            self.duplicate_blocks,
            g(self.duplicate_tx_fraction),
            g(self.mean_queueing()),
            g(self.mean_infection().0),
            g(self.mean_mempool().0),
            g(self.milestone_fork_rate),
            self.common_prefix_violations,
            self.reorgs,
            self.max_reorg,
            self.attack.attempts,
            self.attack.successes,
            self.attack.attacker_reward,
            self.final_agreement,
            self.trace_digest,
        )
    }

    /// One column of samples per file: `sample` header then values.
    pub fn samples_csv(samples: &[f64]) -> String {
        let mut s = String::from("sample\n");
        for x in samples {
            let _ = writeln!(s, "{}", sig12(*x));
        }
        s
    }

    pub fn shares_csv(&self) -> String {
        let mut s = String::from("peer,power_share,reward,reward_share,blocks\n");
        for m in &self.reward_shares {
            let _ = writeln!(s, "{},{},{},{},{}", m.peer, sig12(m.power_share), m.reward, sig12(m.reward_share), m.blocks);
        }
        s
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::from("time,peer,event,block\n");
        for r in &self.trace {
            let peer = r.peer.map(|p| p.to_string()).unwrap_or_default();
            let block = r.block.map(|b| b.to_hex()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", sig12(r.time), peer, r.kind, block);
        }
        s
    }
}
