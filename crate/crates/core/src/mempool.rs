//! Outstanding transactions and the distance-based assignment rule.

use std::collections::{BTreeSet, HashSet};
use std::hash::BuildHasherDefault;

use crate::block::{tx_distance, PeerId};
use crate::dag::{IdHasher, IdMap, SDag};
use crate::hash::Hash256;
use crate::params::Threshold;
use crate::tx::Transaction;

#[derive(Clone, Debug, PartialEq)]
pub struct MempoolEntry {
    pub tx: Transaction,
    pub fee: u64,
    pub arrival: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Mempool {
    txs: IdMap<MempoolEntry>,
    removed: HashSet<Hash256, BuildHasherDefault<IdHasher>>,
    capacity: Option<usize>,
}

impl Mempool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity_limit(capacity: usize) -> Self {
        Mempool { capacity: Some(capacity), ..Self::default() }
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    pub fn contains(&self, id: &Hash256) -> bool {
        self.txs.contains_key(id)
    }

    pub fn get(&self, id: &Hash256) -> Option<&MempoolEntry> {
        self.txs.get(id)
    }

    /// Insert a transaction; returns false for duplicates, ids already
    /// removed, or a full pool.
    pub fn add_tx(&mut self, tx: Transaction, fee: u64, now: f64) -> bool {
        let id = tx.id();
        self.add_with_id(id, tx, fee, now)
    }

    pub fn add_with_id(&mut self, id: Hash256, tx: Transaction, fee: u64, now: f64) -> bool {
        if self.txs.contains_key(&id) || self.removed.contains(&id) {
            return false;
        }
        if self.capacity.is_some_and(|c| self.txs.len() >= c) {
            return false;
        }
        self.txs.insert(id, MempoolEntry { tx, fee, arrival: now });
        true
    }

    /// Remove `id`, also blocking it from later re-insertion. Idempotent.
    pub fn remove_tx(&mut self, id: &Hash256) -> Option<MempoolEntry> {
        self.removed.insert(*id);
        self.txs.remove(id)
    }

    pub fn ids(&self) -> BTreeSet<Hash256> {
        self.txs.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Hash256, &MempoolEntry)> {
        self.txs.iter()
    }

    /// Transactions with distance from `head` at most `c*q`, by fee
    /// descending then id.
    pub fn workable(&self, head: &Hash256, c: f64, q: f64) -> Vec<Hash256> {
        let bound = Threshold::at_most_f64(c * q);
        let mut v: Vec<(u64, Hash256)> = self
            .txs
            .iter()
            .filter(|(_, e)| bound.accepts(&tx_distance(head, &e.tx)))
            .map(|(id, e)| (e.fee, *id))
            .collect();
        v.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        v.into_iter().map(|(_, id)| id).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HashPowerEstimate {
    pub miner: PeerId,
    pub q: f64,
    /// Level sets actually counted.
    pub window: usize,
}

/// Share of `miner` among blocks in the last `window` main-chain level sets.
/// With no blocks to count, every peer seen so far gets an equal share.
pub fn estimate_power(sdag: &SDag, miner: &PeerId, window: usize) -> HashPowerEstimate {
    let window = window.max(1);
    let top = sdag.level_count();
    let lo = top.saturating_sub(window).max(1);
    let (mut mine, mut total) = (0usize, 0usize);
    for k in lo..top {
        for id in sdag.level(k) {
            total += 1;
            if sdag.get(&id).is_some_and(|b| b.peer == *miner) {
                mine += 1;
            }
        }
    }
    if total == 0 {
        let g = sdag.genesis_id();
        let mut peers: BTreeSet<PeerId> = sdag.blocks().filter(|(id, _)| **id != g).map(|(_, b)| b.peer).collect();
        peers.insert(*miner);
        return HashPowerEstimate { miner: *miner, q: 1.0 / peers.len() as f64, window: 0 };
    }
    HashPowerEstimate { miner: *miner, q: mine as f64 / total as f64, window: top - lo }
}

/// Probability that a transaction is workable for two or more miners,
/// `1 - e^-c - c e^-c`.
pub fn collision_prob(c: f64) -> f64 {
    1.0 - (-c).exp() - c * (-c).exp()
}

/// Probability that no miner finds a transaction workable, `e^-c`.
pub fn no_worker_prob(c: f64) -> f64 {
    (-c).exp()
}

/// `prod_i (1 - c q_i)`.
pub fn no_worker_exact(c: f64, q: &[f64]) -> f64 {
    q.iter().map(|qi| 1.0 - c * qi).product()
}

/// `sum_i c q_i prod_{j != i} (1 - c q_j)`.
pub fn one_worker_exact(c: f64, q: &[f64]) -> f64 {
    let n = q.len();
    // prefix/suffix products avoid dividing by a possibly zero factor
    let mut pre = vec![1.0; n + 1];
    for i in 0..n {
        pre[i + 1] = pre[i] * (1.0 - c * q[i]);
    }
    let mut suf = 1.0;
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc += c * q[i] * pre[i] * suf;
        suf *= 1.0 - c * q[i];
    }
    acc
}

pub fn collision_exact(c: f64, q: &[f64]) -> f64 {
    1.0 - no_worker_exact(c, q) - one_worker_exact(c, q)
}
