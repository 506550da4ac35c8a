//! The discrete-event loop.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use sdag_core::crypto::{Keypair, MockScheme};
use sdag_core::dag::IdMap;
use sdag_core::ledger::LedgerConfig;
use sdag_core::node::{InboundEvent, Node, NodeConfig};
use sdag_core::params::ParamsError;
use sdag_core::{Block, BlockClass, Hash256, OutPoint, Params, PeerId, SDag, TieBreak, Transaction, TxInput, TxKind, TxOutput};
use thiserror::Error;

use crate::adversary::{Adversary, PeerFork, PrivateFork, Step};
use crate::config::{ConfigError, SimConfig, Strategy};
use crate::event::{EventKind, EventQueue};
use crate::metrics::{MinerShare, SimMetrics, TraceRow};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("protocol parameters: {0}")]
    Params(#[from] ParamsError),
}

const ALLOCATION_VALUE: u64 = 1_000;

struct CreatedRec {
    peer: usize,
    time: f64,
}

struct PendingTx {
    arrival: f64,
    included: bool,
}

pub struct Simulation {
    cfg: SimConfig,
    honest: usize,
    nodes: Vec<Node>,
    peers: Vec<PeerId>,
    rates: Vec<f64>,
    queue: EventQueue,
    rng: ChaCha8Rng,
    client: Keypair,
    arrivals: Vec<f64>,
    txs: Vec<PendingTx>,
    tx_index: IdMap<usize>,
    created: IdMap<CreatedRec>,
    adversary: Option<Adversary>,
    snapshots: Vec<Vec<Hash256>>,
    m: SimMetrics,
    outstanding: usize,
}

fn prefix_ok(a: &[Hash256], b: &[Hash256], k: usize) -> bool {
    let m = a.len().saturating_sub(k);
    m <= b.len() && a[..m] == b[..m]
}

impl Simulation {
    pub fn new(cfg: &SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let params = Params::from_f64(cfg.d, cfg.p, cfg.c)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut arrivals = Vec::new();
        if cfg.lambda > 0.0 {
            let exp = Exp::new(cfg.lambda).expect("positive rate");
            let mut t = exp.sample(&mut rng);
            while t <= cfg.horizon {
                arrivals.push(t);
                t += exp.sample(&mut rng);
            }
        }
        let s = MockScheme;
        let client = Keypair::from_seed(&s, b"sim-client");
        let allocation = vec![TxOutput { value: ALLOCATION_VALUE, address: client.address() }; arrivals.len()];
        let ledger_cfg = LedgerConfig::new(params.clone()).with_allocation(allocation);
        let rates = cfg.rates();
        let honest = cfg.n as usize;
        let mut nodes = Vec::with_capacity(rates.len());
        let mut peers = Vec::with_capacity(rates.len());
        for i in 0..rates.len() {
            let keys = Keypair::from_seed(&s, format!("peer-{i}").as_bytes());
            peers.push(keys.peer_id());
            let sdag = SDag::with_tie_break(params.clone(), TieBreak::FirstSeen);
            nodes.push(Node::new(sdag, keys, ledger_cfg.clone(), NodeConfig::default(), rng.random()));
        }
        let adversary = match cfg.adversary_strategy {
            Strategy::None => None,
            Strategy::PrivateMilestoneFork { depth } => Some(Adversary::PrivateFork(PrivateFork::new(depth))),
            Strategy::PrivateMilestoneRace => Some(Adversary::PrivateFork(PrivateFork::persistent())),
            Strategy::PeerChainFork { victim } => Some(Adversary::PeerFork(PeerFork::new(peers[victim as usize]))),
        };
        let mut queue = EventQueue::new();
        for (i, r) in rates.iter().enumerate() {
            if *r > 0.0 {
                let t = Exp::new(*r).expect("positive rate").sample(&mut rng);
                if t <= cfg.horizon {
                    queue.push(t, EventKind::MineAttemptComplete { peer: i });
                }
            }
        }
        for (index, t) in arrivals.iter().enumerate() {
            queue.push(*t, EventKind::TxArrival { index });
        }
        let m = SimMetrics {
            seed: cfg.seed,
            horizon: cfg.horizon,
            blocks: 0,
            milestones: 0,
            main_height: 0,
            tps_effective: 0.0,
            tx_blocks: 0,
            duplicate_blocks: 0,
            duplicate_tx_fraction: 0.0,
            queueing_latency: Vec::new(),
            infection_latency: Vec::new(),
            mempool_samples: Vec::new(),
            milestone_fork_rate: 0.0,
            prefix_depth: cfg.prefix_depth,
            common_prefix_violations: 0,
            reward_shares: Vec::new(),
            reward_total: 0,
            reward_sq_sum: 0.0,
            reorgs: 0,
            max_reorg: 0,
            attack: Default::default(),
            final_agreement: false,
            final_utxo_agreement: false,
            trace_digest: Hash256::ZERO,
            trace: Vec::new(),
        };
        Ok(Simulation {
            cfg: cfg.clone(),
            honest,
            snapshots: vec![Vec::new(); honest],
            nodes,
            peers,
            rates,
            queue,
            rng,
            client,
            arrivals,
            txs: Vec::new(),
            tx_index: IdMap::default(),
            created: IdMap::default(),
            adversary,
            m,
            outstanding: 0,
        })
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut Node {
        &mut self.nodes[i]
    }

    pub fn peer_count(&self) -> usize {
        self.nodes.len()
    }

    fn trace(&mut self, time: f64, kind: &EventKind, block: Option<Hash256>) {
        let row = TraceRow::new(time, kind, block);
        self.m.trace_digest = Hash256::digest_parts(&[&self.m.trace_digest.0, &row.bytes()]);
        if self.cfg.trace {
            self.m.trace.push(row);
        }
    }

    fn broadcast(&mut self, from: usize, block: Arc<Block>, id: Hash256, now: f64) {
        for to in 0..self.nodes.len() {
            if to != from {
                let delay = self.cfg.delay_curve.inverse(self.rng.random::<f64>());
                self.queue.push(now + delay, EventKind::Deliver { block: block.clone(), id, to });
            }
        }
    }

    fn record(&mut self, id: Hash256, block: &Block, class: BlockClass, peer: usize, now: f64) {
        self.created.insert(id, CreatedRec { peer, time: now });
        self.m.blocks += 1;
        if class == BlockClass::Milestone {
            self.m.milestones += 1;
        }
        if block.mes.kind != TxKind::Normal {
            return;
        }
        let Some(&ix) = self.tx_index.get(&block.mes.id()) else { return };
        let counted = now >= self.cfg.warmup;
        if counted {
            self.m.tx_blocks += 1;
        }
        let tx = &mut self.txs[ix];
        if tx.included {
            if counted {
                self.m.duplicate_blocks += 1;
            }
        } else {
            tx.included = true;
            self.outstanding -= 1;
            if tx.arrival >= self.cfg.warmup {
                self.m.queueing_latency.push(now - tx.arrival);
            }
        }
    }

    fn make_tx(&self, index: usize) -> Transaction {
        let prev = OutPoint { txid: sdag_core::genesis_id(), index: index as u32 };
        let out = TxOutput { value: ALLOCATION_VALUE - self.cfg.fee.min(ALLOCATION_VALUE), address: self.client.address() };
        let mut tx = Transaction::normal(vec![TxInput { prev, witness: Vec::new() }], vec![out]);
        tx.inputs[0].witness = self.client.witness(&MockScheme, &tx.sighash());
        tx
    }

    fn sample(&mut self, t: f64) {
        if t >= self.cfg.warmup {
            self.m.mempool_samples.push(self.outstanding as f64);
        }
        let k = self.cfg.prefix_depth as usize;
        let reference = self.nodes[0].sdag.main_chain();
        for i in 0..self.honest {
            let chain = if i == 0 { reference.clone() } else { self.nodes[i].sdag.main_chain() };
            if !prefix_ok(&self.snapshots[i], &chain, k) {
                self.m.common_prefix_violations += 1;
            }
            if i > 0 && !(prefix_ok(&chain, &reference, k) && prefix_ok(&reference, &chain, k)) {
                self.m.common_prefix_violations += 1;
            }
            self.snapshots[i] = chain;
        }
    }

    fn publish_all(&mut self, from: usize, blocks: Vec<Arc<Block>>, now: f64) {
        for b in blocks {
            let id = b.id();
            self.broadcast(from, b, id, now);
        }
    }

    fn mine(&mut self, peer: usize, now: f64) {
        if peer < self.honest {
            let c = self.nodes[peer].create_block(now);
            self.record(c.id, &c.block, c.class, peer, now);
            self.trace(now, &EventKind::MineAttemptComplete { peer }, Some(c.id));
            self.broadcast(peer, c.block, c.id, now);
        } else {
            let adv = self.adversary.as_mut().expect("adversary peer without a strategy");
            let Step { mined, publish } = adv.on_mine(&mut self.nodes[peer]);
            let id = mined.as_ref().map(|(id, _, _)| *id);
            if let Some((id, b, class)) = mined {
                self.record(id, &b, class, peer, now);
            }
            self.trace(now, &EventKind::MineAttemptComplete { peer }, id);
            self.publish_all(peer, publish, now);
        }
        let next = now + Exp::new(self.rates[peer]).expect("positive rate").sample(&mut self.rng);
        if next <= self.cfg.horizon {
            self.queue.push(next, EventKind::MineAttemptComplete { peer });
        }
    }

    pub fn run(mut self) -> SimMetrics {
        let interval = self.cfg.sample_interval;
        let mut next_sample = interval;
        let mut flushed = false;
        while let Some(ev) = self.queue.pop() {
            while next_sample <= ev.time && next_sample <= self.cfg.horizon {
                self.sample(next_sample);
                next_sample += interval;
            }
            let now = ev.time;
            if now > self.cfg.horizon && !flushed {
                flushed = true;
                self.flush_adversary(self.cfg.horizon);
            }
            match ev.kind {
                EventKind::MineAttemptComplete { peer } => self.mine(peer, now),
                EventKind::TxArrival { index } => {
                    let tx = self.make_tx(index);
                    self.tx_index.insert(tx.id(), self.txs.len());
                    self.txs.push(PendingTx { arrival: self.arrivals[index], included: false });
                    self.outstanding += 1;
                    self.trace(now, &EventKind::TxArrival { index }, None);
                    for n in &mut self.nodes {
                        n.on_event(InboundEvent::TxArrived { tx: tx.clone(), fee: self.cfg.fee }, now);
                    }
                }
                EventKind::Deliver { block, id, to } => {
                    self.trace(now, &EventKind::Deliver { block: block.clone(), id, to }, Some(id));
                    self.nodes[to].on_receive_block(block, now);
                    if to >= self.honest && !flushed {
                        if let Some(adv) = self.adversary.as_mut() {
                            let out = adv.after_receive(&self.nodes[to]);
                            self.publish_all(to, out, now);
                        }
                    }
                }
            }
            if self.queue.is_empty() && !flushed {
                flushed = true;
                self.flush_adversary(now.max(self.cfg.horizon));
            }
        }
        while next_sample <= self.cfg.horizon {
            self.sample(next_sample);
            next_sample += interval;
        }
        self.finish()
    }

    fn flush_adversary(&mut self, now: f64) {
        let public = (0..self.honest).map(|i| self.nodes[i].sdag.height()).max().unwrap_or(0);
        let Some(adv) = self.adversary.as_mut() else { return };
        if let Adversary::PrivateFork(a) = adv {
            if self.cfg.adversary_strategy == Strategy::PrivateMilestoneRace {
                a.stats.race_lead = Some(a.lead(&self.nodes[self.honest], public));
            }
        }
        let out = adv.flush();
        let from = self.honest;
        self.publish_all(from, out, now);
    }

    fn finish(mut self) -> SimMetrics {
        let honest = self.honest;
        let chains: Vec<Vec<Hash256>> = (0..honest).map(|i| self.nodes[i].sdag.main_chain()).collect();
        let reference = &chains[0];
        self.m.final_agreement = chains.iter().all(|c| {
            c.len() == reference.len() && c[..c.len() - 1] == reference[..reference.len() - 1]
        });
        let digests: Vec<Option<Hash256>> = (0..honest)
            .map(|i| (chains[i] == *reference).then(|| self.nodes[i].ledger().utxo_digest()))
            .collect();
        self.m.final_utxo_agreement = digests.iter().flatten().all(|d| Some(*d) == digests[0]);

        let obs = &mut self.nodes[0];
        self.m.main_height = obs.sdag.height();
        self.m.reorgs = obs.stats.switches;
        self.m.max_reorg = obs.stats.max_reorg;
        self.m.milestone_fork_rate =
            if self.m.milestones == 0 { 0.0 } else { 1.0 - self.m.main_height as f64 / self.m.milestones as f64 };

        let ledger = obs.ledger().clone();
        let accepted = ledger.records().iter().filter(|r| r.tx_kind == TxKind::Normal && r.accepted()).count();
        self.m.tps_effective = accepted as f64 / self.cfg.horizon;

        let index: HashMap<PeerId, usize> = self.peers.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let mut reward = vec![0u64; self.nodes.len()];
        let mut blocks = vec![0u64; self.nodes.len()];
        let attacker = self.adversary.as_ref().map(|a| a.mined_ids().clone()).unwrap_or_default();
        let mut attacker_reward = 0;
        for r in ledger.rewards() {
            self.m.reward_total += r.amount;
            self.m.reward_sq_sum += (r.amount as f64).powi(2);
            if attacker.contains(&r.block_id) {
                attacker_reward += r.amount;
                continue;
            }
            if let Some(&i) = index.get(&r.peer) {
                reward[i] += r.amount;
                blocks[i] += 1;
            }
        }
        let total_rate: f64 = self.rates.iter().sum();
        self.m.reward_shares = (0..self.nodes.len())
            .map(|i| MinerShare {
                peer: i,
                power_share: self.rates[i] / total_rate,
                reward: reward[i],
                reward_share: if self.m.reward_total == 0 { 0.0 } else { reward[i] as f64 / self.m.reward_total as f64 },
                blocks: blocks[i],
            })
            .collect();
        if let Some(a) = &self.adversary {
            self.m.attack = a.stats().clone();
            self.m.attack.attacker_reward = attacker_reward;
        }

        let obs = &self.nodes[0];
        let hi = self.cfg.horizon - self.cfg.tail;
        let mut samples = Vec::new();
        for (id, _) in obs.sdag.blocks() {
            let Some(rec) = self.created.get(id) else { continue };
            if rec.peer >= honest || rec.time < self.cfg.warmup || rec.time > hi {
                continue;
            }
            let Some(k) = obs.sdag.level_of(id) else { continue };
            let ms = obs.sdag.main_milestone(k as usize).expect("level has a milestone");
            let t = self.created.get(&ms).map_or(rec.time, |r| r.time);
            samples.push((t - rec.time).max(0.0));
        }
        self.m.infection_latency = samples;
        self.m.duplicate_tx_fraction =
            if self.m.tx_blocks == 0 { 0.0 } else { self.m.duplicate_blocks as f64 / self.m.tx_blocks as f64 };
        self.m
    }
}

/// Build and run one simulation.
pub fn run(cfg: &SimConfig) -> Result<SimMetrics, SimError> {
    Ok(Simulation::new(cfg)?.run())
}
