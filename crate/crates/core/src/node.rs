//! Per-peer protocol state machine: receiving, solidifying and relaying
//! blocks, and building new ones.

use std::collections::{HashSet, VecDeque};
use std::hash::BuildHasherDefault;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::block::{genesis_id, mine, Block, BlockClass, Mined, PeerId};
use crate::crypto::{Keypair, SignatureScheme};
use crate::dag::{topological_order, IdHasher, IdMap, InsertOutcome, SDag, ViolationKind};
use crate::hash::Hash256;
use crate::ledger::{Ledger, LedgerConfig};
use crate::mempool::{estimate_power, Mempool};
use crate::tx::{Transaction, TxKind};

type IdSet = HashSet<Hash256, BuildHasherDefault<IdHasher>>;

#[derive(Clone, Debug)]
pub struct NodeConfig {
    /// Milestone gap above which the node asks for whole level sets.
    pub catchup_threshold: u32,
    pub orphan_cap: usize,
    /// Level sets used to estimate the node's own hashing power.
    pub power_window: usize,
    /// Nonces tried per template before it is rebuilt.
    pub mine_attempts: u64,
    /// Put a registration in the first block.
    pub register: bool,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig { catchup_threshold: 5, orphan_cap: 10_000, power_window: 20, mine_attempts: 1 << 20, register: true }
    }
}

#[derive(Clone, Debug)]
pub enum InboundEvent {
    BlockArrived(Arc<Block>),
    TxArrived { tx: Transaction, fee: u64 },
    LevelSetBatch(Vec<Block>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum OutboundAction {
    Relay(Arc<Block>),
    RequestMissing(Vec<Hash256>),
    Publish(Arc<Block>),
    RequestLevelSets { from: u32, to: u32 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NodeStats {
    pub received: u64,
    pub inserted: u64,
    pub duplicates: u64,
    pub invalid: u64,
    pub orphaned: u64,
    pub evicted: u64,
    pub switches: u64,
    /// Main-chain milestones abandoned over all switches.
    pub reorged: u64,
    pub max_reorg: u32,
    pub created: u64,
}

/// A block this node created, with its mining cost.
#[derive(Clone, Debug)]
pub struct Created {
    pub block: Arc<Block>,
    pub id: Hash256,
    pub class: BlockClass,
    pub attempts: u64,
    pub actions: Vec<OutboundAction>,
}

pub struct Node {
    pub sdag: SDag,
    pub mempool: Mempool,
    pub stats: NodeStats,
    cfg: NodeConfig,
    keys: Keypair,
    scheme: Arc<dyn SignatureScheme>,
    my_head: Hash256,
    ledger: Ledger,
    ledger_dirty: bool,
    orphans: IdMap<Arc<Block>>,
    waiting: IdMap<Vec<Hash256>>,
    orphan_fifo: VecDeque<Hash256>,
    relayed: IdSet,
    rng: ChaCha8Rng,
}

impl Node {
    pub fn new(sdag: SDag, keys: Keypair, ledger_cfg: LedgerConfig, cfg: NodeConfig, seed: u64) -> Self {
        let scheme = ledger_cfg.scheme.clone();
        let ledger = Ledger::from_sdag(&sdag, ledger_cfg);
        Node {
            sdag,
            mempool: Mempool::new(),
            stats: NodeStats::default(),
            cfg,
            keys,
            scheme,
            my_head: genesis_id(),
            ledger,
            ledger_dirty: false,
            orphans: IdMap::default(),
            waiting: IdMap::default(),
            orphan_fifo: VecDeque::new(),
            relayed: IdSet::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn peer(&self) -> PeerId {
        self.keys.peer_id()
    }

    pub fn keys(&self) -> &Keypair {
        &self.keys
    }

    pub fn my_head(&self) -> Hash256 {
        self.my_head
    }

    pub fn orphan_count(&self) -> usize {
        self.orphans.len()
    }

    pub fn has_relayed(&self, id: &Hash256) -> bool {
        self.relayed.contains(id)
    }

    /// Ledger at the current main-chain tip.
    pub fn ledger(&mut self) -> &Ledger {
        self.refresh_ledger();
        &self.ledger
    }

    fn refresh_ledger(&mut self) {
        if self.ledger_dirty {
            self.ledger = Ledger::from_sdag(&self.sdag, self.ledger.config().clone());
            self.ledger_dirty = false;
        } else {
            self.ledger.extend_from(&self.sdag);
        }
    }

    pub fn on_event(&mut self, ev: InboundEvent, now: f64) -> Vec<OutboundAction> {
        match ev {
            InboundEvent::BlockArrived(b) => self.on_receive_block(b, now),
            InboundEvent::TxArrived { tx, fee } => {
                if !self.ledger.has_tx(&tx.id()) {
                    self.mempool.add_tx(tx, fee, now);
                }
                Vec::new()
            }
            InboundEvent::LevelSetBatch(blocks) => {
                let sdag = &self.sdag;
                let fresh: Vec<Block> = blocks.into_iter().filter(|b| !sdag.contains(&b.id())).collect();
                let ordered = match topological_order(fresh, |h| self.sdag.contains(h)) {
                    Ok(o) => o,
                    Err(_) => {
                        self.stats.invalid += 1;
                        return Vec::new();
                    }
                };
                let mut actions = Vec::new();
                for b in ordered {
                    actions.extend(self.on_receive_block(Arc::new(b), now));
                }
                actions
            }
        }
    }

    /// Solidify, check, insert and relay one block.
    pub fn on_receive_block(&mut self, block: Arc<Block>, now: f64) -> Vec<OutboundAction> {
        let _ = now;
        self.stats.received += 1;
        let id = block.id();
        if self.sdag.contains(&id) || self.orphans.contains_key(&id) {
            self.stats.duplicates += 1;
            return Vec::new();
        }
        let mut actions = Vec::new();
        let mut ready = vec![(id, block)];
        while !ready.is_empty() {
            let mut released = Vec::new();
            for (id, b) in ready {
                match self.sdag.insert_with_id(id, b.clone()) {
                    Ok(InsertOutcome::Inserted { main_changed, reorg_depth, .. }) => {
                        self.after_insert(id, &b, main_changed, reorg_depth, &mut actions);
                        if let Some(w) = self.waiting.remove(&id) {
                            released.extend(w);
                        }
                    }
                    Ok(InsertOutcome::Duplicate) => self.stats.duplicates += 1,
                    Err(v) if v.kind == ViolationKind::MissingParent => {
                        self.buffer_orphan(id, b, &v.missing);
                        actions.push(OutboundAction::RequestMissing(v.missing));
                    }
                    Err(_) => self.stats.invalid += 1,
                }
            }
            released.sort_unstable();
            released.dedup();
            let solid: Vec<Hash256> = released
                .into_iter()
                .filter(|oid| {
                    self.orphans
                        .get(oid)
                        .is_some_and(|b| b.refs().iter().all(|r| self.sdag.contains(r)))
                })
                .collect();
            let candidates: Vec<Block> =
                solid.iter().map(|oid| (*self.orphans.remove(oid).unwrap()).clone()).collect();
            ready = match topological_order(candidates, |h| self.sdag.contains(h)) {
                Ok(v) => v.into_iter().map(|b| (b.id(), Arc::new(b))).collect(),
                Err(_) => Vec::new(),
            };
        }
        actions
    }

    fn buffer_orphan(&mut self, id: Hash256, b: Arc<Block>, missing: &[Hash256]) {
        self.stats.orphaned += 1;
        for m in missing {
            self.waiting.entry(*m).or_default().push(id);
        }
        self.orphans.insert(id, b);
        self.orphan_fifo.push_back(id);
        while self.orphans.len() > self.cfg.orphan_cap {
            match self.orphan_fifo.pop_front() {
                Some(old) => {
                    if self.orphans.remove(&old).is_some() {
                        self.stats.evicted += 1;
                    }
                }
                None => break,
            }
        }
    }

    fn after_insert(&mut self, id: Hash256, b: &Arc<Block>, main_changed: bool, reorg: u32, actions: &mut Vec<OutboundAction>) {
        self.stats.inserted += 1;
        if self.relayed.insert(id) {
            actions.push(OutboundAction::Relay(b.clone()));
        }
        if b.mes.kind != TxKind::Empty {
            self.mempool.remove_tx(&b.mes.id());
        }
        if main_changed && reorg > 0 {
            self.stats.switches += 1;
            self.stats.reorged += reorg as u64;
            self.stats.max_reorg = self.stats.max_reorg.max(reorg);
            self.ledger_dirty = true;
        }
    }

    /// Level sets to fetch when a peer reports a much higher main chain.
    pub fn sync_catchup(&self, remote_height: u32) -> Vec<OutboundAction> {
        let local = self.sdag.height();
        if remote_height > local + self.cfg.catchup_threshold {
            vec![OutboundAction::RequestLevelSets { from: local + 1, to: remote_height }]
        } else {
            Vec::new()
        }
    }

    /// Blocks of main-chain level sets `from..=to`, in ledger-independent
    /// topological order.
    pub fn serve_level_sets(&self, from: u32, to: u32) -> Vec<Block> {
        let mut out = Vec::new();
        for k in from..=to.min(self.sdag.height()) {
            for id in self.sdag.level(k as usize) {
                out.push((**self.sdag.get(&id).unwrap()).clone());
            }
        }
        topological_order(out, |h| self.sdag.contains(h)).unwrap_or_default()
    }

    /// Template for the next block: steps 1 to 3 plus the payload choice.
    pub fn template(&mut self) -> Block {
        let idm = self.sdag.main_tip();
        let idp = self.my_head;
        let peer = self.peer();
        let tips = self.sdag.tip_set(&peer);
        let idt = if tips.is_empty() { genesis_id() } else { tips[self.rng.random_range(0..tips.len())] };
        let mes = self.choose_payload();
        let mut b = Block::new(idp, idm, idt, peer, mes);
        b.pow = self.rng.random();
        b
    }

    fn choose_payload(&mut self) -> Transaction {
        if self.cfg.register && self.my_head == genesis_id() {
            let mut tx = Transaction::registration(self.keys.address());
            tx.inputs[0].witness = self.keys.witness(self.scheme.as_ref(), &tx.sighash());
            return tx;
        }
        self.refresh_ledger();
        let q = estimate_power(&self.sdag, &self.peer(), self.cfg.power_window).q;
        let c = self.sdag.params().c;
        for id in self.mempool.workable(&self.my_head, c, q) {
            let tx = &self.mempool.get(&id).unwrap().tx;
            if !self.ledger.has_tx(&id) && tx.inputs.iter().all(|i| self.ledger.is_unspent(&i.prev)) {
                return tx.clone();
            }
        }
        Transaction::empty()
    }

    /// Mine `template`, rebuilding the nonce start on exhaustion.
    pub fn mine_template(&mut self, mut template: Block) -> Mined {
        let mut spent = 0;
        loop {
            match mine(&template, self.sdag.params(), self.cfg.mine_attempts) {
                Ok(mut m) => {
                    m.attempts += spent;
                    return m;
                }
                Err(_) => {
                    spent += self.cfg.mine_attempts;
                    template.pow = self.rng.random();
                }
            }
        }
    }

    /// Store a block this node mined. Returns the insert outcome; the block
    /// is not announced.
    pub fn adopt_own(&mut self, m: &Mined) -> Arc<Block> {
        let b = Arc::new(m.block.clone());
        let out = self.sdag.insert_with_id(m.id, b.clone()).expect("own block passes its own checks");
        if let InsertOutcome::Inserted { main_changed, reorg_depth, .. } = out {
            let mut sink = Vec::new();
            self.after_insert(m.id, &b, main_changed, reorg_depth, &mut sink);
        }
        if b.peer == self.peer() {
            self.my_head = m.id;
        }
        b
    }

    /// Steps 1 to 5: build, mine, store and publish a new block.
    pub fn create_block(&mut self, now: f64) -> Created {
        let _ = now;
        let t = self.template();
        let m = self.mine_template(t);
        let b = self.adopt_own(&m);
        self.stats.created += 1;
        Created { block: b.clone(), id: m.id, class: m.class, attempts: m.attempts, actions: vec![OutboundAction::Publish(b)] }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
