//! DAG to ledger: level-set ordering, the UTXO fold, rewards and the
//! registration/redemption signature chain.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::hash::BuildHasherDefault;
use std::sync::Arc;

use thiserror::Error;

use crate::block::{Block, PeerId};
use crate::crypto::{address_of, decode_witness, peer_id_of, MockScheme, SignatureScheme};
use crate::dag::{DagError, IdHasher, IdMap, SDag};
use crate::hash::Hash256;
use crate::params::Params;
use crate::tx::{Address, OutPoint, Transaction, TxKind, TxOutput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockKind {
    RegularPlus,
    MainMilestone,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChainStatus {
    OnPeerChain,
    ForkedFromPeerChain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TxValidity {
    Valid,
    Invalid,
    /// The block carries the empty payload.
    None,
}

/// Post-order DFS of the level set of main-chain milestone `ms`, following
/// `idp` before `idt` and staying inside the level set.
///
/// Blocks of the level set that the traversal from `ms` cannot reach (only
/// possible through `idm` links of forked milestones) are traversed afterwards
/// from the first unvisited block in discovery order, so the result is always
/// a permutation of the level set.
pub fn dfs_order(sdag: &SDag, ms: &Hash256) -> Result<Vec<Hash256>, DagError> {
    let members = sdag.level_set(ms)?;
    let k = sdag.level_of(ms).expect("main-chain milestone has a level");
    Ok(dfs_level(sdag, k, &members))
}

fn dfs_level(sdag: &SDag, k: u32, members: &[Hash256]) -> Vec<Hash256> {
    let inside = |h: &Hash256| sdag.level_of(h) == Some(k);
    let mut visited: HashSet<Hash256, BuildHasherDefault<IdHasher>> = HashSet::default();
    let mut out = Vec::with_capacity(members.len());
    let mut stack: Vec<(Hash256, bool)> = Vec::new();
    for root in members {
        if visited.contains(root) {
            continue;
        }
        stack.push((*root, false));
        while let Some((x, expanded)) = stack.pop() {
            if expanded {
                out.push(x);
                continue;
            }
            if !visited.insert(x) {
                continue;
            }
            stack.push((x, true));
            let b = sdag.get(&x).expect("level member is stored");
            for r in [b.idt, b.idp] {
                if inside(&r) && !visited.contains(&r) {
                    stack.push((r, false));
                }
            }
        }
    }
    out
}

/// One block in ledger order.
#[derive(Clone, Debug)]
pub struct LedgerItem {
    pub level: u32,
    pub position: u32,
    pub block_id: Hash256,
    pub block: Arc<Block>,
    pub kind: BlockKind,
    pub level_size: u32,
}

pub fn order_level(sdag: &SDag, k: usize) -> Vec<LedgerItem> {
    let members = sdag.level(k);
    let ms = sdag.main_milestone(k).expect("level index on main chain");
    let order = dfs_level(sdag, k as u32, &members);
    let size = order.len() as u32;
    order
        .into_iter()
        .enumerate()
        .map(|(i, id)| LedgerItem {
            level: k as u32,
            position: i as u32,
            block_id: id,
            block: sdag.get(&id).unwrap().clone(),
            kind: if id == ms { BlockKind::MainMilestone } else { BlockKind::RegularPlus },
            level_size: size,
        })
        .collect()
}

/// Every confirmed block in ledger order: level sets by height, DFS within.
pub fn order_all(sdag: &SDag) -> Vec<LedgerItem> {
    (1..sdag.level_count()).flat_map(|k| order_level(sdag, k)).collect()
}

/// Base reward.
pub fn block_reward(
    kind: BlockKind,
    status: ChainStatus,
    validity: TxValidity,
    fee: u64,
    level_size: u32,
    params: &Params,
) -> u64 {
    if status == ChainStatus::ForkedFromPeerChain {
        return 0;
    }
    let fee = if validity == TxValidity::Valid { fee } else { 0 };
    match kind {
        BlockKind::RegularPlus => params.r_n.saturating_add(fee),
        BlockKind::MainMilestone => {
            let r = params.r_n.saturating_mul(level_size.saturating_sub(1) as u64);
            params.r_m.saturating_add(fee).saturating_add(params.delta.floor_mul(r))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Reject {
    #[error("malformed transaction")]
    Malformed,
    #[error("transaction already in the ledger")]
    Duplicate,
    #[error("input {0:?} is not unspent")]
    MissingInput(OutPoint),
    #[error("input {0:?} listed twice")]
    RepeatedInput(OutPoint),
    #[error("signature does not verify")]
    BadSignature,
    #[error("outputs exceed inputs")]
    Overspend,
    #[error("registration outside the first block of a peer chain")]
    NotFirstBlock,
    #[error("peer already registered")]
    AlreadyRegistered,
    #[error(transparent)]
    Redemption(#[from] RedemptionError),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RedemptionError {
    #[error("peer has no registration")]
    Unregistered,
    #[error("redemption does not name the latest registration or redemption")]
    StaleAnchor,
    #[error("redemption is not a descendant of its anchor on the peer chain")]
    NotOnChain,
    #[error("signature does not prove ownership of the anchor address")]
    BadSignature,
    #[error("claimed {claimed}, accrued {expected}")]
    WrongAmount { expected: u64, claimed: u64 },
    #[error("not a redemption")]
    NotRedemption,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxRecord {
    pub level: u32,
    pub position: u32,
    pub block_id: Hash256,
    pub peer: PeerId,
    pub idp: Hash256,
    pub kind: BlockKind,
    pub level_size: u32,
    pub tx_kind: TxKind,
    pub tx_id: Hash256,
    pub validity: TxValidity,
    pub reject: Option<Reject>,
    pub fee: u64,
    /// Base reward assuming the block is on its peer chain.
    pub base_reward: u64,
}

impl TxRecord {
    pub fn accepted(&self) -> bool {
        self.validity == TxValidity::Valid
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewardRecord {
    pub block_id: Hash256,
    pub peer: PeerId,
    pub kind: BlockKind,
    pub status: ChainStatus,
    pub validity: TxValidity,
    pub amount: u64,
    pub level: u32,
    pub position: u32,
    /// The level set lies at least `final_depth` milestones below the tip.
    pub final_: bool,
}

#[derive(Clone)]
pub struct LedgerConfig {
    pub params: Params,
    /// Outputs created at genesis, spendable as `(genesis_id, index)`.
    pub genesis_allocation: Arc<Vec<TxOutput>>,
    pub final_depth: u32,
    pub scheme: Arc<dyn SignatureScheme>,
}

impl LedgerConfig {
    pub fn new(params: Params) -> Self {
        LedgerConfig { params, genesis_allocation: Arc::new(Vec::new()), final_depth: 13, scheme: Arc::new(MockScheme) }
    }

    pub fn with_allocation(mut self, outputs: Vec<TxOutput>) -> Self {
        self.genesis_allocation = Arc::new(outputs);
        self
    }
}

/// Unspent outputs: the genesis allocation is shared and tracked by a spent
/// bitmap; everything else lives in an overlay map.
#[derive(Clone)]
struct Utxo {
    genesis_id: Hash256,
    genesis: Arc<Vec<TxOutput>>,
    genesis_spent: Vec<u64>,
    genesis_live: usize,
    other: HashMap<OutPoint, TxOutput>,
}

impl Utxo {
    fn new(genesis_id: Hash256, genesis: Arc<Vec<TxOutput>>) -> Self {
        let words = genesis.len().div_ceil(64);
        let live = genesis.len();
        Utxo { genesis_id, genesis, genesis_spent: vec![0; words], genesis_live: live, other: HashMap::new() }
    }

    fn get(&self, op: &OutPoint) -> Option<TxOutput> {
        if op.txid == self.genesis_id {
            let i = op.index as usize;
            if i < self.genesis.len() && self.genesis_spent[i / 64] & (1 << (i % 64)) == 0 {
                return Some(self.genesis[i]);
            }
            return None;
        }
        self.other.get(op).copied()
    }

    fn remove(&mut self, op: &OutPoint) {
        if op.txid == self.genesis_id {
            let i = op.index as usize;
            if i < self.genesis.len() && self.genesis_spent[i / 64] & (1 << (i % 64)) == 0 {
                self.genesis_spent[i / 64] |= 1 << (i % 64);
                self.genesis_live -= 1;
            }
        } else {
            self.other.remove(op);
        }
    }

    fn insert(&mut self, op: OutPoint, out: TxOutput) {
        self.other.insert(op, out);
    }

    fn len(&self) -> usize {
        self.genesis_live + self.other.len()
    }

    fn sorted(&self) -> Vec<(OutPoint, TxOutput)> {
        let mut v: Vec<(OutPoint, TxOutput)> = self.other.iter().map(|(k, v)| (*k, *v)).collect();
        for (i, o) in self.genesis.iter().enumerate() {
            if self.genesis_spent[i / 64] & (1 << (i % 64)) == 0 {
                v.push((OutPoint { txid: self.genesis_id, index: i as u32 }, *o));
            }
        }
        v.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        v
    }
}

#[derive(Clone, Copy, Debug)]
struct BlockInfo {
    peer: PeerId,
    idp: Hash256,
    base_reward: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Anchor {
    block_id: Hash256,
    tx_id: Hash256,
    address: Address,
}

/// The ordered ledger with its UTXO set.
#[derive(Clone)]
pub struct Ledger {
    cfg: LedgerConfig,
    genesis_id: Hash256,
    utxo: Utxo,
    records: Vec<TxRecord>,
    accepted: Vec<(Hash256, Hash256, u32)>,
    seen_tx: HashSet<Hash256, BuildHasherDefault<IdHasher>>,
    blocks: IdMap<BlockInfo>,
    anchors: BTreeMap<PeerId, Vec<Anchor>>,
    levels_applied: u32,
    tip_height: u32,
}

impl Ledger {
    pub fn new(cfg: LedgerConfig) -> Self {
        let genesis_id = crate::block::genesis_id();
        let utxo = Utxo::new(genesis_id, cfg.genesis_allocation.clone());
        Ledger {
            cfg,
            genesis_id,
            utxo,
            records: Vec::new(),
            accepted: Vec::new(),
            seen_tx: HashSet::default(),
            blocks: IdMap::default(),
            anchors: BTreeMap::new(),
            levels_applied: 0,
            tip_height: 0,
        }
    }

    /// Ledger of every confirmed block of `sdag`.
    pub fn from_sdag(sdag: &SDag, cfg: LedgerConfig) -> Self {
        let mut l = Ledger::new(cfg);
        l.extend_from(sdag);
        l
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.cfg
    }

    /// Apply level sets of `sdag` not yet folded. The caller must rebuild from
    /// scratch after a main-chain switch below `levels_applied`.
    pub fn extend_from(&mut self, sdag: &SDag) {
        for k in (self.levels_applied as usize + 1)..sdag.level_count() {
            for item in order_level(sdag, k) {
                self.apply(&item);
            }
        }
        self.tip_height = sdag.height();
    }

    /// Highest level index folded so far.
    pub fn levels_applied(&self) -> u32 {
        self.levels_applied
    }

    pub fn set_tip_height(&mut self, h: u32) {
        self.tip_height = h;
    }

    /// Fold one block into the ledger.
    pub fn apply(&mut self, item: &LedgerItem) {
        let b = &item.block;
        let tx = &b.mes;
        let tx_id = tx.id();
        let (validity, reject, fee) = if tx.is_empty() {
            (TxValidity::None, None, 0)
        } else {
            match self.check(item, &tx_id) {
                Ok(fee) => (TxValidity::Valid, None, fee),
                Err(r) => (TxValidity::Invalid, Some(r), 0),
            }
        };
        if validity == TxValidity::Valid {
            self.commit(item, &tx_id);
            self.accepted.push((tx_id, item.block_id, item.level));
        }
        let base_reward = block_reward(item.kind, ChainStatus::OnPeerChain, validity, fee, item.level_size, &self.cfg.params);
        self.blocks.insert(item.block_id, BlockInfo { peer: b.peer, idp: b.idp, base_reward });
        self.records.push(TxRecord {
            level: item.level,
            position: item.position,
            block_id: item.block_id,
            peer: b.peer,
            idp: b.idp,
            kind: item.kind,
            level_size: item.level_size,
            tx_kind: tx.kind,
            tx_id,
            validity,
            reject,
            fee,
            base_reward,
        });
        self.levels_applied = self.levels_applied.max(item.level);
    }

    fn check(&self, item: &LedgerItem, tx_id: &Hash256) -> Result<u64, Reject> {
        let b = &item.block;
        let tx = &b.mes;
        if !tx.well_formed() {
            return Err(Reject::Malformed);
        }
        if self.seen_tx.contains(tx_id) {
            return Err(Reject::Duplicate);
        }
        match tx.kind {
            TxKind::Empty => Ok(0),
            TxKind::Normal => self.check_normal(tx),
            TxKind::Registration => {
                if b.idp != self.genesis_id {
                    return Err(Reject::NotFirstBlock);
                }
                if self.anchors.contains_key(&b.peer) {
                    return Err(Reject::AlreadyRegistered);
                }
                let (pk, sig) = decode_witness(&tx.inputs[0].witness).ok_or(Reject::BadSignature)?;
                if peer_id_of(&pk) != b.peer || !self.cfg.scheme.verify(&pk, &tx.sighash(), &sig) {
                    return Err(Reject::BadSignature);
                }
                Ok(0)
            }
            TxKind::Redemption => {
                self.validate_redemption(b)?;
                Ok(0)
            }
        }
    }

    fn check_normal(&self, tx: &Transaction) -> Result<u64, Reject> {
        let sighash = tx.sighash();
        let mut total_in: u128 = 0;
        let mut seen: Vec<OutPoint> = Vec::with_capacity(tx.inputs.len());
        for input in &tx.inputs {
            if seen.contains(&input.prev) {
                return Err(Reject::RepeatedInput(input.prev));
            }
            seen.push(input.prev);
            let out = self.utxo.get(&input.prev).ok_or(Reject::MissingInput(input.prev))?;
            let (pk, sig) = decode_witness(&input.witness).ok_or(Reject::BadSignature)?;
            if address_of(&pk) != out.address || !self.cfg.scheme.verify(&pk, &sighash, &sig) {
                return Err(Reject::BadSignature);
            }
            total_in += out.value as u128;
        }
        let total_out = tx.output_sum();
        if total_out > total_in {
            return Err(Reject::Overspend);
        }
        Ok(u64::try_from(total_in - total_out).unwrap_or(u64::MAX))
    }

    fn commit(&mut self, item: &LedgerItem, tx_id: &Hash256) {
        let b = &item.block;
        let tx = &b.mes;
        self.seen_tx.insert(*tx_id);
        match tx.kind {
            TxKind::Empty => {}
            TxKind::Normal => {
                for i in &tx.inputs {
                    self.utxo.remove(&i.prev);
                }
                for (k, o) in tx.outputs.iter().enumerate() {
                    self.utxo.insert(OutPoint { txid: *tx_id, index: k as u32 }, *o);
                }
            }
            TxKind::Registration => {
                let a = Anchor { block_id: item.block_id, tx_id: *tx_id, address: tx.next_address.unwrap() };
                self.anchors.insert(b.peer, vec![a]);
            }
            TxKind::Redemption => {
                let chain = self.anchors.get_mut(&b.peer).expect("validated redemption has an anchor");
                let payee = chain.last().unwrap().address;
                self.utxo.insert(
                    OutPoint { txid: *tx_id, index: 0 },
                    TxOutput { value: tx.reward_claim.unwrap(), address: payee },
                );
                chain.push(Anchor { block_id: item.block_id, tx_id: *tx_id, address: tx.next_address.unwrap() });
            }
        }
    }

    /// Rewards a redemption in `block` would have to claim, if it were
    /// appended to the ledger now: the base rewards of the peer-chain blocks
    /// from the latest anchor (inclusive) up to `block` (exclusive).
    pub fn accrued_for(&self, block: &Block) -> Result<u64, RedemptionError> {
        let anchor = self.anchors.get(&block.peer).and_then(|v| v.last()).ok_or(RedemptionError::Unregistered)?;
        let mut sum: u64 = 0;
        let mut cur = block.idp;
        loop {
            let info = self.blocks.get(&cur).ok_or(RedemptionError::NotOnChain)?;
            if info.peer != block.peer {
                return Err(RedemptionError::NotOnChain);
            }
            sum = sum.saturating_add(info.base_reward);
            if cur == anchor.block_id {
                return Ok(sum);
            }
            cur = info.idp;
        }
    }

    /// Check a redemption block against the current signature chain.
    pub fn validate_redemption(&self, block: &Block) -> Result<(), RedemptionError> {
        let tx = &block.mes;
        if tx.kind != TxKind::Redemption || !tx.well_formed() {
            return Err(RedemptionError::NotRedemption);
        }
        let anchor = *self.anchors.get(&block.peer).and_then(|v| v.last()).ok_or(RedemptionError::Unregistered)?;
        if tx.inputs[0].prev.txid != anchor.tx_id {
            return Err(RedemptionError::StaleAnchor);
        }
        let expected = self.accrued_for(block)?;
        let (pk, sig) = decode_witness(&tx.inputs[0].witness).ok_or(RedemptionError::BadSignature)?;
        if address_of(&pk) != anchor.address || !self.cfg.scheme.verify(&pk, &tx.sighash(), &sig) {
            return Err(RedemptionError::BadSignature);
        }
        let claimed = tx.reward_claim.unwrap();
        if claimed != expected {
            return Err(RedemptionError::WrongAmount { expected, claimed });
        }
        Ok(())
    }

    /// Latest registration or redemption transaction of `peer`.
    pub fn anchor_tx(&self, peer: &PeerId) -> Option<Hash256> {
        self.anchors.get(peer).and_then(|v| v.last()).map(|a| a.tx_id)
    }

    pub fn is_registered(&self, peer: &PeerId) -> bool {
        self.anchors.contains_key(peer)
    }

    pub fn contains_block(&self, id: &Hash256) -> bool {
        self.blocks.contains_key(id)
    }

    pub fn records(&self) -> &[TxRecord] {
        &self.records
    }

    /// Accepted transactions as `(tx id, block id, level)`.
    pub fn txs(&self) -> &[(Hash256, Hash256, u32)] {
        &self.accepted
    }

    pub fn has_tx(&self, id: &Hash256) -> bool {
        self.seen_tx.contains(id)
    }

    pub fn utxo_get(&self, op: &OutPoint) -> Option<TxOutput> {
        self.utxo.get(op)
    }

    pub fn is_unspent(&self, op: &OutPoint) -> bool {
        self.utxo.get(op).is_some()
    }

    pub fn utxo_len(&self) -> usize {
        self.utxo.len()
    }

    pub fn utxo_total(&self) -> u128 {
        self.utxo.sorted().iter().map(|(_, o)| o.value as u128).sum()
    }

    pub fn utxo_entries(&self) -> Vec<(OutPoint, TxOutput)> {
        self.utxo.sorted()
    }

    /// Digest of the sorted unspent outputs.
    pub fn utxo_digest(&self) -> Hash256 {
        let mut buf = Vec::new();
        for (op, o) in self.utxo.sorted() {
            buf.extend_from_slice(&op.txid.0);
            buf.extend_from_slice(&op.index.to_be_bytes());
            buf.extend_from_slice(&o.value.to_be_bytes());
            buf.extend_from_slice(&o.address.0);
        }
        Hash256::digest(&buf)
    }

    /// Canonical chain of every miner: the idp path through all accepted
    /// registration/redemption blocks, continued past the last one by the
    /// earliest child in ledger order. Without a registration the chain starts
    /// at the miner's first genesis-rooted block.
    fn canonical(&self) -> HashSet<Hash256, BuildHasherDefault<IdHasher>> {
        let mut first_child: IdMap<Hash256> = IdMap::default();
        let mut first_root: BTreeMap<PeerId, Hash256> = BTreeMap::new();
        for r in &self.records {
            if r.idp == self.genesis_id {
                first_root.entry(r.peer).or_insert(r.block_id);
            } else {
                first_child.entry(r.idp).or_insert(r.block_id);
            }
        }
        let mut on = HashSet::default();
        let mut peers: Vec<PeerId> = first_root.keys().copied().collect();
        peers.extend(self.anchors.keys().copied());
        peers.sort_unstable();
        peers.dedup();
        for peer in peers {
            let start = match self.anchors.get(&peer).and_then(|v| v.last()) {
                Some(a) => {
                    let mut cur = a.block_id;
                    loop {
                        on.insert(cur);
                        let info = &self.blocks[&cur];
                        if info.idp == self.genesis_id {
                            break;
                        }
                        cur = info.idp;
                    }
                    a.block_id
                }
                None => match first_root.get(&peer) {
                    Some(&r) => {
                        on.insert(r);
                        r
                    }
                    None => continue,
                },
            };
            let mut cur = start;
            while let Some(&c) = first_child.get(&cur) {
                on.insert(c);
                cur = c;
            }
        }
        on
    }

    /// Base rewards of every ledger block.
    pub fn rewards(&self) -> Vec<RewardRecord> {
        let on = self.canonical();
        let final_level = self.tip_height.saturating_sub(self.cfg.final_depth);
        self.records
            .iter()
            .map(|r| {
                let status = if on.contains(&r.block_id) { ChainStatus::OnPeerChain } else { ChainStatus::ForkedFromPeerChain };
                RewardRecord {
                    block_id: r.block_id,
                    peer: r.peer,
                    kind: r.kind,
                    status,
                    validity: r.validity,
                    amount: if status == ChainStatus::OnPeerChain { r.base_reward } else { 0 },
                    level: r.level,
                    position: r.position,
                    final_: r.level <= final_level,
                }
            })
            .collect()
    }

    /// Canonical chain of `miner` with the reward accrued since its latest
    /// registration or redemption.
    pub fn peer_chain(&self, miner: &PeerId) -> PeerChainView {
        let on = self.canonical();
        let blocks: Vec<Hash256> =
            self.records.iter().filter(|r| r.peer == *miner && on.contains(&r.block_id)).map(|r| r.block_id).collect();
        let anchor = self.anchors.get(miner).and_then(|v| v.last()).copied();
        let accrued = match anchor {
            Some(a) => {
                let start = blocks.iter().position(|b| *b == a.block_id).unwrap_or(0);
                blocks[start..].iter().map(|b| self.blocks[b].base_reward).sum()
            }
            None => blocks.iter().map(|b| self.blocks[b].base_reward).sum(),
        };
        PeerChainView { miner: *miner, blocks, address: anchor.map(|a| a.address), accrued }
    }

    /// CSV with columns `level,position,block_id,tx_id,accepted,reward`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,position,block_id,tx_id,accepted,reward\n");
        for r in self.rewards().iter().zip(&self.records) {
            let (rw, rec) = r;
            let tx = if rec.tx_kind == TxKind::Empty { String::new() } else { rec.tx_id.to_hex() };
            let _ = writeln!(s, "{},{},{},{},{},{}", rec.level, rec.position, rec.block_id, tx, rec.accepted(), rw.amount);
        }
        s
    }
}

/// A miner's canonical peer chain in chronological order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeerChainView {
    pub miner: PeerId,
    pub blocks: Vec<Hash256>,
    /// Address named by the latest registration or redemption.
    pub address: Option<Address>,
    pub accrued: u64,
}

/// Ledger of the ordered blocks `items`.
pub fn build_ledger(items: &[LedgerItem], cfg: LedgerConfig) -> Ledger {
    let mut l = Ledger::new(cfg);
    for it in items {
        l.apply(it);
    }
    l
}
