//! A peer's local structured DAG.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::{BuildHasherDefault, Hasher};
use std::sync::Arc;

use smallvec::SmallVec;
use thiserror::Error;

use crate::block::{classify_hash, genesis, genesis_id, Block, BlockClass, PeerId};
use crate::hash::Hash256;
use crate::params::Params;

/// Hasher for keys that are already uniformly random digests.
#[derive(Default, Clone, Copy)]
pub struct IdHasher(u64);

impl Hasher for IdHasher {
    fn write(&mut self, bytes: &[u8]) {
        let mut buf = [0u8; 8];
        let n = bytes.len().min(8);
        buf[..n].copy_from_slice(&bytes[..n]);
        self.0 = self.0.rotate_left(17) ^ u64::from_le_bytes(buf);
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

pub type IdMap<V> = HashMap<Hash256, V, BuildHasherDefault<IdHasher>>;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    BadId,
    BadPow,
    MissingParent,
    PeerRuleBroken,
    TipRuleBroken,
    MsRuleBroken,
    Cycle,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{kind:?}: {detail}")]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
    /// Unresolved references, populated for `MissingParent`.
    pub missing: Vec<Hash256>,
}

impl Violation {
    fn new(kind: ViolationKind, detail: impl Into<String>) -> Self {
        Violation { kind, detail: detail.into(), missing: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DagError {
    #[error("unknown block {0}")]
    Unknown(Hash256),
    #[error("block {0} is not a milestone")]
    NotMilestone(Hash256),
    #[error("milestone {0} is not on the main chain")]
    OffMainChain(Hash256),
    #[error("reference cycle through {0}")]
    Cycle(Hash256),
    #[error("block {0} references a block that is neither known nor supplied")]
    Unresolved(Hash256),
}

/// Rule for equal-height milestone tips.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Numerically smallest id wins; the main chain is a function of the
    /// block set alone.
    #[default]
    LowestId,
    /// The incumbent tip is kept until a strictly higher milestone appears.
    FirstSeen,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Duplicate,
    Inserted {
        id: Hash256,
        class: BlockClass,
        /// The main chain changed (extended or switched).
        main_changed: bool,
        /// Number of main-chain milestones abandoned by a switch.
        reorg_depth: u32,
    },
}

#[derive(Clone)]
struct Slot {
    id: Hash256,
    block: Arc<Block>,
    class: BlockClass,
    refs: [u32; 3],
    children: SmallVec<[u32; 3]>,
    ms_height: u32,
    level: u32,
    tip_pos: u32,
    has_ms_child: bool,
}

/// Block store with milestone tree, main chain and level sets maintained
/// incrementally.
#[derive(Clone)]
pub struct SDag {
    params: Params,
    tie: TieBreak,
    index: IdMap<u32>,
    slots: Vec<Slot>,
    milestones: Vec<u32>,
    main_chain: Vec<u32>,
    levels: Vec<Vec<u32>>,
    tips: Vec<u32>,
    pending: usize,
}

impl fmt::Debug for SDag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SDag")
            .field("blocks", &self.slots.len())
            .field("height", &self.height())
            .field("pending", &self.pending)
            .finish()
    }
}

impl SDag {
    pub fn new(params: Params) -> Self {
        Self::with_tie_break(params, TieBreak::LowestId)
    }

    pub fn with_tie_break(params: Params, tie: TieBreak) -> Self {
        let gid = genesis_id();
        let mut index = IdMap::default();
        index.insert(gid, 0);
        let g = Slot {
            id: gid,
            block: Arc::new(genesis().clone()),
            class: BlockClass::Milestone,
            refs: [NONE; 3],
            children: SmallVec::new(),
            ms_height: 0,
            level: 0,
            tip_pos: NONE,
            has_ms_child: false,
        };
        SDag {
            params,
            tie,
            index,
            slots: vec![g],
            milestones: vec![0],
            main_chain: vec![0],
            levels: vec![vec![0]],
            tips: Vec::new(),
            pending: 0,
        }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie
    }

    pub fn genesis_id(&self) -> Hash256 {
        self.slots[0].id
    }

    /// Number of stored blocks including genesis.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.len() == 1
    }

    pub fn contains(&self, id: &Hash256) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&self, id: &Hash256) -> Option<&Arc<Block>> {
        self.index.get(id).map(|&i| &self.slots[i as usize].block)
    }

    pub fn class(&self, id: &Hash256) -> Option<BlockClass> {
        self.index.get(id).map(|&i| self.slots[i as usize].class)
    }

    /// Height in the milestone tree, for milestones and genesis.
    pub fn ms_height(&self, id: &Hash256) -> Option<u32> {
        let h = self.slots[*self.index.get(id)? as usize].ms_height;
        (h != NONE).then_some(h)
    }

    /// Index of the main-chain level set containing `id`, if confirmed.
    pub fn level_of(&self, id: &Hash256) -> Option<u32> {
        let l = self.slots[*self.index.get(id)? as usize].level;
        (l != NONE).then_some(l)
    }

    pub fn children(&self, id: &Hash256) -> Vec<Hash256> {
        match self.index.get(id) {
            Some(&i) => self.slots[i as usize].children.iter().map(|&c| self.slots[c as usize].id).collect(),
            None => Vec::new(),
        }
    }

    /// Blocks in insertion order, genesis first. Insertion order is always a
    /// topological order.
    pub fn blocks(&self) -> impl Iterator<Item = (&Hash256, &Arc<Block>)> {
        self.slots.iter().map(|s| (&s.id, &s.block))
    }

    /// Check every structural rule for `block`, returning its id.
    pub fn check_block(&self, block: &Block) -> Result<Hash256, Violation> {
        let id = block.id();
        self.check_inner(id, block)?;
        Ok(id)
    }

    /// As [`check_block`](Self::check_block) for a block received with a claimed id.
    pub fn check_block_with_id(&self, claimed: &Hash256, block: &Block) -> Result<Hash256, Violation> {
        let id = block.id();
        if id != *claimed {
            return Err(Violation::new(ViolationKind::BadId, format!("claimed {claimed}, computed {id}")));
        }
        self.check_inner(id, block)?;
        Ok(id)
    }

    fn check_inner(&self, id: Hash256, block: &Block) -> Result<BlockClass, Violation> {
        let class = classify_hash(&id, &self.params);
        if class == BlockClass::Invalid && id != self.genesis_id() {
            return Err(Violation::new(ViolationKind::BadPow, format!("{id} is above the difficulty target")));
        }
        let mut missing: Vec<Hash256> = block.refs().into_iter().filter(|r| !self.contains(r)).collect();
        if !missing.is_empty() {
            missing.dedup();
            let mut v = Violation::new(ViolationKind::MissingParent, format!("{} unknown reference(s)", missing.len()));
            v.missing = missing;
            return Err(v);
        }
        let g = self.genesis_id();
        let slot = |h: &Hash256| &self.slots[self.index[h] as usize];
        if block.idp != g && slot(&block.idp).block.peer != block.peer {
            return Err(Violation::new(ViolationKind::PeerRuleBroken, format!("idp {} belongs to another peer", block.idp)));
        }
        if block.idt != g {
            let t = slot(&block.idt);
            if t.class != BlockClass::Regular {
                return Err(Violation::new(ViolationKind::TipRuleBroken, format!("idt {} is not a regular block", block.idt)));
            }
            if t.block.peer == block.peer {
                return Err(Violation::new(ViolationKind::TipRuleBroken, format!("idt {} is the creator's own block", block.idt)));
            }
        }
        if block.idm != g && slot(&block.idm).class != BlockClass::Milestone {
            return Err(Violation::new(ViolationKind::MsRuleBroken, format!("idm {} is not a milestone", block.idm)));
        }
        if block.refs().contains(&id) {
            return Err(Violation::new(ViolationKind::Cycle, format!("{id} references itself")));
        }
        Ok(class)
    }

    pub fn insert(&mut self, block: Block) -> Result<InsertOutcome, Violation> {
        self.insert_arc(Arc::new(block))
    }

    pub fn insert_arc(&mut self, block: Arc<Block>) -> Result<InsertOutcome, Violation> {
        let id = block.id();
        self.insert_checked(id, block)
    }

    pub fn insert_with_id(&mut self, claimed: Hash256, block: Arc<Block>) -> Result<InsertOutcome, Violation> {
        if self.contains(&claimed) {
            return Ok(InsertOutcome::Duplicate);
        }
        let id = block.id();
        if id != claimed {
            return Err(Violation::new(ViolationKind::BadId, format!("claimed {claimed}, computed {id}")));
        }
        self.insert_checked(id, block)
    }

    fn insert_checked(&mut self, id: Hash256, block: Arc<Block>) -> Result<InsertOutcome, Violation> {
        if self.contains(&id) {
            return Ok(InsertOutcome::Duplicate);
        }
        let class = self.check_inner(id, &block)?;
        let idx = self.slots.len() as u32;
        let refs = [self.index[&block.idp], self.index[&block.idm], self.index[&block.idt]];
        let ms_height = if class == BlockClass::Milestone { self.slots[refs[1] as usize].ms_height + 1 } else { NONE };
        let mut distinct: SmallVec<[u32; 3]> = SmallVec::new();
        for r in refs {
            if !distinct.contains(&r) {
                distinct.push(r);
            }
        }
        for &r in &distinct {
            let s = &mut self.slots[r as usize];
            s.children.push(idx);
            if s.tip_pos != NONE {
                let pos = s.tip_pos;
                s.tip_pos = NONE;
                self.remove_tip(pos);
            }
        }
        self.slots.push(Slot {
            id,
            block,
            class,
            refs,
            children: SmallVec::new(),
            ms_height,
            level: NONE,
            tip_pos: NONE,
            has_ms_child: false,
        });
        self.index.insert(id, idx);
        self.pending += 1;
        if class == BlockClass::Regular {
            self.slots[idx as usize].tip_pos = self.tips.len() as u32;
            self.tips.push(idx);
        }
        let mut main_changed = false;
        let mut reorg_depth = 0;
        if class == BlockClass::Milestone {
            self.milestones.push(idx);
            self.slots[refs[1] as usize].has_ms_child = true;
            let best = *self.main_chain.last().unwrap();
            let bh = self.slots[best as usize].ms_height;
            let better = ms_height > bh
                || (ms_height == bh && self.tie == TieBreak::LowestId && id < self.slots[best as usize].id);
            if better {
                reorg_depth = self.switch_to(idx);
                main_changed = true;
            }
        }
        Ok(InsertOutcome::Inserted { id, class, main_changed, reorg_depth })
    }

    fn remove_tip(&mut self, pos: u32) {
        let last = self.tips.pop().unwrap();
        if pos as usize != self.tips.len() {
            self.tips[pos as usize] = last;
            self.slots[last as usize].tip_pos = pos;
        }
    }

    fn on_main(&self, idx: u32) -> bool {
        let h = self.slots[idx as usize].ms_height;
        h != NONE && self.main_chain.get(h as usize) == Some(&idx)
    }

    /// Make `tip` the main-chain tip; returns the number of abandoned milestones.
    fn switch_to(&mut self, tip: u32) -> u32 {
        let mut path = Vec::new();
        let mut cur = tip;
        while !self.on_main(cur) {
            path.push(cur);
            cur = self.slots[cur as usize].refs[1];
        }
        let fork = self.slots[cur as usize].ms_height as usize;
        let abandoned = (self.main_chain.len() - 1 - fork) as u32;
        for lev in self.levels.drain(fork + 1..) {
            self.pending += lev.len();
            for x in lev {
                self.slots[x as usize].level = NONE;
            }
        }
        self.main_chain.truncate(fork + 1);
        for &m in path.iter().rev() {
            self.main_chain.push(m);
            let k = self.levels.len() as u32;
            let mut lev = vec![m];
            self.slots[m as usize].level = k;
            let mut i = 0;
            while i < lev.len() {
                let x = lev[i] as usize;
                i += 1;
                for r in self.slots[x].refs {
                    if r != NONE && self.slots[r as usize].level == NONE {
                        self.slots[r as usize].level = k;
                        lev.push(r);
                    }
                }
            }
            self.pending -= lev.len();
            self.levels.push(lev);
        }
        abandoned
    }

    /// Milestones (and genesis) with no milestone child.
    pub fn milestone_leaf_set(&self) -> BTreeSet<Hash256> {
        self.milestones
            .iter()
            .filter(|&&m| !self.slots[m as usize].has_ms_child)
            .map(|&m| self.slots[m as usize].id)
            .collect()
    }

    pub fn longest_chain(&self) -> Vec<Hash256> {
        self.main_chain()
    }

    pub fn main_chain(&self) -> Vec<Hash256> {
        self.main_chain.iter().map(|&i| self.slots[i as usize].id).collect()
    }

    /// Main-chain milestone at height `k`.
    pub fn main_milestone(&self, k: usize) -> Option<Hash256> {
        self.main_chain.get(k).map(|&i| self.slots[i as usize].id)
    }

    pub fn main_tip(&self) -> Hash256 {
        self.slots[*self.main_chain.last().unwrap() as usize].id
    }

    /// Height of the main-chain tip.
    pub fn height(&self) -> u32 {
        (self.main_chain.len() - 1) as u32
    }

    pub fn all_milestones(&self) -> Vec<Hash256> {
        self.milestones.iter().map(|&m| self.slots[m as usize].id).collect()
    }

    /// `id` together with every block reachable from it through references.
    pub fn confirm_set(&self, id: &Hash256) -> Result<BTreeSet<Hash256>, DagError> {
        let &start = self.index.get(id).ok_or(DagError::Unknown(*id))?;
        let mut seen = vec![false; self.slots.len()];
        let mut stack = vec![start];
        seen[start as usize] = true;
        let mut out = BTreeSet::new();
        while let Some(x) = stack.pop() {
            out.insert(self.slots[x as usize].id);
            for r in self.slots[x as usize].refs {
                if r != NONE && !seen[r as usize] {
                    seen[r as usize] = true;
                    stack.push(r);
                }
            }
        }
        Ok(out)
    }

    fn main_height_of(&self, ms: &Hash256) -> Result<usize, DagError> {
        let &i = self.index.get(ms).ok_or(DagError::Unknown(*ms))?;
        let h = self.slots[i as usize].ms_height;
        if h == NONE {
            return Err(DagError::NotMilestone(*ms));
        }
        if !self.on_main(i) {
            return Err(DagError::OffMainChain(*ms));
        }
        Ok(h as usize)
    }

    /// Level set of a main-chain milestone, in discovery order from the
    /// milestone. The level set of genesis is `{genesis}`.
    pub fn level_set(&self, ms: &Hash256) -> Result<Vec<Hash256>, DagError> {
        let k = self.main_height_of(ms)?;
        Ok(self.level(k).to_vec())
    }

    /// Level set `k` of the main chain.
    pub fn level(&self, k: usize) -> Vec<Hash256> {
        self.levels.get(k).map(|l| l.iter().map(|&i| self.slots[i as usize].id).collect()).unwrap_or_default()
    }

    pub fn level_len(&self, k: usize) -> usize {
        self.levels.get(k).map_or(0, |l| l.len())
    }

    /// Number of level sets, genesis included.
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn pending_set(&self) -> BTreeSet<Hash256> {
        self.slots.iter().filter(|s| s.level == NONE).map(|s| s.id).collect()
    }

    pub fn pending_len(&self) -> usize {
        self.pending
    }

    /// Unreferenced regular blocks of peers other than `miner`, by id.
    pub fn tip_set(&self, miner: &PeerId) -> Vec<Hash256> {
        let mut v: Vec<Hash256> = self
            .tips
            .iter()
            .map(|&t| &self.slots[t as usize])
            .filter(|s| s.block.peer != *miner)
            .map(|s| s.id)
            .collect();
        v.sort_unstable();
        v
    }

    /// Digest of the block set, main chain and level partition; independent
    /// of insertion order.
    pub fn state_digest(&self) -> Hash256 {
        let mut ids: Vec<&Hash256> = self.index.keys().collect();
        ids.sort_unstable();
        let mut buf = Vec::with_capacity(32 * (2 * ids.len() + self.main_chain.len()));
        for id in ids {
            buf.extend_from_slice(&id.0);
        }
        buf.extend_from_slice(b"|main|");
        for &m in &self.main_chain {
            buf.extend_from_slice(&self.slots[m as usize].id.0);
        }
        for lev in &self.levels {
            buf.extend_from_slice(b"|lev|");
            let mut l: Vec<Hash256> = lev.iter().map(|&i| self.slots[i as usize].id).collect();
            l.sort_unstable();
            for id in l {
                buf.extend_from_slice(&id.0);
            }
        }
        Hash256::digest(&buf)
    }
}

/// Order `blocks` so that each appears after every block it references.
///
/// References must resolve either inside `blocks` or through `known`.
/// Independent blocks come out in ascending id order.
pub fn topological_order(blocks: Vec<Block>, known: impl Fn(&Hash256) -> bool) -> Result<Vec<Block>, DagError> {
    let with_ids: Vec<(Hash256, Block)> = blocks.into_iter().map(|b| (b.id(), b)).collect();
    let pos: BTreeMap<Hash256, usize> = with_ids.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();
    let mut indeg = vec![0usize; with_ids.len()];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); with_ids.len()];
    for (i, (_, b)) in with_ids.iter().enumerate() {
        let mut seen: SmallVec<[usize; 3]> = SmallVec::new();
        for r in b.refs() {
            if let Some(&j) = pos.get(&r) {
                if !seen.contains(&j) {
                    seen.push(j);
                    indeg[i] += 1;
                    dependents[j].push(i);
                }
            } else if !known(&r) {
                return Err(DagError::Unresolved(with_ids[i].0));
            }
        }
    }
    let mut ready: BTreeSet<(Hash256, usize)> =
        (0..with_ids.len()).filter(|&i| indeg[i] == 0).map(|i| (with_ids[i].0, i)).collect();
    let mut order = Vec::with_capacity(with_ids.len());
    while let Some((_, i)) = ready.pop_first() {
        order.push(i);
        for &d in &dependents[i] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                ready.insert((with_ids[d].0, d));
            }
        }
    }
    if order.len() != with_ids.len() {
        let stuck = (0..with_ids.len()).find(|&i| indeg[i] > 0).unwrap();
        return Err(DagError::Cycle(with_ids[stuck].0));
    }
    let mut slots: Vec<Option<Block>> = with_ids.into_iter().map(|(_, b)| Some(b)).collect();
    Ok(order.into_iter().map(|i| slots[i].take().unwrap()).collect())
}
