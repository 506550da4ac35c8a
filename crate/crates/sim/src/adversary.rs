//! Attacker behaviour driven by the simulation loop.

use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng;
use sdag_core::node::Node;
use sdag_core::{genesis_id, Block, BlockClass, Hash256, PeerId, Transaction};

use crate::metrics::AttackStats;

pub(crate) enum Adversary {
    PrivateFork(PrivateFork),
    PeerFork(PeerFork),
}

/// Blocks the attacker mined, with the ones it chose to announce now.
pub(crate) struct Step {
    pub mined: Option<(Hash256, Arc<Block>, BlockClass)>,
    pub publish: Vec<Arc<Block>>,
}

impl Adversary {
    pub fn stats(&self) -> &AttackStats {
        match self {
            Adversary::PrivateFork(a) => &a.stats,
            Adversary::PeerFork(a) => &a.stats,
        }
    }

    pub fn on_mine(&mut self, node: &mut Node) -> Step {
        match self {
            Adversary::PrivateFork(a) => a.on_mine(node),
            Adversary::PeerFork(a) => a.on_mine(node),
        }
    }

    /// Called after the attacker's node took in a public block.
    pub fn after_receive(&mut self, node: &Node) -> Vec<Arc<Block>> {
        match self {
            Adversary::PrivateFork(a) => a.check(node),
            Adversary::PeerFork(_) => Vec::new(),
        }
    }

    /// Everything still held back; called once mining stops.
    pub fn flush(&mut self) -> Vec<Arc<Block>> {
        match self {
            Adversary::PrivateFork(a) => {
                if !a.withheld.is_empty() {
                    a.stats.abandoned += 1;
                }
                a.release()
            }
            Adversary::PeerFork(_) => Vec::new(),
        }
    }

    pub fn mined_ids(&self) -> &HashSet<Hash256> {
        match self {
            Adversary::PrivateFork(a) => &a.mined,
            Adversary::PeerFork(a) => &a.mined,
        }
    }
}

pub(crate) struct PrivateFork {
    depth: u32,
    /// Mine on the private tip from time zero and never give up.
    persistent: bool,
    private_tip: Hash256,
    withheld: Vec<Arc<Block>>,
    withheld_ids: HashSet<Hash256>,
    fork_height: u32,
    mined: HashSet<Hash256>,
    pub stats: AttackStats,
}

impl PrivateFork {
    pub fn new(depth: u32) -> Self {
        Self::with_mode(depth, false)
    }

    pub fn persistent() -> Self {
        Self::with_mode(u32::MAX, true)
    }

    fn with_mode(depth: u32, persistent: bool) -> Self {
        PrivateFork {
            depth,
            persistent,
            private_tip: genesis_id(),
            withheld: Vec::new(),
            withheld_ids: HashSet::new(),
            fork_height: 0,
            mined: HashSet::new(),
            stats: AttackStats::default(),
        }
    }

    fn on_mine(&mut self, node: &mut Node) -> Step {
        let mut t = node.template();
        if self.persistent {
            t.idm = self.private_tip;
        }
        let m = node.mine_template(t);
        let b = node.adopt_own(&m);
        node.stats.created += 1;
        self.mined.insert(m.id);
        self.stats.attacker_blocks += 1;
        let mined = Some((m.id, b.clone(), m.class));
        if self.persistent {
            if m.class == BlockClass::Milestone {
                self.private_tip = m.id;
            }
            if self.withheld.is_empty() {
                self.stats.attempts += 1;
            }
            self.withheld_ids.insert(m.id);
            self.withheld.push(b);
            return Step { mined, publish: Vec::new() };
        }
        if self.withheld.is_empty() && m.class != BlockClass::Milestone {
            return Step { mined, publish: vec![b] };
        }
        if self.withheld.is_empty() {
            self.stats.attempts += 1;
            self.fork_height = node.sdag.ms_height(&b.idm).unwrap_or(0);
        }
        self.withheld_ids.insert(m.id);
        self.withheld.push(b);
        Step { mined, publish: self.check(node) }
    }

    fn public_height(&self, node: &Node) -> u32 {
        node.sdag
            .all_milestones()
            .iter()
            .filter(|m| !self.withheld_ids.contains(m))
            .filter_map(|m| node.sdag.ms_height(m))
            .max()
            .unwrap_or(0)
    }

    /// Private height minus the best public height `public`.
    pub fn lead(&self, node: &Node, public: u32) -> i64 {
        node.sdag.ms_height(&self.private_tip).unwrap_or(0) as i64 - public as i64
    }

    fn check(&mut self, node: &Node) -> Vec<Arc<Block>> {
        if self.persistent || self.withheld.is_empty() {
            return Vec::new();
        }
        if !self.withheld_ids.contains(&node.sdag.main_tip()) {
            self.stats.abandoned += 1;
            return self.release();
        }
        let public = self.public_height(node);
        let displaced = public.saturating_sub(self.fork_height);
        if node.sdag.height() > public && displaced >= self.depth {
            self.stats.successes += 1;
            self.stats.max_displaced = self.stats.max_displaced.max(displaced);
            return self.release();
        }
        Vec::new()
    }

    fn release(&mut self) -> Vec<Arc<Block>> {
        self.withheld_ids.clear();
        std::mem::take(&mut self.withheld)
    }
}

pub(crate) struct PeerFork {
    victim: PeerId,
    head: Option<Hash256>,
    mined: HashSet<Hash256>,
    pub stats: AttackStats,
}

impl PeerFork {
    pub fn new(victim: PeerId) -> Self {
        PeerFork { victim, head: None, mined: HashSet::new(), stats: AttackStats::default() }
    }

    /// Latest confirmed block of the victim that already has a successor
    /// on its peer chain.
    fn fork_point(&self, node: &Node) -> Option<Hash256> {
        let d = &node.sdag;
        d.blocks()
            .filter(|(_, b)| b.peer == self.victim)
            .filter_map(|(id, _)| d.level_of(id).map(|l| (l, *id)))
            .filter(|(_, id)| d.children(id).iter().any(|c| d.get(c).is_some_and(|b| b.peer == self.victim && b.idp == *id)))
            .max()
            .map(|(_, id)| id)
    }

    fn on_mine(&mut self, node: &mut Node) -> Step {
        let Some(base) = self.head.or_else(|| self.fork_point(node)) else {
            return Step { mined: None, publish: Vec::new() };
        };
        let tips = node.sdag.tip_set(&self.victim);
        let idt = if tips.is_empty() { genesis_id() } else { tips[node.rng().random_range(0..tips.len())] };
        let mut t = Block::new(base, node.sdag.main_tip(), idt, self.victim, Transaction::empty());
        t.pow = node.rng().random();
        let m = node.mine_template(t);
        let b = node.adopt_own(&m);
        self.head = Some(m.id);
        self.mined.insert(m.id);
        self.stats.attempts += 1;
        self.stats.attacker_blocks += 1;
        Step { mined: Some((m.id, b.clone(), m.class)), publish: vec![b] }
    }
}
