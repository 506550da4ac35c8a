#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdag_core::block::classify_hash;
use sdag_core::crypto::{Keypair, MockScheme};
use sdag_core::{genesis_id, Block, BlockClass, Frac, Hash256, Params, PeerId, Transaction};

/// Trivial difficulty, milestone share 1/4: every nonce is valid and the
/// class is decided by the hash.
pub fn easy_params() -> Params {
    Params::with_defaults(Frac::ONE, Frac::new(1, 4), 1.0).unwrap()
}

pub struct Gen {
    pub rng: ChaCha8Rng,
    pub params: Params,
    pub miners: Vec<PeerId>,
    heads: Vec<Vec<Hash256>>,
    milestones: Vec<(Hash256, u32)>,
    regular: Vec<(Hash256, usize)>,
    pub blocks: Vec<Block>,
}

impl Gen {
    pub fn new(seed: u64, miners: usize) -> Self {
        let s = MockScheme;
        let miners = (0..miners).map(|i| Keypair::from_seed(&s, format!("m{i}").as_bytes()).peer_id()).collect();
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            params: easy_params(),
            miners,
            heads: Vec::new(),
            milestones: vec![(genesis_id(), 0)],
            regular: Vec::new(),
            blocks: Vec::new(),
        }
    }

    /// Append one random structurally valid block; `fork` is the chance the
    /// block extends an older own block instead of the head.
    pub fn step(&mut self, fork: f64, mes: Transaction) -> Block {
        if self.heads.is_empty() {
            self.heads = vec![Vec::new(); self.miners.len()];
        }
        let m = self.rng.random_range(0..self.miners.len());
        let own = &self.heads[m];
        let idp = if own.is_empty() {
            genesis_id()
        } else if self.rng.random_bool(fork) {
            *own.choose(&mut self.rng).unwrap()
        } else {
            *own.last().unwrap()
        };
        let top = self.milestones.iter().map(|x| x.1).max().unwrap();
        let high: Vec<Hash256> = self.milestones.iter().filter(|x| x.1 + 1 >= top).map(|x| x.0).collect();
        let idm = if self.rng.random_bool(0.8) { *high.choose(&mut self.rng).unwrap() } else { self.milestones.choose(&mut self.rng).unwrap().0 };
        let others: Vec<Hash256> = self.regular.iter().filter(|r| r.1 != m).map(|r| r.0).collect();
        let idt = if others.is_empty() { genesis_id() } else { *others[others.len().saturating_sub(6)..].choose(&mut self.rng).unwrap() };
        let mut b = Block::new(idp, idm, idt, self.miners[m], mes);
        b.pow = self.rng.random();
        let id = b.id();
        let h = self.milestones.iter().find(|x| x.0 == idm).map(|x| x.1).unwrap();
        match classify_hash(&id, &self.params) {
            BlockClass::Milestone => self.milestones.push((id, h + 1)),
            BlockClass::Regular => self.regular.push((id, m)),
            BlockClass::Invalid => unreachable!(),
        }
        self.heads[m].push(id);
        self.blocks.push(b.clone());
        b
    }

    pub fn run(seed: u64, miners: usize, n: usize, fork: f64) -> Gen {
        let mut g = Gen::new(seed, miners);
        for _ in 0..n {
            g.step(fork, Transaction::empty());
        }
        g
    }
}

/// A random permutation of `blocks` that is still topological.
pub fn random_topological(blocks: &[Block], rng: &mut impl Rng) -> Vec<Block> {
    use std::collections::HashSet;
    let mut placed: HashSet<Hash256> = HashSet::new();
    placed.insert(genesis_id());
    let mut rest: Vec<(Hash256, Block)> = blocks.iter().map(|b| (b.id(), b.clone())).collect();
    let mut out = Vec::with_capacity(rest.len());
    while !rest.is_empty() {
        let ready: Vec<usize> = (0..rest.len()).filter(|&i| rest[i].1.refs().iter().all(|r| placed.contains(r))).collect();
        let pick = *ready.choose(rng).unwrap();
        let (id, b) = rest.swap_remove(pick);
        placed.insert(id);
        out.push(b);
    }
    out
}
