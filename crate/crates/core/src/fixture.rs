//! The five-miner example DAG: five peer chains `a..d` deep, a main
//! milestone chain of height five and a forked milestone at height four.
//!
//! Labels are `<position><miner>`: `b3` is the second block of miner 3.

use std::collections::BTreeMap;

use crate::block::{classify_hash, genesis_id, BlockClass, Block, PeerId};
use crate::crypto::{Keypair, MockScheme};
use crate::dag::{SDag, TieBreak};
use crate::hash::Hash256;
use crate::ledger::LedgerConfig;
use crate::params::{Frac, Params};
use crate::tx::{OutPoint, Transaction, TxInput, TxOutput};

/// `(label, idp, idm, idt)` in creation order; `O` is genesis.
pub const TOPOLOGY: [(&str, &str, &str, &str); 19] = [
    ("a2", "O", "O", "O"),
    ("a5", "O", "O", "O"),
    ("a4", "O", "a2", "a5"),
    ("a3", "O", "a2", "a4"),
    ("a1", "O", "a2", "a3"),
    ("b5", "a5", "a2", "a3"),
    ("b4", "a4", "a1", "b5"),
    ("b2", "a2", "a1", "b4"),
    ("b3", "a3", "a1", "b2"),
    ("c3", "b3", "b3", "b2"),
    ("b1", "a1", "b3", "c3"),
    ("c2", "b2", "b3", "b1"),
    ("d2", "c2", "c2", "b1"),
    ("c1", "b1", "c2", "d2"),
    ("c5", "b5", "b3", "c3"),
    ("c4", "b4", "b3", "c5"),
    ("d4", "c4", "c4", "c5"),
    ("d3", "c3", "c4", "d4"),
    ("d5", "c5", "c4", "d3"),
];

pub const MILESTONES: [&str; 6] = ["a2", "a1", "b3", "c4", "c2", "d5"];

pub struct Fixture {
    pub params: Params,
    /// Blocks in creation order, which is topological.
    pub blocks: Vec<(&'static str, Block)>,
    pub ids: BTreeMap<&'static str, Hash256>,
    pub miners: Vec<Keypair>,
    pub clients: Vec<Keypair>,
    pub allocation: Vec<TxOutput>,
}

impl Fixture {
    pub fn id(&self, label: &str) -> Hash256 {
        if label == "O" {
            genesis_id()
        } else {
            self.ids[label]
        }
    }

    pub fn label(&self, id: &Hash256) -> &'static str {
        if *id == genesis_id() {
            return "O";
        }
        self.ids.iter().find(|(_, v)| *v == id).map(|(k, _)| *k).unwrap_or("?")
    }

    pub fn labels(&self, ids: &[Hash256]) -> Vec<&'static str> {
        ids.iter().map(|i| self.label(i)).collect()
    }

    pub fn block(&self, label: &str) -> &Block {
        &self.blocks.iter().find(|(l, _)| *l == label).unwrap().1
    }

    pub fn ledger_config(&self) -> LedgerConfig {
        LedgerConfig::new(self.params.clone()).with_allocation(self.allocation.clone())
    }

    /// SDag with every block inserted in creation order.
    pub fn dag(&self, tie: TieBreak) -> SDag {
        self.dag_without(tie, &[])
    }

    pub fn dag_without(&self, tie: TieBreak, skip: &[&str]) -> SDag {
        let mut d = SDag::with_tie_break(self.params.clone(), tie);
        for (l, b) in &self.blocks {
            if !skip.contains(l) {
                d.insert(b.clone()).expect("fixture block is valid");
            }
        }
        d
    }
}

fn spend(client: &Keypair, prev: OutPoint, outputs: Vec<TxOutput>) -> Transaction {
    let mut tx = Transaction::normal(vec![TxInput { prev, witness: Vec::new() }], outputs);
    tx.inputs[0].witness = client.witness(&MockScheme, &tx.sighash());
    tx
}

/// Mine nonces upward from zero until the block lands in `want`'s band.
fn mine_class(mut b: Block, want: BlockClass, params: &Params) -> Block {
    loop {
        if classify_hash(&b.id(), params) == want {
            return b;
        }
        b.pow += 1;
    }
}

pub fn five_miners() -> Fixture {
    let params = Params::with_defaults(Frac::new(1, 2), Frac::new(1, 4), 1.0).expect("valid fixture params");
    let s = MockScheme;
    let miners: Vec<Keypair> = (1..=5).map(|i| Keypair::from_seed(&s, format!("miner-{i}").as_bytes())).collect();
    let clients: Vec<Keypair> = (0..4).map(|i| Keypair::from_seed(&s, format!("client-{i}").as_bytes())).collect();
    let allocation: Vec<TxOutput> = clients.iter().map(|c| TxOutput { value: 1000, address: c.address() }).collect();
    let g = genesis_id();
    let alloc = |i: u32| OutPoint { txid: g, index: i };

    let pay_b5 = spend(&clients[0], alloc(0), vec![TxOutput { value: 900, address: clients[1].address() }]);
    let mut payloads: BTreeMap<&str, Transaction> = BTreeMap::new();
    payloads.insert("b4", spend(&clients[1], alloc(1), vec![TxOutput { value: 1000, address: clients[2].address() }]));
    payloads.insert("c5", spend(&clients[0], alloc(0), vec![TxOutput { value: 950, address: clients[3].address() }]));
    payloads.insert("d4", spend(&clients[2], alloc(2), vec![TxOutput { value: 800, address: clients[0].address() }]));
    payloads.insert("b1", spend(&clients[3], alloc(3), vec![TxOutput { value: 1000, address: clients[3].address() }]));
    payloads.insert(
        "c3",
        spend(&clients[1], OutPoint { txid: pay_b5.id(), index: 0 }, vec![TxOutput { value: 850, address: clients[0].address() }]),
    );
    payloads.insert("b5", pay_b5);

    let mut ids: BTreeMap<&'static str, Hash256> = BTreeMap::new();
    let mut blocks = Vec::new();
    for (label, idp, idm, idt) in TOPOLOGY {
        let miner = &miners[(label.as_bytes()[1] - b'1') as usize];
        let r = |l: &str| if l == "O" { g } else { ids[l] };
        let mes = if idp == "O" {
            let mut tx = Transaction::registration(miner.address());
            tx.inputs[0].witness = miner.witness(&s, &tx.sighash());
            tx
        } else {
            payloads.get(label).cloned().unwrap_or_default()
        };
        let want = if MILESTONES.contains(&label) { BlockClass::Milestone } else { BlockClass::Regular };
        let b = mine_class(Block::new(r(idp), r(idm), r(idt), miner.peer_id(), mes), want, &params);
        ids.insert(label, b.id());
        blocks.push((label, b));
    }
    Fixture { params, blocks, ids, miners, clients, allocation }
}

/// Peer id of miner `k` (1-based) in [`five_miners`].
pub fn miner_peer(f: &Fixture, k: usize) -> PeerId {
    f.miners[k - 1].peer_id()
}
