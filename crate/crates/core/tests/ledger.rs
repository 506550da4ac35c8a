mod common;

use std::collections::{BTreeMap, HashMap};

use common::{easy_params, random_topological, Gen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdag_core::block::classify_hash;
use sdag_core::crypto::{Keypair, MockScheme};
use sdag_core::fixture::five_miners;
use sdag_core::ledger::{
    block_reward, build_ledger, dfs_order, order_all, BlockKind, ChainStatus, Ledger, LedgerConfig, Reject,
    RedemptionError, TxValidity,
};
use sdag_core::{genesis_id, Block, BlockClass, Frac, Hash256, OutPoint, Params, SDag, TieBreak, Transaction, TxInput, TxOutput};

fn g() -> Hash256 {
    genesis_id()
}

fn key(s: &str) -> Keypair {
    Keypair::from_seed(&MockScheme, s.as_bytes())
}

fn forge(mut b: Block, want: BlockClass) -> Block {
    let p = easy_params();
    while classify_hash(&b.id(), &p) != want {
        b.pow += 1;
    }
    b
}

fn put(d: &mut SDag, refs: [Hash256; 3], who: &Keypair, tx: Transaction, class: BlockClass) -> Hash256 {
    let b = forge(Block::new(refs[0], refs[1], refs[2], who.peer_id(), tx), class);
    let id = b.id();
    d.insert(b).unwrap();
    id
}

fn registration(who: &Keypair) -> Transaction {
    let mut tx = Transaction::registration(who.address());
    tx.inputs[0].witness = who.witness(&MockScheme, &tx.sighash());
    tx
}

fn redemption(signer: &Keypair, anchor: Hash256, claim: u64, next: &Keypair) -> Transaction {
    let mut tx = Transaction::redemption(anchor, claim, next.address());
    tx.inputs[0].witness = signer.witness(&MockScheme, &tx.sighash());
    tx
}

fn spend(owner: &Keypair, prev: OutPoint, outputs: Vec<TxOutput>) -> Transaction {
    let mut tx = Transaction::normal(vec![TxInput { prev, witness: Vec::new() }], outputs);
    tx.inputs[0].witness = owner.witness(&MockScheme, &tx.sighash());
    tx
}

#[test]
fn dfs_of_a_lone_milestone() {
    let mut d = SDag::new(easy_params());
    let m = put(&mut d, [g(); 3], &key("x"), Transaction::empty(), BlockClass::Milestone);
    assert_eq!(dfs_order(&d, &m).unwrap(), vec![m]);
}

#[test]
fn dfs_visits_idp_then_idt_then_self() {
    let (x, y) = (key("x"), key("y"));
    let mut d = SDag::new(easy_params());
    let a = put(&mut d, [g(); 3], &x, Transaction::empty(), BlockClass::Regular);
    let b = put(&mut d, [g(); 3], &y, Transaction::empty(), BlockClass::Regular);
    let m = put(&mut d, [a, g(), b], &x, Transaction::empty(), BlockClass::Milestone);
    assert_eq!(dfs_order(&d, &m).unwrap(), vec![a, b, m]);
    // a chain hanging off idt is emitted deepest first
    let (z, w) = (key("z"), key("w"));
    let c = put(&mut d, [g(), m, b], &z, Transaction::empty(), BlockClass::Regular);
    let e = put(&mut d, [g(), m, c], &w, Transaction::empty(), BlockClass::Regular);
    let m2 = put(&mut d, [m, m, e], &x, Transaction::empty(), BlockClass::Milestone);
    assert_eq!(dfs_order(&d, &m2).unwrap(), vec![c, e, m2]);
    assert!(dfs_order(&d, &c).is_err());
}

#[test]
fn example_ledger_order() {
    let f = five_miners();
    let items = order_all(&f.dag(TieBreak::LowestId));
    let got: Vec<&str> = items.iter().map(|i| f.label(&i.block_id)).collect();
    assert_eq!(got, ["a2", "a5", "a4", "a3", "a1", "b5", "b4", "b2", "b3", "c3", "c5", "c4", "d4", "d3", "d5"]);
    assert_eq!(dfs_order(&f.dag(TieBreak::LowestId), &f.id("d5")).unwrap(), ["d4", "d3", "d5"].map(|l| f.id(l)));
}

#[test]
fn example_ledger_contents() {
    let f = five_miners();
    let d = f.dag(TieBreak::LowestId);
    let l = Ledger::from_sdag(&d, f.ledger_config());
    let rec: BTreeMap<&str, _> = l.records().iter().map(|r| (f.label(&r.block_id), r.clone())).collect();
    for a in ["a1", "a2", "a3", "a4", "a5"] {
        assert_eq!(rec[a].validity, TxValidity::Valid, "{a}");
    }
    for m in 1..=5 {
        assert!(l.is_registered(&f.miners[m - 1].peer_id()));
    }
    assert_eq!((rec["b5"].validity, rec["b5"].fee), (TxValidity::Valid, 100));
    assert_eq!((rec["b4"].validity, rec["b4"].fee), (TxValidity::Valid, 0));
    assert_eq!((rec["c3"].validity, rec["c3"].fee), (TxValidity::Valid, 50));
    assert_eq!((rec["d4"].validity, rec["d4"].fee), (TxValidity::Valid, 200));
    // c5 comes after b5 in ledger order and spends the same genesis output
    assert_eq!(rec["c5"].validity, TxValidity::Invalid);
    assert!(matches!(rec["c5"].reject, Some(Reject::MissingInput(_))));
    assert_eq!(rec["b2"].validity, TxValidity::None);
    // b1 is pending: its spend is not in the ledger
    assert!(!l.has_tx(&f.block("b1").mes.id()));
    assert!(l.is_unspent(&OutPoint { txid: g(), index: 3 }));
    assert!(!l.is_unspent(&OutPoint { txid: g(), index: 0 }));
    assert_eq!(l.utxo_total(), 4000 - 350);

    let expect: BTreeMap<&str, u64> = [
        ("a2", 1000),
        ("a5", 100),
        ("a4", 100),
        ("a3", 100),
        ("a1", 1006),
        ("b5", 200),
        ("b4", 100),
        ("b2", 100),
        ("b3", 1006),
        ("c3", 150),
        ("c5", 100),
        ("c4", 1004),
        ("d4", 300),
        ("d3", 100),
        ("d5", 1004),
    ]
    .into();
    let got: BTreeMap<&str, u64> = l.rewards().iter().map(|r| (f.label(&r.block_id), r.amount)).collect();
    assert_eq!(got, expect);
    assert!(l.rewards().iter().all(|r| r.status == ChainStatus::OnPeerChain));
    let csv = l.to_csv();
    assert_eq!(csv.lines().count(), 16);
    assert!(csv.starts_with("level,position,block_id,tx_id,accepted,reward\n1,0,"));
}

#[test]
fn reward_rows() {
    let p = Params::with_defaults(Frac::ONE, Frac::new(1, 4), 1.0).unwrap();
    use BlockKind::*;
    use ChainStatus::*;
    use TxValidity::*;
    assert_eq!(block_reward(RegularPlus, OnPeerChain, Valid, 7, 5, &p), 107);
    assert_eq!(block_reward(RegularPlus, OnPeerChain, Invalid, 7, 5, &p), 100);
    assert_eq!(block_reward(RegularPlus, OnPeerChain, None, 0, 5, &p), 100);
    assert_eq!(block_reward(RegularPlus, ForkedFromPeerChain, Valid, 7, 5, &p), 0);
    assert_eq!(block_reward(RegularPlus, ForkedFromPeerChain, Invalid, 7, 5, &p), 0);
    assert_eq!(block_reward(MainMilestone, OnPeerChain, Valid, 7, 10001, &p), 1000 + 7 + 20_000);
    assert_eq!(block_reward(MainMilestone, OnPeerChain, Invalid, 7, 10001, &p), 1000 + 20_000);
    assert_eq!(block_reward(MainMilestone, ForkedFromPeerChain, Valid, 7, 10001, &p), 0);
    assert_eq!(block_reward(MainMilestone, OnPeerChain, None, 0, 1, &p), 1000);
}

/// One miner building a milestone chain on its own peer chain: every level
/// set is a single block.
struct Solo {
    d: SDag,
    who: Keypair,
    head: Hash256,
}

impl Solo {
    fn new(who: Keypair) -> Self {
        let mut d = SDag::new(easy_params());
        let head = put(&mut d, [g(); 3], &who, registration(&who), BlockClass::Milestone);
        Solo { d, who, head }
    }

    fn push(&mut self, tx: Transaction, class: BlockClass) -> Hash256 {
        let idm = self.d.main_tip();
        self.head = put(&mut self.d, [self.head, idm, g()], &self.who, tx, class);
        self.head
    }

    fn ledger(&self) -> Ledger {
        Ledger::from_sdag(&self.d, LedgerConfig::new(easy_params()))
    }
}

#[test]
fn redemption_claims_the_span_since_registration() {
    let x = key("x");
    let mut s = Solo::new(x.clone());
    s.push(Transaction::empty(), BlockClass::Milestone);
    s.push(Transaction::empty(), BlockClass::Milestone);
    let l = s.ledger();
    let reg = l.anchor_tx(&x.peer_id()).unwrap();
    // independent sum: three main milestones with one-block level sets
    let oracle: u64 = l.records().iter().map(|r| {
        assert_eq!((r.kind, r.level_size), (BlockKind::MainMilestone, 1));
        1000
    }).sum();
    assert_eq!(oracle, 3000);
    assert_eq!(l.peer_chain(&x.peer_id()).accrued, oracle);

    let next = key("x-next");
    let ok = s.push(redemption(&x, reg, oracle, &next), BlockClass::Milestone);
    let l = s.ledger();
    let r = l.records().iter().find(|r| r.block_id == ok).unwrap();
    assert_eq!(r.validity, TxValidity::Valid, "{:?}", r.reject);
    let tx_id = s.d.get(&ok).unwrap().mes.id();
    assert_eq!(l.utxo_get(&OutPoint { txid: tx_id, index: 0 }), Some(TxOutput { value: 3000, address: x.address() }));
    assert_eq!(l.anchor_tx(&x.peer_id()), Some(tx_id));
    assert_eq!(l.peer_chain(&x.peer_id()).address, Some(next.address()));
    assert_eq!(l.utxo_total(), 3000);

    // the redemption block's own reward starts the next span
    s.push(Transaction::empty(), BlockClass::Milestone);
    let l = s.ledger();
    assert_eq!(l.peer_chain(&x.peer_id()).accrued, 2000);
    let mut stale = s.d.clone();
    let b = forge(Block::new(s.head, s.d.main_tip(), g(), x.peer_id(), redemption(&next, reg, 2000, &next)), BlockClass::Milestone);
    assert_eq!(l.validate_redemption(&b), Err(RedemptionError::StaleAnchor));
    stale.insert(b).unwrap();
    let good = forge(Block::new(s.head, s.d.main_tip(), g(), x.peer_id(), redemption(&next, tx_id, 2000, &next)), BlockClass::Milestone);
    assert_eq!(l.validate_redemption(&good), Ok(()));
    let old_key = forge(Block::new(s.head, s.d.main_tip(), g(), x.peer_id(), redemption(&x, tx_id, 2000, &next)), BlockClass::Milestone);
    assert_eq!(l.validate_redemption(&old_key), Err(RedemptionError::BadSignature));
}

#[test]
fn redemption_errors() {
    let x = key("x");
    let mut s = Solo::new(x.clone());
    s.push(Transaction::empty(), BlockClass::Milestone);
    let l = s.ledger();
    let reg = l.anchor_tx(&x.peer_id()).unwrap();
    let tip = s.d.main_tip();
    let at = |tx: Transaction| forge(Block::new(s.head, tip, g(), x.peer_id(), tx), BlockClass::Regular);
    assert_eq!(l.validate_redemption(&at(redemption(&x, reg, 2000, &x))), Ok(()));
    assert_eq!(
        l.validate_redemption(&at(redemption(&x, reg, 2001, &x))),
        Err(RedemptionError::WrongAmount { expected: 2000, claimed: 2001 })
    );
    assert_eq!(
        l.validate_redemption(&at(redemption(&x, reg, 1999, &x))),
        Err(RedemptionError::WrongAmount { expected: 2000, claimed: 1999 })
    );
    assert_eq!(l.validate_redemption(&at(redemption(&key("mallory"), reg, 2000, &x))), Err(RedemptionError::BadSignature));
    assert_eq!(l.validate_redemption(&at(Transaction::empty())), Err(RedemptionError::NotRedemption));
    let stranger = forge(Block::new(g(), tip, g(), key("y").peer_id(), redemption(&x, reg, 0, &x)), BlockClass::Regular);
    assert_eq!(l.validate_redemption(&stranger), Err(RedemptionError::Unregistered));

    // a wrong claim that reaches the ledger is rejected there
    s.push(redemption(&x, reg, 1, &x), BlockClass::Milestone);
    let l = s.ledger();
    let last = l.records().last().unwrap();
    assert_eq!(last.validity, TxValidity::Invalid);
    assert_eq!(last.reject, Some(Reject::Redemption(RedemptionError::WrongAmount { expected: 2000, claimed: 1 })));
    assert_eq!(l.utxo_total(), 0);
}

#[test]
fn registration_must_be_first_and_signed() {
    let (x, y) = (key("x"), key("y"));
    let mut s = Solo::new(x.clone());
    let mut again = Transaction::registration(y.address());
    again.inputs[0].witness = x.witness(&MockScheme, &again.sighash());
    s.push(again, BlockClass::Milestone);
    // y signs a registration for z's peer id
    let tip = s.d.main_tip();
    let forged = put(&mut s.d, [g(), tip, g()], &key("z"), registration(&y), BlockClass::Milestone);
    let l = s.ledger();
    let rec: HashMap<Hash256, _> = l.records().iter().map(|r| (r.block_id, r.clone())).collect();
    assert_eq!(rec[&s.head].reject, Some(Reject::NotFirstBlock));
    assert_eq!(rec[&forged].reject, Some(Reject::BadSignature));
}

#[test]
fn forked_peer_chain_earns_nothing_until_redeemed_on() {
    // victim v on chain v1 -> v2 -> v3; someone mines f2 on v1 under v's id
    let v = key("victim");
    let mut d = SDag::new(easy_params());
    let v1 = put(&mut d, [g(); 3], &v, registration(&v), BlockClass::Milestone);
    let v2 = put(&mut d, [v1, v1, g()], &v, Transaction::empty(), BlockClass::Milestone);
    let fork = forge(Block::new(v1, v2, g(), v.peer_id(), Transaction::empty()), BlockClass::Milestone);
    let f2 = fork.id();
    d.insert(fork).unwrap();
    let v3 = put(&mut d, [v2, f2, g()], &v, Transaction::empty(), BlockClass::Milestone);
    let l = Ledger::from_sdag(&d, LedgerConfig::new(easy_params()));
    let status: HashMap<Hash256, (ChainStatus, u64)> = l.rewards().iter().map(|r| (r.block_id, (r.status, r.amount))).collect();
    assert_eq!(status[&v1].0, ChainStatus::OnPeerChain);
    assert_eq!(status[&v2].0, ChainStatus::OnPeerChain);
    assert_eq!(status[&v3].0, ChainStatus::OnPeerChain);
    assert_eq!(status[&f2], (ChainStatus::ForkedFromPeerChain, 0));
    assert_eq!(l.peer_chain(&v.peer_id()).blocks, vec![v1, v2, v3]);

    // the victim redeems on the fork instead: accrued follows the fork's idp path
    let reg = l.anchor_tx(&v.peer_id()).unwrap();
    let claim = 1000 + 1000; // v1 and f2, both main milestones alone in their level
    let r = put(&mut d, [f2, v3, g()], &v, redemption(&v, reg, claim, &v), BlockClass::Milestone);
    let l = Ledger::from_sdag(&d, LedgerConfig::new(easy_params()));
    let status: HashMap<Hash256, ChainStatus> = l.rewards().iter().map(|r| (r.block_id, r.status)).collect();
    assert_eq!(l.records().last().unwrap().validity, TxValidity::Valid);
    assert_eq!(status[&f2], ChainStatus::OnPeerChain);
    assert_eq!(status[&r], ChainStatus::OnPeerChain);
    assert_eq!(status[&v2], ChainStatus::ForkedFromPeerChain);
    assert_eq!(status[&v3], ChainStatus::ForkedFromPeerChain);
    assert_eq!(l.peer_chain(&v.peer_id()).blocks, vec![v1, f2, r]);
}

#[test]
fn double_spend_pair_first_in_order_wins() {
    let (x, y, c) = (key("x"), key("y"), key("client"));
    let cfg = LedgerConfig::new(easy_params()).with_allocation(vec![TxOutput { value: 50, address: c.address() }]);
    let mut d = SDag::new(easy_params());
    let t1 = spend(&c, OutPoint { txid: g(), index: 0 }, vec![TxOutput { value: 50, address: x.address() }]);
    let t2 = spend(&c, OutPoint { txid: g(), index: 0 }, vec![TxOutput { value: 40, address: y.address() }]);
    let a = put(&mut d, [g(); 3], &x, t1.clone(), BlockClass::Regular);
    let b = put(&mut d, [g(), g(), a], &y, t2.clone(), BlockClass::Regular);
    put(&mut d, [g(), g(), b], &key("z"), Transaction::empty(), BlockClass::Milestone);
    let l = Ledger::from_sdag(&d, cfg.clone());
    assert!(l.has_tx(&t1.id()));
    assert_eq!(l.txs().iter().filter(|t| t.0 == t2.id()).count(), 0);
    assert_eq!(l.utxo_total(), 50);
    let again = build_ledger(&order_all(&d), cfg);
    assert_eq!(again.utxo_digest(), l.utxo_digest());
}

/// Chronology oracle: each block's idp parent appears earlier in ledger order.
#[test]
fn peer_chain_chronology_in_ledger_order() {
    for seed in 0..300 {
        let gen = Gen::run(seed, 5, 80, 0.15);
        let mut d = SDag::new(easy_params());
        for b in &gen.blocks {
            d.insert(b.clone()).unwrap();
        }
        let items = order_all(&d);
        let pos: HashMap<Hash256, usize> = items.iter().enumerate().map(|(i, it)| (it.block_id, i)).collect();
        assert_eq!(pos.len(), items.len());
        for it in &items {
            if it.block.idp != g() {
                assert!(pos[&it.block.idp] < pos[&it.block_id], "seed {seed}");
            }
        }
        for k in 1..d.level_count() {
            let mut a = dfs_order(&d, &d.main_milestone(k).unwrap()).unwrap();
            let mut b = d.level(k);
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }
}

/// Random spends of a funded client set: insertion order never changes the
/// ledger, duplicates enter once, and no value is created.
#[test]
fn ledger_determinism_duplicates_and_conservation() {
    use rand::Rng;
    let clients: Vec<Keypair> = (0..6).map(|i| key(&format!("c{i}"))).collect();
    let alloc: Vec<TxOutput> = clients.iter().map(|c| TxOutput { value: 1_000, address: c.address() }).collect();
    let total: u128 = 6_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..60 {
        let mut gen = Gen::new(seed, 4);
        // outputs known to exist somewhere, with owner index
        let mut known: Vec<(OutPoint, u64, usize)> =
            (0..6).map(|i| (OutPoint { txid: g(), index: i as u32 }, 1_000, i)).collect();
        let mut dup: Option<Transaction> = None;
        for _ in 0..70 {
            let tx = if rng.random_bool(0.4) {
                let (op, v, owner) = known[rng.random_range(0..known.len())];
                let to = rng.random_range(0..6);
                let pay = rng.random_range(0..=v);
                let tx = spend(&clients[owner], op, vec![TxOutput { value: pay, address: clients[to].address() }]);
                known.push((OutPoint { txid: tx.id(), index: 0 }, pay, to));
                dup = Some(tx.clone());
                tx
            } else if rng.random_bool(0.2) && dup.is_some() {
                dup.clone().unwrap()
            } else {
                Transaction::empty()
            };
            gen.step(0.05, tx);
        }
        let cfg = LedgerConfig::new(easy_params()).with_allocation(alloc.clone());
        let mut ref_d = SDag::new(easy_params());
        for b in &gen.blocks {
            ref_d.insert(b.clone()).unwrap();
        }
        let reference = Ledger::from_sdag(&ref_d, cfg.clone());
        let mut counts: HashMap<Hash256, usize> = HashMap::new();
        for t in reference.txs() {
            *counts.entry(t.0).or_default() += 1;
        }
        assert!(counts.values().all(|&c| c == 1));
        let fees: u128 = reference.records().iter().filter(|r| r.accepted()).map(|r| r.fee as u128).sum();
        assert_eq!(reference.utxo_total() + fees, total);
        for _ in 0..5 {
            let mut d = SDag::new(easy_params());
            for b in random_topological(&gen.blocks, &mut rng) {
                d.insert(b).unwrap();
            }
            let l = Ledger::from_sdag(&d, cfg.clone());
            assert_eq!(l.to_csv(), reference.to_csv());
            assert_eq!(l.utxo_digest(), reference.utxo_digest());
        }
    }
}
