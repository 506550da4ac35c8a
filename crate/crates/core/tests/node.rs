mod common;

use std::sync::Arc;

use common::easy_params;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdag_core::block::classify_hash;
use sdag_core::crypto::{Keypair, MockScheme};
use sdag_core::fixture::five_miners;
use sdag_core::ledger::{Ledger, LedgerConfig};
use sdag_core::node::{InboundEvent, Node, NodeConfig, OutboundAction};
use sdag_core::{genesis_id, Block, BlockClass, Hash256, OutPoint, Params, SDag, TieBreak, Transaction, TxInput, TxKind, TxOutput};

fn key(s: &str) -> Keypair {
    Keypair::from_seed(&MockScheme, s.as_bytes())
}

fn node(name: &str, params: Params, seed: u64) -> Node {
    Node::new(SDag::with_tie_break(params.clone(), TieBreak::FirstSeen), key(name), LedgerConfig::new(params), NodeConfig::default(), seed)
}

fn forge(mut b: Block, want: BlockClass) -> Block {
    let p = easy_params();
    while classify_hash(&b.id(), &p) != want {
        b.pow += 1;
    }
    b
}

fn g() -> Hash256 {
    genesis_id()
}

fn relayed(actions: &[OutboundAction]) -> Vec<Hash256> {
    actions.iter().filter_map(|a| if let OutboundAction::Relay(b) = a { Some(b.id()) } else { None }).collect()
}

#[test]
fn first_block_points_at_genesis_and_the_chain_grows() {
    let mut n = node("x", easy_params(), 1);
    let a = n.create_block(0.0);
    assert_eq!(a.block.refs(), [g(); 3]);
    assert_eq!(a.block.mes.kind, TxKind::Registration);
    assert!(matches!(&a.actions[..], [OutboundAction::Publish(_)]));
    let b = n.create_block(1.0);
    assert_eq!(b.block.idp, a.id);
    assert_eq!(n.my_head(), b.id);
    assert_eq!(b.block.mes.kind, TxKind::Empty);
}

#[test]
fn unknown_parent_is_requested_then_drained() {
    let (x, y) = (key("x"), key("y"));
    let parent = forge(Block::new(g(), g(), g(), x.peer_id(), Transaction::empty()), BlockClass::Regular);
    let child = forge(Block::new(g(), g(), parent.id(), y.peer_id(), Transaction::empty()), BlockClass::Regular);
    let grandchild = forge(Block::new(child.id(), g(), parent.id(), y.peer_id(), Transaction::empty()), BlockClass::Milestone);
    let mut n = node("z", easy_params(), 2);
    let out = n.on_receive_block(Arc::new(grandchild.clone()), 0.0);
    assert_eq!(out, vec![OutboundAction::RequestMissing(vec![child.id(), parent.id()])]);
    let out = n.on_receive_block(Arc::new(child.clone()), 0.1);
    assert_eq!(out, vec![OutboundAction::RequestMissing(vec![parent.id()])]);
    assert_eq!(n.orphan_count(), 2);
    let out = n.on_receive_block(Arc::new(parent.clone()), 0.2);
    assert_eq!(relayed(&out), vec![parent.id(), child.id(), grandchild.id()]);
    assert_eq!(n.orphan_count(), 0);
    assert_eq!(n.sdag.main_tip(), grandchild.id());
    // relay-once
    assert!(n.on_receive_block(Arc::new(child), 0.3).is_empty());
    assert_eq!(n.stats.duplicates, 1);
}

#[test]
fn invalid_blocks_are_dropped_silently() {
    let (x, y) = (key("x"), key("y"));
    let ms = forge(Block::new(g(), g(), g(), x.peer_id(), Transaction::empty()), BlockClass::Milestone);
    let bad = forge(Block::new(g(), g(), ms.id(), y.peer_id(), Transaction::empty()), BlockClass::Regular);
    let mut n = node("z", easy_params(), 3);
    n.on_receive_block(Arc::new(ms), 0.0);
    assert!(n.on_receive_block(Arc::new(bad.clone()), 0.0).is_empty());
    assert_eq!(n.stats.invalid, 1);
    assert!(!n.sdag.contains(&bad.id()));
    assert!(!n.has_relayed(&bad.id()));
}

#[test]
fn lagging_view_to_full_view_switch() {
    let f = five_miners();
    let mut n = Node::new(
        SDag::with_tie_break(f.params.clone(), TieBreak::FirstSeen),
        key("observer"),
        f.ledger_config(),
        NodeConfig::default(),
        4,
    );
    for (l, b) in &f.blocks {
        if *l != "d5" {
            n.on_receive_block(Arc::new(b.clone()), 0.0);
        }
    }
    assert_eq!(f.labels(&n.sdag.main_chain()), ["O", "a2", "a1", "b3", "c2"]);
    let before = n.ledger().utxo_digest();
    assert_eq!(before, Ledger::from_sdag(&f.dag_without(TieBreak::FirstSeen, &["d5"]), f.ledger_config()).utxo_digest());
    let out = n.on_receive_block(Arc::new(f.block("d5").clone()), 1.0);
    assert_eq!(relayed(&out), vec![f.id("d5")]);
    assert_eq!(n.stats.switches, 1);
    assert_eq!(f.labels(&n.sdag.main_chain()), ["O", "a2", "a1", "b3", "c4", "d5"]);
    let fresh = Ledger::from_sdag(&f.dag(TieBreak::FirstSeen), f.ledger_config());
    assert_eq!(n.ledger().to_csv(), fresh.to_csv());
    assert_eq!(n.ledger().utxo_digest(), fresh.utxo_digest());
}

#[test]
fn double_spends_are_accepted_structurally_and_mempool_is_pruned() {
    let (x, y, c) = (key("x"), key("y"), key("client"));
    let spend = |to: &Keypair, v: u64| {
        let mut t = Transaction::normal(
            vec![TxInput { prev: OutPoint { txid: g(), index: 0 }, witness: vec![] }],
            vec![TxOutput { value: v, address: to.address() }],
        );
        t.inputs[0].witness = c.witness(&MockScheme, &t.sighash());
        t
    };
    let (t1, t2) = (spend(&x, 10), spend(&y, 9));
    let mut n = node("z", easy_params(), 5);
    n.on_event(InboundEvent::TxArrived { tx: t1.clone(), fee: 0 }, 0.0);
    assert!(n.mempool.contains(&t1.id()));
    let a = forge(Block::new(g(), g(), g(), x.peer_id(), t1.clone()), BlockClass::Regular);
    let b = forge(Block::new(g(), g(), g(), y.peer_id(), t2), BlockClass::Regular);
    assert_eq!(relayed(&n.on_receive_block(Arc::new(a), 0.0)).len(), 1);
    assert_eq!(relayed(&n.on_receive_block(Arc::new(b), 0.0)).len(), 1);
    assert!(!n.mempool.contains(&t1.id()));
}

#[test]
fn spent_inputs_are_skipped_when_choosing_a_payload() {
    let params = Params::with_defaults(sdag_core::Frac::ONE, sdag_core::Frac::new(1, 4), 1000.0).unwrap();
    let c = key("client");
    let alloc: Vec<TxOutput> = (0..2).map(|_| TxOutput { value: 100, address: c.address() }).collect();
    let cfg = LedgerConfig::new(params.clone()).with_allocation(alloc);
    let mut n = Node::new(SDag::new(params.clone()), key("z"), cfg, NodeConfig::default(), 6);
    let spend = |idx: u32, v: u64| {
        let mut t = Transaction::normal(
            vec![TxInput { prev: OutPoint { txid: g(), index: idx }, witness: vec![] }],
            vec![TxOutput { value: v, address: c.address() }],
        );
        t.inputs[0].witness = c.witness(&MockScheme, &t.sighash());
        t
    };
    let t0 = spend(0, 90);
    let other = key("other");
    let carrier = forge(Block::new(g(), g(), g(), other.peer_id(), t0.clone()), BlockClass::Regular);
    n.on_receive_block(Arc::new(carrier), 0.0);
    for i in 0..200 {
        n.create_block(i as f64);
        if n.ledger().has_tx(&t0.id()) && sdag_core::mempool::estimate_power(&n.sdag, &n.peer(), 20).q > 0.0 {
            break;
        }
    }
    assert!(n.ledger().has_tx(&t0.id()));
    let conflicting = spend(0, 50);
    let fine = spend(1, 80);
    n.on_event(InboundEvent::TxArrived { tx: conflicting, fee: 50 }, 0.0);
    n.on_event(InboundEvent::TxArrived { tx: fine.clone(), fee: 20 }, 0.0);
    let made = n.create_block(300.0);
    assert_eq!(made.block.mes, fine);
}

#[test]
fn catchup_threshold() {
    let n = node("x", easy_params(), 7);
    assert!(n.sync_catchup(0).is_empty());
    assert!(n.sync_catchup(5).is_empty());
    assert_eq!(n.sync_catchup(100), vec![OutboundAction::RequestLevelSets { from: 1, to: 100 }]);
}

#[test]
fn level_set_batches_reproduce_the_senders_main_chain() {
    let mut a = node("a", easy_params(), 8);
    for i in 0..60 {
        a.create_block(i as f64);
    }
    let mut b = node("b", easy_params(), 9);
    let actions = b.sync_catchup(a.sdag.height());
    let Some(OutboundAction::RequestLevelSets { from, to }) = actions.first().cloned() else { panic!("{actions:?}") };
    b.on_event(InboundEvent::LevelSetBatch(a.serve_level_sets(from, to)), 0.0);
    assert_eq!(b.sdag.main_chain(), a.sdag.main_chain());
    assert_eq!(b.stats.invalid, 0);
}

#[test]
fn honest_nodes_converge_after_full_delivery() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut nodes: Vec<Node> = (0..4).map(|i| node(&format!("n{i}"), easy_params(), 100 + i)).collect();
    let mut in_flight: Vec<Vec<Arc<Block>>> = vec![Vec::new(); nodes.len()];
    for step in 0..400 {
        let i = step % nodes.len();
        // deliver a random part of the backlog first
        let mut inbox = std::mem::take(&mut in_flight[i]);
        inbox.shuffle(&mut rng);
        let keep = inbox.split_off(inbox.len() / 2);
        in_flight[i] = keep;
        for b in inbox {
            nodes[i].on_receive_block(b, step as f64);
        }
        let made = nodes[i].create_block(step as f64);
        // every receiver re-checks it; see the invalid count below
        for (j, q) in in_flight.iter_mut().enumerate() {
            if j != i {
                q.push(made.block.clone());
            }
        }
    }
    for (i, q) in in_flight.iter_mut().enumerate() {
        q.shuffle(&mut rng);
        for b in q.drain(..) {
            nodes[i].on_receive_block(b, 1e9);
        }
    }
    let chain = nodes[0].sdag.main_chain();
    assert!(chain.len() > 20);
    for n in &mut nodes {
        assert_eq!(n.stats.invalid, 0);
        assert_eq!(n.orphan_count(), 0);
        assert_eq!(n.sdag.len(), 401);
        // FirstSeen may keep different equal-height tips; the common prefix
        // below the top agrees
        let c = n.sdag.main_chain();
        let k = c.len().min(chain.len()) - 1;
        assert_eq!(c[..k], chain[..k]);
    }
    let sets: Vec<Vec<Hash256>> = nodes
        .iter()
        .map(|n| {
            let mut v: Vec<Hash256> = n.sdag.blocks().map(|(id, _)| *id).collect();
            v.sort_unstable();
            v
        })
        .collect();
    assert!(sets.windows(2).all(|w| w[0] == w[1]));
    let top = nodes[0].sdag.height();
    let top_count = nodes[0].sdag.all_milestones().iter().filter(|m| nodes[0].sdag.ms_height(m) == Some(top)).count();
    if top_count == 1 {
        assert!(nodes.iter().all(|n| n.sdag.main_chain() == chain));
    }
}

#[test]
fn orphan_buffer_is_capped() {
    let cfg = NodeConfig { orphan_cap: 2, ..NodeConfig::default() };
    let mut n = Node::new(SDag::new(easy_params()), key("z"), LedgerConfig::new(easy_params()), cfg, 11);
    let y = key("y");
    for i in 0..3u8 {
        let missing = Hash256::digest(&[i]);
        let b = forge(Block::new(g(), g(), missing, y.peer_id(), Transaction::empty()), BlockClass::Regular);
        n.on_receive_block(Arc::new(b), 0.0);
    }
    assert_eq!(n.orphan_count(), 2);
    assert_eq!(n.stats.evicted, 1);
}
