mod common;

use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdag_core::block::{classify_hash, HEADER_LEN, POW_OFFSET};
use sdag_core::params::Threshold;
use sdag_core::{
    classify, genesis, genesis_id, mine, tx_distance, Block, BlockClass, Frac, Hash256, OutPoint, Params, PeerId,
    Transaction, TxInput, TxKind, TxOutput,
};

fn arb_hash() -> impl Strategy<Value = Hash256> {
    any::<[u8; 32]>().prop_map(Hash256)
}

fn arb_tx() -> impl Strategy<Value = Transaction> {
    let input = (arb_hash(), any::<u32>(), prop::collection::vec(any::<u8>(), 0..40))
        .prop_map(|(txid, index, witness)| TxInput { prev: OutPoint { txid, index }, witness });
    let output = (any::<u64>(), arb_hash()).prop_map(|(value, address)| TxOutput { value, address });
    (
        prop_oneof![Just(TxKind::Empty), Just(TxKind::Normal), Just(TxKind::Registration), Just(TxKind::Redemption)],
        prop::collection::vec(input, 0..3),
        prop::collection::vec(output, 0..3),
        prop::option::of(any::<u64>()),
        prop::option::of(arb_hash()),
    )
        .prop_map(|(kind, inputs, outputs, reward_claim, next_address)| Transaction {
            kind,
            inputs,
            outputs,
            reward_claim,
            next_address,
        })
}

fn arb_block() -> impl Strategy<Value = Block> {
    (arb_hash(), arb_hash(), arb_hash(), arb_hash(), any::<u64>(), arb_tx()).prop_map(|(idp, idm, idt, peer, pow, mes)| Block {
        idp,
        idm,
        idt,
        peer: PeerId(peer),
        pow,
        mes,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn encoding_round_trips(b in arb_block()) {
        let e = b.encode().unwrap();
        prop_assert_eq!(Block::decode(&e).unwrap(), b);
    }

    #[test]
    fn distinct_blocks_encode_distinctly(a in arb_block(), b in arb_block()) {
        prop_assume!(a != b);
        prop_assert_ne!(a.encode().unwrap(), b.encode().unwrap());
        prop_assert_ne!(a.id(), b.id());
    }

    #[test]
    fn one_bit_flip_in_payload_changes_id(b in arb_block(), bit in 0usize..64) {
        let mut e = b.encode().unwrap();
        let off = HEADER_LEN + (bit / 8) % (e.len() - HEADER_LEN);
        e[off] ^= 1 << (bit % 8);
        prop_assert_ne!(Hash256::digest(&e), b.id());
    }

    #[test]
    fn truncated_encodings_are_rejected(b in arb_block(), cut in 1usize..20) {
        let e = b.encode().unwrap();
        let cut = cut.min(e.len());
        prop_assert!(Block::decode(&e[..e.len() - cut]).is_err());
    }
}

/// Random blocks drawn from a tiny alphabet collide often as values; the
/// encoding must only coincide when the blocks are equal.
#[test]
fn injectivity_on_many_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let small = |rng: &mut ChaCha8Rng| Hash256::digest(&[rng.random_range(0..3u8)]);
    let mut seen: std::collections::HashMap<Vec<u8>, Block> = std::collections::HashMap::new();
    for _ in 0..100_000 {
        let inputs = (0..rng.random_range(0..3))
            .map(|_| TxInput {
                prev: OutPoint { txid: small(&mut rng), index: rng.random_range(0..2) },
                witness: (0..rng.random_range(0..3)).map(|_| rng.random_range(0..2)).collect(),
            })
            .collect();
        let outputs = (0..rng.random_range(0..2))
            .map(|_| TxOutput { value: rng.random_range(0..2), address: small(&mut rng) })
            .collect();
        let mes = Transaction {
            kind: [TxKind::Empty, TxKind::Normal][rng.random_range(0..2)],
            inputs,
            outputs,
            reward_claim: if rng.random_bool(0.3) { Some(rng.random_range(0..2)) } else { None },
            next_address: if rng.random_bool(0.3) { Some(small(&mut rng)) } else { None },
        };
        let b = Block { idp: small(&mut rng), idm: small(&mut rng), idt: small(&mut rng), peer: PeerId(small(&mut rng)), pow: rng.random_range(0..2), mes };
        let e = b.encode().unwrap();
        if let Some(prev) = seen.get(&e) {
            assert_eq!(*prev, b);
        } else {
            seen.insert(e, b);
        }
    }
    assert!(seen.len() > 50_000);
}

#[test]
fn zero_block_is_zero_except_the_length_word() {
    let e = genesis().encode().unwrap();
    assert_eq!(e.len(), 151);
    assert!(e.iter().enumerate().all(|(i, &x)| if i == HEADER_LEN - 1 { x == 11 } else { x == 0 }));
}

#[test]
fn pow_occupies_its_own_eight_bytes() {
    let mut a = genesis().clone();
    a.pow = 0x0102030405060708;
    let e = a.encode().unwrap();
    assert_eq!(&e[POW_OFFSET..POW_OFFSET + 8], &[1, 2, 3, 4, 5, 6, 7, 8]);
}

/// Genesis id and ten block ids, frozen in `tests/data/vectors.txt`.
fn vector_blocks() -> Vec<Block> {
    (0..10u8)
        .map(|i| {
            let mut b = Block::new(
                Hash256::digest(&[b'p', i]),
                Hash256::digest(&[b'm', i]),
                Hash256::digest(&[b't', i]),
                PeerId(Hash256::digest(&[b'q', i])),
                if i % 3 == 0 {
                    Transaction::empty()
                } else {
                    Transaction::normal(
                        vec![TxInput { prev: OutPoint { txid: Hash256::digest(&[i]), index: i as u32 }, witness: vec![i; i as usize] }],
                        vec![TxOutput { value: 1000 * i as u64, address: Hash256::digest(&[b'a', i]) }],
                    )
                },
            );
            b.pow = i as u64 * 7919;
            b
        })
        .collect()
}

#[test]
fn golden_vectors() {
    let text = include_str!("data/vectors.txt");
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let g = lines.next().unwrap();
    assert_eq!(g, format!("genesis {}", genesis_id()));
    for (i, b) in vector_blocks().iter().enumerate() {
        assert_eq!(lines.next().unwrap(), format!("block{i} {}", b.id()), "vector {i}");
    }
}

#[test]
fn unit_fraction_mean_is_one_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let mut b = [0u8; 32];
        rng.fill_bytes(&mut b);
        sum += Hash256(b).unit_fraction().to_f64();
    }
    assert!((sum / n as f64 - 0.5).abs() < 0.01);
}

/// Integer threshold comparison against exact rational comparison
/// `N / 2^256 < num / den`, i.e. `N * den < num * 2^256`.
#[test]
fn threshold_compare_matches_rational_compare() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cases = [(1u128, 3u128), (1, 12000), (5, 7), (2, 3), (1, 2)];
    for &(num, den) in &cases {
        let t = Threshold::below(Frac::new(num, den));
        let lhs_scale = BigUint::from(den);
        let rhs = BigUint::from(num) << 256usize;
        for _ in 0..20_000 {
            let mut b = [0u8; 32];
            rng.fill_bytes(&mut b);
            // bias some samples right next to the threshold
            if rng.random_bool(0.05) {
                if let Threshold::Finite(h) = t {
                    b = h.0;
                    b[31] = b[31].wrapping_sub(rng.random_range(0..2));
                }
            }
            let h = Hash256(b);
            let exact = h.to_biguint() * &lhs_scale < rhs;
            assert_eq!(t.accepts(&h), exact);
        }
    }
}

#[test]
fn classify_band_examples() {
    let p = Params::with_defaults(Frac::new(1, 2), Frac::new(1, 2), 1.0).unwrap();
    let frac = |x: u64| {
        let mut b = [0u8; 32];
        b[..8].copy_from_slice(&x.to_be_bytes());
        Hash256(b)
    };
    let at = |f: f64| frac((f * 2f64.powi(64)) as u64);
    assert_eq!(classify_hash(&at(0.2), &p), BlockClass::Milestone);
    assert_eq!(classify_hash(&at(0.3), &p), BlockClass::Regular);
    assert_eq!(classify_hash(&at(0.25), &p), BlockClass::Regular);
    assert_eq!(classify_hash(&frac((1u64 << 62) - 1), &p), BlockClass::Milestone);
    assert_eq!(classify_hash(&at(0.5), &p), BlockClass::Invalid);
}

#[test]
fn milestone_share_among_mined_blocks_is_binomial() {
    let p = Params::with_defaults(Frac::new(1, 1 << 10), Frac::new(1, 4), 1.0).unwrap();
    let n = 1000;
    let mut ms = 0;
    let mut tmpl = genesis().clone();
    tmpl.peer = PeerId(Hash256::digest(b"miner"));
    for i in 0..n {
        tmpl.idp = Hash256::digest(&(i as u64).to_be_bytes());
        let m = mine(&tmpl, &p, u64::MAX).unwrap();
        assert_eq!(classify(&m.block, &p), m.class);
        if m.class == BlockClass::Milestone {
            ms += 1;
        }
    }
    let sigma = (n as f64 * 0.25 * 0.75).sqrt();
    assert!((ms as f64 - 250.0).abs() < 3.0 * sigma, "milestones {ms}");
}

#[test]
fn mining_attempts_are_geometric() {
    let p = Params::with_defaults(Frac::new(1, 256), Frac::new(1, 2), 1.0).unwrap();
    let runs = 1000;
    let mut total = 0u64;
    let mut tmpl = genesis().clone();
    for i in 0..runs {
        tmpl.idt = Hash256::digest(&(i as u64).to_be_bytes());
        let m = mine(&tmpl, &p, u64::MAX).unwrap();
        assert_eq!(m.block.idt, tmpl.idt);
        assert_eq!(m.block.mes, tmpl.mes);
        assert_ne!(classify(&m.block, &p), BlockClass::Invalid);
        total += m.attempts;
    }
    // geometric(1/256): mean 256, sd sqrt(255)*16 per draw
    let mean = total as f64 / runs as f64;
    let se = (255.0f64).sqrt() * 16.0 / (runs as f64).sqrt();
    assert!((mean - 256.0).abs() < 3.0 * se, "mean attempts {mean}");
}

#[test]
fn trivial_difficulty_succeeds_immediately() {
    let p = Params::with_defaults(Frac::ONE, Frac::new(1, 2), 1.0).unwrap();
    assert_eq!(mine(genesis(), &p, 1).unwrap().attempts, 1);
}

fn random_tx(rng: &mut ChaCha8Rng) -> Transaction {
    let mut txid = [0u8; 32];
    rng.fill_bytes(&mut txid);
    Transaction::normal(
        vec![TxInput { prev: OutPoint { txid: Hash256(txid), index: rng.random() }, witness: vec![] }],
        vec![TxOutput { value: rng.random(), address: Hash256::ZERO }],
    )
}

#[test]
fn distance_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tx = random_tx(&mut rng);
    let h = Hash256::digest(b"h");
    assert_eq!(tx_distance(&h, &tx), tx_distance(&h, &tx));
    assert_ne!(tx_distance(&h, &tx), tx_distance(&Hash256::digest(b"g"), &tx));
}

/// Kolmogorov-Smirnov against U(0,1); the 1% critical value is 1.628/sqrt(n).
#[test]
fn distances_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let mut xs: Vec<f64> = (0..n)
        .map(|_| {
            let mut h = [0u8; 32];
            rng.fill_bytes(&mut h);
            tx_distance(&Hash256(h), &random_tx(&mut rng)).unit_fraction().to_f64()
        })
        .collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n as f64 - x).max(x - i as f64 / n as f64))
        .fold(0.0, f64::max);
    assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
}

#[test]
fn workable_share_at_one_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let bound = Threshold::at_most(Frac::new(1, 100));
    let n = 100_000;
    let mut hits = 0;
    for _ in 0..n {
        let mut h = [0u8; 32];
        rng.fill_bytes(&mut h);
        if bound.accepts(&tx_distance(&Hash256(h), &random_tx(&mut rng))) {
            hits += 1;
        }
    }
    let sigma = (n as f64 * 0.01 * 0.99).sqrt();
    assert!((hits as f64 - 1000.0).abs() < 3.0 * sigma, "hits {hits}");
}
