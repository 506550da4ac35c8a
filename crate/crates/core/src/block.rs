//! Blocks, proof-of-work classification and mining.

use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::hash::Hash256;
use crate::params::Params;
use crate::tx::{CodecError, Reader, Transaction};

/// Identity of a miner: the digest of its registration public key.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PeerId(pub Hash256);

impl PeerId {
    pub const ZERO: PeerId = PeerId(Hash256::ZERO);
}

impl fmt::Debug for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "peer:{:?}", self.0)
    }
}

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// `(idp, idm, idt, peer, pow, mes)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Block {
    /// Previous block of the same peer chain.
    pub idp: Hash256,
    /// Highest milestone known to the creator.
    pub idm: Hash256,
    /// A tip (unreferenced regular block) of another peer.
    pub idt: Hash256,
    pub peer: PeerId,
    pub pow: u64,
    pub mes: Transaction,
}

/// Offset of the nonce inside the canonical encoding.
pub const POW_OFFSET: usize = 128;
/// Length of the fixed-width prefix (four digests, nonce, payload length).
pub const HEADER_LEN: usize = 140;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockClass {
    Invalid,
    Regular,
    Milestone,
}

impl Block {
    pub fn new(idp: Hash256, idm: Hash256, idt: Hash256, peer: PeerId, mes: Transaction) -> Self {
        Block { idp, idm, idt, peer, pow: 0, mes }
    }

    pub fn refs(&self) -> [Hash256; 3] {
        [self.idp, self.idm, self.idt]
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let len = self.mes.encoded_len();
        if len > u32::MAX as usize {
            return Err(CodecError::TooLarge(len));
        }
        let mut out = Vec::with_capacity(HEADER_LEN + len);
        out.extend_from_slice(&self.idp.0);
        out.extend_from_slice(&self.idm.0);
        out.extend_from_slice(&self.idt.0);
        out.extend_from_slice(&self.peer.0 .0);
        out.extend_from_slice(&self.pow.to_be_bytes());
        out.extend_from_slice(&(len as u32).to_be_bytes());
        out.extend_from_slice(&self.mes.encode());
        Ok(out)
    }

    pub fn decode(buf: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader { buf, pos: 0 };
        let idp = r.hash()?;
        let idm = r.hash()?;
        let idt = r.hash()?;
        let peer = PeerId(r.hash()?);
        let pow = r.u64()?;
        let len = r.u32()? as usize;
        let body = r.take(len)?;
        let (mes, used) = Transaction::decode_prefix(body)?;
        if used != len {
            return Err(CodecError::LengthMismatch { declared: len, used });
        }
        if r.pos != buf.len() {
            return Err(CodecError::Trailing(buf.len() - r.pos));
        }
        Ok(Block { idp, idm, idt, peer, pow, mes })
    }

    /// `H(encode(self))`.
    ///
    /// # Panics
    /// If the payload does not fit the 32-bit length prefix.
    pub fn id(&self) -> Hash256 {
        Hash256::digest(&self.encode().expect("payload too large to encode"))
    }
}

pub fn block_id(block: &Block) -> Hash256 {
    block.id()
}

/// Band of a digest: milestone below `p*d`, regular below `d`.
pub fn classify_hash(h: &Hash256, params: &Params) -> BlockClass {
    if params.milestone_target().accepts(h) {
        BlockClass::Milestone
    } else if params.target().accepts(h) {
        BlockClass::Regular
    } else {
        BlockClass::Invalid
    }
}

pub fn classify(block: &Block, params: &Params) -> BlockClass {
    classify_hash(&block.id(), params)
}

/// The trusted first block. It has null references, the null peer, an empty
/// payload and is never subject to proof of work.
pub fn genesis() -> &'static Block {
    static G: OnceLock<Block> = OnceLock::new();
    G.get_or_init(|| Block::new(Hash256::ZERO, Hash256::ZERO, Hash256::ZERO, PeerId::ZERO, Transaction::empty()))
}

pub fn genesis_id() -> Hash256 {
    static ID: OnceLock<Hash256> = OnceLock::new();
    *ID.get_or_init(|| genesis().id())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MineError {
    #[error("no valid nonce within {attempts} attempts")]
    Exhausted { attempts: u64 },
}

/// Successful mining result.
#[derive(Clone, Debug)]
pub struct Mined {
    pub block: Block,
    pub id: Hash256,
    pub class: BlockClass,
    pub attempts: u64,
}

/// Search nonces upward from `template.pow` until the block hash falls below
/// the difficulty target.
pub fn mine(template: &Block, params: &Params, max_attempts: u64) -> Result<Mined, MineError> {
    let mut buf = template.encode().expect("payload too large to encode");
    let mut nonce = template.pow;
    for attempt in 1..=max_attempts {
        buf[POW_OFFSET..POW_OFFSET + 8].copy_from_slice(&nonce.to_be_bytes());
        let id = Hash256::digest(&buf);
        let class = classify_hash(&id, params);
        if class != BlockClass::Invalid {
            let mut block = template.clone();
            block.pow = nonce;
            return Ok(Mined { block, id, class, attempts: attempt });
        }
        nonce = nonce.wrapping_add(1);
    }
    Err(MineError::Exhausted { attempts: max_attempts })
}

/// Digest whose unit fraction is the distance of `tx` from `head_id`.
pub fn tx_distance(head_id: &Hash256, tx: &Transaction) -> Hash256 {
    Hash256::digest_parts(&[&head_id.0, &tx.encode()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Frac;

    #[test]
    fn zero_block_layout() {
        let b = genesis().encode().unwrap();
        assert_eq!(b.len(), HEADER_LEN + 11);
        let mut expect = vec![0u8; HEADER_LEN + 11];
        expect[HEADER_LEN - 1] = 11;
        assert_eq!(b, expect);
    }

    #[test]
    fn pow_offset() {
        let mut b = genesis().clone();
        let e0 = b.encode().unwrap();
        b.pow = u64::MAX;
        let e1 = b.encode().unwrap();
        let diff: Vec<usize> = (0..e0.len()).filter(|&i| e0[i] != e1[i]).collect();
        assert_eq!(diff, (POW_OFFSET..POW_OFFSET + 8).collect::<Vec<_>>());
    }

    #[test]
    fn classify_bands() {
        let params = Params::with_defaults(Frac::new(1, 2), Frac::new(1, 2), 1.0).unwrap();
        let at = |x: f64| {
            let mut b = [0u8; 32];
            b[..8].copy_from_slice(&((x * 18446744073709551616.0) as u64).to_be_bytes());
            Hash256(b)
        };
        assert_eq!(classify_hash(&at(0.2), &params), BlockClass::Milestone);
        assert_eq!(classify_hash(&at(0.3), &params), BlockClass::Regular);
        assert_eq!(classify_hash(&at(0.7), &params), BlockClass::Invalid);
    }

    #[test]
    fn trivial_difficulty_mines_first_try() {
        let params = Params::with_defaults(Frac::ONE, Frac::new(1, 4), 1.0).unwrap();
        let m = mine(genesis(), &params, 1).unwrap();
        assert_eq!(m.attempts, 1);
        assert_eq!(m.id, m.block.id());
    }

    #[test]
    fn exhaustion() {
        let params = Params::with_defaults(Frac::new(1, 1 << 100), Frac::ONE, 1.0).unwrap();
        assert_eq!(mine(genesis(), &params, 10).unwrap_err(), MineError::Exhausted { attempts: 10 });
    }
}
