//! Transactions and their canonical byte encoding.

use thiserror::Error;

use crate::hash::Hash256;

/// Destination of an output: the digest of a public key.
pub type Address = Hash256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TxKind {
    Empty = 0,
    Normal = 1,
    Registration = 2,
    Redemption = 3,
}

impl TxKind {
    fn from_byte(b: u8) -> Result<Self, CodecError> {
        Ok(match b {
            0 => TxKind::Empty,
            1 => TxKind::Normal,
            2 => TxKind::Registration,
            3 => TxKind::Redemption,
            other => return Err(CodecError::BadKind(other)),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutPoint {
    pub txid: Hash256,
    pub index: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TxInput {
    pub prev: OutPoint,
    pub witness: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TxOutput {
    pub value: u64,
    pub address: Address,
}

/// The single payload of a block.
///
/// Registration and Redemption carry exactly one input used only as a
/// signature slot: for a Registration its outpoint is null, for a Redemption
/// it names the previous registration or redemption transaction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transaction {
    pub kind: TxKind,
    pub inputs: Vec<TxInput>,
    pub outputs: Vec<TxOutput>,
    pub reward_claim: Option<u64>,
    pub next_address: Option<Address>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("input ended after {0} bytes")]
    Truncated(usize),
    #[error("{0} trailing bytes after the encoding")]
    Trailing(usize),
    #[error("unknown transaction kind {0}")]
    BadKind(u8),
    #[error("option flag must be 0 or 1, got {0}")]
    BadFlag(u8),
    #[error("declared payload length {declared} but transaction used {used} bytes")]
    LengthMismatch { declared: usize, used: usize },
    #[error("field of {0} bytes exceeds the 32-bit length prefix")]
    TooLarge(usize),
}

impl Default for Transaction {
    fn default() -> Self {
        Self::empty()
    }
}

impl Transaction {
    pub fn empty() -> Self {
        Transaction {
            kind: TxKind::Empty,
            inputs: Vec::new(),
            outputs: Vec::new(),
            reward_claim: None,
            next_address: None,
        }
    }

    pub fn normal(inputs: Vec<TxInput>, outputs: Vec<TxOutput>) -> Self {
        Transaction { kind: TxKind::Normal, inputs, outputs, reward_claim: None, next_address: None }
    }

    pub fn registration(next_address: Address) -> Self {
        Transaction {
            kind: TxKind::Registration,
            inputs: vec![TxInput { prev: OutPoint { txid: Hash256::ZERO, index: 0 }, witness: Vec::new() }],
            outputs: Vec::new(),
            reward_claim: None,
            next_address: Some(next_address),
        }
    }

    pub fn redemption(anchor_tx: Hash256, claim: u64, next_address: Address) -> Self {
        Transaction {
            kind: TxKind::Redemption,
            inputs: vec![TxInput { prev: OutPoint { txid: anchor_tx, index: 0 }, witness: Vec::new() }],
            outputs: Vec::new(),
            reward_claim: Some(claim),
            next_address: Some(next_address),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.kind == TxKind::Empty
    }

    /// Shape rules per kind; semantic checks belong to the ledger.
    pub fn well_formed(&self) -> bool {
        match self.kind {
            TxKind::Empty => {
                self.inputs.is_empty()
                    && self.outputs.is_empty()
                    && self.reward_claim.is_none()
                    && self.next_address.is_none()
            }
            TxKind::Normal => {
                !self.inputs.is_empty()
                    && !self.outputs.is_empty()
                    && self.reward_claim.is_none()
                    && self.next_address.is_none()
            }
            TxKind::Registration => {
                self.inputs.len() == 1
                    && self.inputs[0].prev.txid.is_zero()
                    && self.outputs.is_empty()
                    && self.reward_claim.is_none()
                    && self.next_address.is_some()
            }
            TxKind::Redemption => {
                self.inputs.len() == 1
                    && self.outputs.is_empty()
                    && self.reward_claim.is_some()
                    && self.next_address.is_some()
            }
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out, false);
        out
    }

    pub fn encoded_len(&self) -> usize {
        let ins: usize = self.inputs.iter().map(|i| 40 + i.witness.len()).sum();
        1 + 4 + ins + 4 + 40 * self.outputs.len()
            + 1
            + if self.reward_claim.is_some() { 8 } else { 0 }
            + 1
            + if self.next_address.is_some() { 32 } else { 0 }
    }

    fn encode_into(&self, out: &mut Vec<u8>, blank_witness: bool) {
        out.push(self.kind as u8);
        out.extend_from_slice(&(self.inputs.len() as u32).to_be_bytes());
        for i in &self.inputs {
            out.extend_from_slice(&i.prev.txid.0);
            out.extend_from_slice(&i.prev.index.to_be_bytes());
            if blank_witness {
                out.extend_from_slice(&0u32.to_be_bytes());
            } else {
                out.extend_from_slice(&(i.witness.len() as u32).to_be_bytes());
                out.extend_from_slice(&i.witness);
            }
        }
        out.extend_from_slice(&(self.outputs.len() as u32).to_be_bytes());
        for o in &self.outputs {
            out.extend_from_slice(&o.value.to_be_bytes());
            out.extend_from_slice(&o.address.0);
        }
        match self.reward_claim {
            Some(v) => {
                out.push(1);
                out.extend_from_slice(&v.to_be_bytes());
            }
            None => out.push(0),
        }
        match self.next_address {
            Some(a) => {
                out.push(1);
                out.extend_from_slice(&a.0);
            }
            None => out.push(0),
        }
    }

    pub fn id(&self) -> Hash256 {
        Hash256::digest(&self.encode())
    }

    /// Digest signed by witnesses: the encoding with every witness emptied.
    pub fn sighash(&self) -> Hash256 {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out, true);
        Hash256::digest(&out)
    }

    pub fn output_sum(&self) -> u128 {
        self.outputs.iter().map(|o| o.value as u128).sum()
    }

    /// Decode one transaction from the front of `buf`, returning it and the
    /// number of bytes used.
    pub fn decode_prefix(buf: &[u8]) -> Result<(Self, usize), CodecError> {
        let mut r = Reader { buf, pos: 0 };
        let kind = TxKind::from_byte(r.u8()?)?;
        let n_in = r.u32()? as usize;
        let mut inputs = Vec::with_capacity(n_in.min(1024));
        for _ in 0..n_in {
            let txid = r.hash()?;
            let index = r.u32()?;
            let wlen = r.u32()? as usize;
            let witness = r.take(wlen)?.to_vec();
            inputs.push(TxInput { prev: OutPoint { txid, index }, witness });
        }
        let n_out = r.u32()? as usize;
        let mut outputs = Vec::with_capacity(n_out.min(1024));
        for _ in 0..n_out {
            let value = r.u64()?;
            let address = r.hash()?;
            outputs.push(TxOutput { value, address });
        }
        let reward_claim = match r.u8()? {
            0 => None,
            1 => Some(r.u64()?),
            f => return Err(CodecError::BadFlag(f)),
        };
        let next_address = match r.u8()? {
            0 => None,
            1 => Some(r.hash()?),
            f => return Err(CodecError::BadFlag(f)),
        };
        Ok((Transaction { kind, inputs, outputs, reward_claim, next_address }, r.pos))
    }

    pub fn decode(buf: &[u8]) -> Result<Self, CodecError> {
        let (tx, used) = Self::decode_prefix(buf)?;
        if used != buf.len() {
            return Err(CodecError::Trailing(buf.len() - used));
        }
        Ok(tx)
    }
}

pub(crate) struct Reader<'a> {
    pub buf: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.buf.len() - self.pos < n {
            return Err(CodecError::Truncated(self.buf.len()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }
    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn hash(&mut self) -> Result<Hash256, CodecError> {
        Ok(Hash256(self.take(32)?.try_into().unwrap()))
    }
}
