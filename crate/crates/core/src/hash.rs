//! 256-bit digests and the random-oracle helpers built on SHA-256.

use std::fmt;

use num_bigint::BigUint;
use sha2::{Digest, Sha256};

/// A 32-byte SHA-256 digest.
///
/// Ordering is lexicographic on the bytes, which coincides with numeric
/// ordering of the big-endian 256-bit integer.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Hash256(pub [u8; 32]);

impl Hash256 {
    pub const ZERO: Hash256 = Hash256([0u8; 32]);

    pub fn digest(data: &[u8]) -> Self {
        Hash256(Sha256::digest(data).into())
    }

    /// Digest of the concatenation of `parts`, without materialising it.
    pub fn digest_parts(parts: &[&[u8]]) -> Self {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        Hash256(h.finalize().into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0u8; 32]
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s.trim(), &mut out)?;
        Ok(Hash256(out))
    }

    /// The digest read as a big-endian integer.
    pub fn to_biguint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.0)
    }

    pub fn unit_fraction(&self) -> UnitFraction {
        UnitFraction(*self)
    }
}

impl fmt::Debug for Hash256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", &self.to_hex()[..12])
    }
}

impl fmt::Display for Hash256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// `N / 2^256` for the digest `N`, kept exact.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct UnitFraction(pub Hash256);

impl UnitFraction {
    pub fn numerator(&self) -> BigUint {
        self.0.to_biguint()
    }

    /// Nearest-ish `f64`; only the leading 64 bits contribute.
    pub fn to_f64(&self) -> f64 {
        let mut hi = [0u8; 8];
        hi.copy_from_slice(&self.0 .0[..8]);
        u64::from_be_bytes(hi) as f64 / 18_446_744_073_709_551_616.0
    }
}

/// Random-oracle value of a transaction relative to a chain head.
pub fn unit_fraction(h: &Hash256) -> UnitFraction {
    h.unit_fraction()
}
