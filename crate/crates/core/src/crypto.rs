//! Pluggable signatures. The default scheme is a keyed-hash stand-in that is
//! deterministic and cheap; it is not secure against forgery.

use crate::block::PeerId;
use crate::hash::Hash256;
use crate::tx::Address;

pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct SecretKey(pub [u8; 32]);

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_LEN]);

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

pub trait SignatureScheme: Send + Sync {
    fn public_key(&self, sk: &SecretKey) -> PublicKey;
    fn sign(&self, sk: &SecretKey, msg: &Hash256) -> Signature;
    fn verify(&self, pk: &PublicKey, msg: &Hash256, sig: &Signature) -> bool;
}

/// `pk = H("sdag/pk" || sk)`, `sig = H(pk || msg) || H("sdag/sig" || pk || msg)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct MockScheme;

impl SignatureScheme for MockScheme {
    fn public_key(&self, sk: &SecretKey) -> PublicKey {
        PublicKey(Hash256::digest_parts(&[b"sdag/pk", &sk.0]).0)
    }

    fn sign(&self, sk: &SecretKey, msg: &Hash256) -> Signature {
        mock_sig(&self.public_key(sk), msg)
    }

    fn verify(&self, pk: &PublicKey, msg: &Hash256, sig: &Signature) -> bool {
        mock_sig(pk, msg) == *sig
    }
}

fn mock_sig(pk: &PublicKey, msg: &Hash256) -> Signature {
    let a = Hash256::digest_parts(&[&pk.0, &msg.0]);
    let b = Hash256::digest_parts(&[b"sdag/sig", &pk.0, &msg.0]);
    let mut out = [0u8; SIGNATURE_LEN];
    out[..32].copy_from_slice(&a.0);
    out[32..].copy_from_slice(&b.0);
    Signature(out)
}

pub fn address_of(pk: &PublicKey) -> Address {
    Hash256::digest(&pk.0)
}

pub fn peer_id_of(pk: &PublicKey) -> PeerId {
    PeerId(address_of(pk))
}

/// `pk || sig`, the witness layout used by every signed input.
pub fn encode_witness(pk: &PublicKey, sig: &Signature) -> Vec<u8> {
    let mut w = Vec::with_capacity(PUBLIC_KEY_LEN + SIGNATURE_LEN);
    w.extend_from_slice(&pk.0);
    w.extend_from_slice(&sig.0);
    w
}

pub fn decode_witness(w: &[u8]) -> Option<(PublicKey, Signature)> {
    if w.len() != PUBLIC_KEY_LEN + SIGNATURE_LEN {
        return None;
    }
    let pk = PublicKey(w[..PUBLIC_KEY_LEN].try_into().ok()?);
    let sig = Signature(w[PUBLIC_KEY_LEN..].try_into().ok()?);
    Some((pk, sig))
}

/// A secret key with its cached public key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Keypair {
    pub secret: SecretKey,
    pub public: PublicKey,
}

impl Keypair {
    pub fn new(scheme: &dyn SignatureScheme, secret: SecretKey) -> Self {
        Keypair { secret, public: scheme.public_key(&secret) }
    }

    /// Deterministic key derived from a label, for simulations and fixtures.
    pub fn from_seed(scheme: &dyn SignatureScheme, label: &[u8]) -> Self {
        Self::new(scheme, SecretKey(Hash256::digest_parts(&[b"sdag/sk", label]).0))
    }

    pub fn address(&self) -> Address {
        address_of(&self.public)
    }

    pub fn peer_id(&self) -> PeerId {
        peer_id_of(&self.public)
    }

    pub fn witness(&self, scheme: &dyn SignatureScheme, msg: &Hash256) -> Vec<u8> {
        encode_witness(&self.public, &scheme.sign(&self.secret, msg))
    }
}
