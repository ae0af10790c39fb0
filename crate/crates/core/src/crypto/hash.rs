// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use crate::codec::{hex_bytes, Decode, DecodeError, Encode, Reader};

/// Domain-separation tags. The tag byte is prefixed to every hash input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Domain {
    Leaf = 0x00,
    Node = 0x01,
    TxChain = 0x02,
    Account = 0x03,
    Address = 0x04,
    /// Identifiers of transactions.
    Transaction = 0x05,
    /// Keys and leaves of the DA commitment accumulator.
    Commitment = 0x06,
    /// Contract state fingerprints.
    State = 0x07,
    /// Transcript integrity.
    Transcript = 0x08,
    /// Derivation of RNG substreams and test-mode secrets.
    Seed = 0x09,
}

impl TryFrom<u8> for Domain {
    type Error = u8;

    fn try_from(tag: u8) -> Result<Self, u8> {
        use Domain::*;
        [Leaf, Node, TxChain, Account, Address, Transaction, Commitment, State, Transcript, Seed]
            .into_iter()
            .find(|d| *d as u8 == tag)
            .ok_or(tag)
    }
}

/// A 32-byte SHA-256 output. Ordered bytewise.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub const fn new(bytes: [u8; 32]) -> Self {
        Digest(bytes)
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

    pub fn from_hex(s: &str) -> Result<Self, String> {
        let bytes = hex_bytes::decode_lower(s)?;
        let arr: [u8; 32] = bytes.try_into().map_err(|v: Vec<u8>| format!("expected 32 bytes, got {}", v.len()))?;
        Ok(Digest(arr))
    }

    /// Bit `i` counted from the most significant bit of byte 0.
    pub fn bit(&self, i: usize) -> bool {
        (self.0[i / 8] >> (7 - (i % 8))) & 1 == 1
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}..)", &self.to_hex()[..12])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

impl Encode for Digest {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
}

impl Decode for Digest {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Digest(r.array()?))
    }
}

/// `SHA-256(tag ‖ payload)`.
pub fn hash(domain: Domain, payload: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update([domain as u8]);
    h.update(payload);
    Digest(h.finalize().into())
}

/// Hash of several parts without an intermediate allocation. The parts are
/// concatenated as-is; callers supply their own framing.
pub fn hash_parts(domain: Domain, parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    h.update([domain as u8]);
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// Interior node of a Merkle tree.
#[inline]
pub fn hash_node(left: &Digest, right: &Digest) -> Digest {
    let mut h = Sha256::new();
    h.update([Domain::Node as u8]);
    h.update(left.0);
    h.update(right.0);
    Digest(h.finalize().into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic() {
        assert_eq!(hash(Domain::Leaf, b"x"), hash(Domain::Leaf, b"x"));
    }

    #[test]
    fn empty_chain_hash_is_stable() {
        // SHA-256 of the single byte 0x02.
        assert_eq!(
            hash(Domain::TxChain, &[]).to_hex(),
            "dbc1b4c900ffe48d575b5da5c638040125f65db0fe3e24494b76ea986457d986"
        );
    }

    #[test]
    fn domains_separate_identical_payloads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let len = rng.gen_range(0..128);
            let b: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            assert_ne!(hash(Domain::Leaf, &b), hash(Domain::Node, &b));
        }
    }

    #[test]
    fn node_hash_matches_tagged_concatenation() {
        let a = hash(Domain::Leaf, b"a");
        let b = hash(Domain::Leaf, b"b");
        let mut cat = a.0.to_vec();
        cat.extend_from_slice(&b.0);
        assert_eq!(hash_node(&a, &b), hash(Domain::Node, &cat));
        assert_eq!(hash_parts(Domain::Node, &[&a.0, &b.0]), hash_node(&a, &b));
    }

    #[test]
    fn bits_are_msb_first() {
        let mut d = Digest::ZERO;
        d.0[0] = 0b1000_0001;
        assert!(d.bit(0));
        assert!(!d.bit(1));
        assert!(d.bit(7));
        assert!(!d.bit(8));
    }

    #[test]
    fn hex_round_trip() {
        let d = hash(Domain::Seed, b"s");
        assert_eq!(Digest::from_hex(&d.to_hex()).unwrap(), d);
        assert!(Digest::from_hex("00").is_err());
    }
}
