// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Fixed-depth (256) sparse Merkle tree.
//!
//! Leaf level is height 0, the root is height 256. A key selects the left
//! child at height `h + 1` when bit `255 - h` (MSB-first) is zero. Empty
//! subtrees take the per-height default digests: height 0 is the all-zero
//! digest and `default[h + 1] = H(NODE, default[h] ‖ default[h])`. A present
//! leaf hashes to `H(LEAF, key ‖ value)`. Absence is the default leaf, so a
//! non-inclusion proof is an ordinary proof with no value.
//!
//! Only nodes whose digest differs from the default for their height are
//! stored.

use std::collections::{BTreeMap, HashMap};
use std::hash::{BuildHasherDefault, Hash, Hasher};
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::hash::{hash_node, hash_parts, Digest, Domain};
use crate::codec::{hex_bytes, put_u8, Decode, DecodeError, Encode, Reader};

pub const DEPTH: usize = 256;

/// Serialized size of a [`MerkleProof`]: key, presence flag, value, siblings.
pub const PROOF_BYTES: usize = 32 + 1 + 32 + 32 * DEPTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SmtKey(pub Digest);

impl SmtKey {
    pub fn bit(&self, i: usize) -> bool {
        self.0.bit(i)
    }
}

impl Encode for SmtKey {
    fn encode(&self, out: &mut Vec<u8>) {
        self.0.encode(out);
    }
}

impl Decode for SmtKey {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(SmtKey(Digest::decode(r)?))
    }
}

/// Default digest of an empty subtree of the given height.
pub fn default_digest(height: usize) -> Digest {
    defaults()[height]
}

fn defaults() -> &'static [Digest; DEPTH + 1] {
    static TABLE: OnceLock<[Digest; DEPTH + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [Digest::ZERO; DEPTH + 1];
        for h in 0..DEPTH {
            t[h + 1] = hash_node(&t[h], &t[h]);
        }
        t
    })
}

pub fn leaf_digest(key: &SmtKey, value: Option<&Digest>) -> Digest {
    match value {
        Some(v) => hash_parts(Domain::Leaf, &[&key.0 .0, &v.0]),
        None => Digest::ZERO,
    }
}

/// Position of a node: its height and the key bits above it.
#[derive(Clone, Copy, PartialEq, Eq)]
struct NodeId {
    height: u16,
    prefix: [u8; 32],
}

impl NodeId {
    fn of(key: &SmtKey, height: usize) -> Self {
        NodeId { height: height as u16, prefix: mask(&key.0 .0, height) }
    }

    /// The other child of this node's parent.
    fn sibling(key: &SmtKey, height: usize) -> Self {
        let mut prefix = mask(&key.0 .0, height);
        let bit = DEPTH - 1 - height;
        prefix[bit / 8] ^= 1 << (7 - (bit % 8));
        NodeId { height: height as u16, prefix }
    }
}

impl Hash for NodeId {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let mut w = [0u8; 8];
        w.copy_from_slice(&self.prefix[..8]);
        // Keys are hash outputs, so the leading bytes are already uniform for
        // deep nodes; shallow nodes are few.
        state.write_u64(u64::from_le_bytes(w) ^ (u64::from(self.height) << 48));
    }
}

#[derive(Default)]
struct PassThrough(u64);

impl Hasher for PassThrough {
    fn finish(&self) -> u64 {
        // splitmix64 finalizer
        let mut x = self.0;
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^ (x >> 31)
    }
    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 = self.0.rotate_left(8) ^ u64::from(*b);
        }
    }
    fn write_u64(&mut self, v: u64) {
        self.0 ^= v;
    }
}

type NodeMap = HashMap<NodeId, Digest, BuildHasherDefault<PassThrough>>;

/// Clears the lowest `height` bits of a key.
fn mask(key: &[u8; 32], height: usize) -> [u8; 32] {
    let mut out = *key;
    let keep = DEPTH - height;
    let full = keep / 8;
    let rem = keep % 8;
    if full < 32 {
        out[full] &= if rem == 0 { 0 } else { 0xFFu8 << (8 - rem) };
        for b in out.iter_mut().skip(full + 1) {
            *b = 0;
        }
    }
    out
}

/// Walks from a leaf to the root, storing each recomputed node. Sibling
/// digests are read from `nodes` and fall back to the defaults.
fn rehash_path(nodes: &mut NodeMap, key: &SmtKey, leaf: Digest) -> Digest {
    let defaults = defaults();
    let mut cur = leaf;
    store(nodes, NodeId::of(key, 0), cur, defaults[0]);
    for h in 0..DEPTH {
        let sib = nodes.get(&NodeId::sibling(key, h)).copied().unwrap_or(defaults[h]);
        cur = if cur == defaults[h] && sib == defaults[h] {
            defaults[h + 1]
        } else if key.bit(DEPTH - 1 - h) {
            hash_node(&sib, &cur)
        } else {
            hash_node(&cur, &sib)
        };
        store(nodes, NodeId::of(key, h + 1), cur, defaults[h + 1]);
    }
    cur
}

/// Root of the subtree of height `height` holding `items`, which share all
/// key bits above it and are sorted.
fn build(nodes: &mut NodeMap, items: &[(SmtKey, Digest)], height: usize) -> Digest {
    let defaults = defaults();
    let Some((first, _)) = items.first() else {
        return defaults[height];
    };
    let digest = if height == 0 {
        items[0].1
    } else {
        let split = items.partition_point(|(k, _)| !k.bit(DEPTH - height));
        let l = build(nodes, &items[..split], height - 1);
        let r = build(nodes, &items[split..], height - 1);
        hash_node(&l, &r)
    };
    store(nodes, NodeId::of(first, height), digest, defaults[height]);
    digest
}

fn store(nodes: &mut NodeMap, id: NodeId, digest: Digest, default: Digest) {
    if digest == default {
        nodes.remove(&id);
    } else {
        nodes.insert(id, digest);
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmtError {
    #[error("proof {index} does not verify against the source root")]
    InvalidProof { index: usize },
    #[error("no proof supplied for key {0}")]
    MissingProof(Digest),
    #[error("key {0} appears more than once in the write set")]
    DuplicateKey(Digest),
}

#[derive(Clone, Default)]
pub struct SparseMerkleTree {
    root: Option<Digest>,
    nodes: NodeMap,
    leaves: BTreeMap<SmtKey, Digest>,
}

impl std::fmt::Debug for SparseMerkleTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseMerkleTree")
            .field("root", &self.root())
            .field("leaves", &self.leaves.len())
            .field("stored_nodes", &self.nodes.len())
            .finish()
    }
}

impl SparseMerkleTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the tree bottom-up in one pass. Later duplicates win.
    pub fn from_leaves<I: IntoIterator<Item = (SmtKey, Digest)>>(leaves: I) -> Self {
        let leaves: BTreeMap<SmtKey, Digest> = leaves.into_iter().collect();
        let items: Vec<(SmtKey, Digest)> = leaves.iter().map(|(k, v)| (*k, leaf_digest(k, Some(v)))).collect();
        let mut nodes = NodeMap::with_capacity_and_hasher(items.len() * (DEPTH + 1), Default::default());
        let root = build(&mut nodes, &items, DEPTH);
        SparseMerkleTree { root: Some(root), nodes, leaves }
    }

    pub fn root(&self) -> Digest {
        self.root.unwrap_or_else(|| default_digest(DEPTH))
    }

    pub fn empty_root() -> Digest {
        default_digest(DEPTH)
    }

    pub fn get(&self, key: &SmtKey) -> Option<&Digest> {
        self.leaves.get(key)
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&SmtKey, &Digest)> {
        self.leaves.iter()
    }

    /// Number of stored (non-default) interior and leaf nodes.
    pub fn stored_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Sets or clears (`None`) the value at `key` in place.
    pub fn insert(&mut self, key: SmtKey, value: Option<Digest>) {
        match value {
            Some(v) => {
                self.leaves.insert(key, v);
            }
            None => {
                self.leaves.remove(&key);
            }
        }
        let leaf = leaf_digest(&key, value.as_ref());
        self.root = Some(rehash_path(&mut self.nodes, &key, leaf));
    }

    /// Persistent-style update returning a new tree.
    pub fn update(&self, key: SmtKey, value: Option<Digest>) -> Self {
        let mut t = self.clone();
        t.insert(key, value);
        t
    }

    pub fn prove(&self, key: &SmtKey) -> MerkleProof {
        let defaults = defaults();
        let siblings =
            (0..DEPTH).map(|h| self.nodes.get(&NodeId::sibling(key, h)).copied().unwrap_or(defaults[h])).collect();
        MerkleProof { key: *key, value: self.leaves.get(key).copied(), siblings }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MerkleProof {
    pub key: SmtKey,
    /// `None` proves non-inclusion.
    pub value: Option<Digest>,
    /// Sibling digests ordered from the leaf level up to just below the root.
    pub siblings: Vec<Digest>,
}

impl MerkleProof {
    /// Root implied by this proof's path with `value` placed at the leaf.
    pub fn root_with(&self, value: Option<&Digest>) -> Option<Digest> {
        if self.siblings.len() != DEPTH {
            return None;
        }
        let mut cur = leaf_digest(&self.key, value);
        for (h, sib) in self.siblings.iter().enumerate() {
            cur = if self.key.bit(DEPTH - 1 - h) { hash_node(sib, &cur) } else { hash_node(&cur, sib) };
        }
        Some(cur)
    }

    pub fn computed_root(&self) -> Option<Digest> {
        self.root_with(self.value.as_ref())
    }
}

/// True iff the proof's path recomputes to `root`.
pub fn verify(root: &Digest, proof: &MerkleProof) -> bool {
    proof.computed_root().as_ref() == Some(root)
}

/// Computes the root that results from writing `new_values` into the tree
/// with root `root`, using only the supplied proofs.
///
/// Every written key needs a proof. The new root is rebuilt over the union of
/// the written paths; untouched subtrees are taken from the proofs' siblings.
pub fn transition(
    root: &Digest,
    proofs: &[MerkleProof],
    new_values: &[(SmtKey, Option<Digest>)],
) -> Result<Digest, SmtError> {
    let mut by_key = BTreeMap::new();
    for (index, proof) in proofs.iter().enumerate() {
        if !verify(root, proof) {
            return Err(SmtError::InvalidProof { index });
        }
        by_key.entry(proof.key).or_insert(proof);
    }

    let mut writes = BTreeMap::new();
    for (key, value) in new_values {
        if writes.insert(*key, leaf_digest(key, value.as_ref())).is_some() {
            return Err(SmtError::DuplicateKey(key.0));
        }
        if !by_key.contains_key(key) {
            return Err(SmtError::MissingProof(key.0));
        }
    }
    if writes.is_empty() {
        return Ok(*root);
    }
    let items: Vec<(SmtKey, Digest)> = writes.into_iter().collect();
    Ok(rebuild(&items, &by_key, DEPTH))
}

/// Root of the subtree of height `height` after writing `items`, which are
/// sorted and share all key bits above it.
fn rebuild(items: &[(SmtKey, Digest)], proofs: &BTreeMap<SmtKey, &MerkleProof>, height: usize) -> Digest {
    if height == 0 {
        return items[0].1;
    }
    let split = items.partition_point(|(k, _)| !k.bit(DEPTH - height));
    let (l, r) = items.split_at(split);
    let sibling = |side: &[(SmtKey, Digest)]| proofs[&side[0].0].siblings[height - 1];
    match (l.is_empty(), r.is_empty()) {
        (false, false) => hash_node(&rebuild(l, proofs, height - 1), &rebuild(r, proofs, height - 1)),
        (false, true) => hash_node(&rebuild(l, proofs, height - 1), &sibling(l)),
        _ => hash_node(&sibling(r), &rebuild(r, proofs, height - 1)),
    }
}

impl Encode for MerkleProof {
    fn encode(&self, out: &mut Vec<u8>) {
        self.key.encode(out);
        put_u8(out, self.value.is_some() as u8);
        self.value.unwrap_or(Digest::ZERO).encode(out);
        debug_assert_eq!(self.siblings.len(), DEPTH);
        for s in &self.siblings {
            s.encode(out);
        }
    }
}

impl Decode for MerkleProof {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let key = SmtKey::decode(r)?;
        let flag_at = r.offset();
        let present = r.u8()?;
        let value = Digest::decode(r)?;
        let value = match present {
            1 => Some(value),
            0 if value.is_zero() => None,
            0 => return Err(DecodeError::InvalidValue { what: "absent proof value", offset: flag_at + 1 }),
            tag => return Err(DecodeError::InvalidTag { what: "proof presence flag", tag, offset: flag_at }),
        };
        let siblings = (0..DEPTH).map(|_| Digest::decode(r)).collect::<Result<_, _>>()?;
        Ok(MerkleProof { key, value, siblings })
    }
}

impl Serialize for MerkleProof {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        hex_bytes::serialize(&self.to_bytes(), s)
    }
}

impl<'de> Deserialize<'de> for MerkleProof {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let bytes = hex_bytes::deserialize(d)?;
        MerkleProof::from_bytes(&bytes).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::hash::hash;

    fn key(i: u64) -> SmtKey {
        SmtKey(hash(Domain::Address, &i.to_be_bytes()))
    }

    fn val(i: u64) -> Digest {
        hash(Domain::Account, &i.to_be_bytes())
    }

    #[test]
    fn mask_clears_low_bits() {
        let k = [0xFFu8; 32];
        assert_eq!(mask(&k, 0), k);
        assert_eq!(mask(&k, 256), [0u8; 32]);
        let m = mask(&k, 3);
        assert_eq!(m[31], 0xF8);
        assert_eq!(m[30], 0xFF);
        let m = mask(&k, 12);
        assert_eq!(m[31], 0);
        assert_eq!(m[30], 0xF0);
    }

    #[test]
    fn insert_then_delete_restores_empty_root() {
        let t = SparseMerkleTree::new().update(key(1), Some(val(1)));
        assert_ne!(t.root(), SparseMerkleTree::empty_root());
        let t = t.update(key(1), None);
        assert_eq!(t.root(), SparseMerkleTree::empty_root());
        assert_eq!(t.stored_nodes(), 0);
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let a = SparseMerkleTree::new().update(key(1), Some(val(1))).update(key(2), Some(val(2)));
        let b = SparseMerkleTree::new().update(key(2), Some(val(2))).update(key(1), Some(val(1)));
        assert_eq!(a.root(), b.root());
    }

    #[test]
    fn bulk_build_matches_incremental() {
        let mut t = SparseMerkleTree::new();
        for i in 0..64 {
            t.insert(key(i), Some(val(i)));
        }
        let bulk = SparseMerkleTree::from_leaves((0..64).map(|i| (key(i), val(i))));
        assert_eq!(bulk.root(), t.root());
        assert_eq!(bulk.stored_nodes(), t.stored_nodes());
        assert_eq!(bulk.prove(&key(5)), t.prove(&key(5)));
        assert_eq!(SparseMerkleTree::from_leaves([]).root(), SparseMerkleTree::empty_root());
    }

    #[test]
    fn empty_tree_non_inclusion() {
        let t = SparseMerkleTree::new();
        let p = t.prove(&key(9));
        assert_eq!(p.value, None);
        for (h, s) in p.siblings.iter().enumerate() {
            assert_eq!(*s, default_digest(h));
        }
        assert!(verify(&t.root(), &p));
    }

    #[test]
    fn every_sibling_position_is_bound() {
        let mut t = SparseMerkleTree::new();
        for i in 0..8 {
            t.insert(key(i), Some(val(i)));
        }
        let p = t.prove(&key(3));
        assert!(verify(&t.root(), &p));
        for pos in 0..DEPTH {
            let mut bad = p.clone();
            bad.siblings[pos].0[pos % 32] ^= 1;
            assert!(!verify(&t.root(), &bad), "tamper at {pos} accepted");
        }
    }

    #[test]
    fn flipped_value_rejected() {
        let t = SparseMerkleTree::new().update(key(1), Some(val(1)));
        let mut p = t.prove(&key(1));
        p.value = Some(val(2));
        assert!(!verify(&t.root(), &p));
        p.value = None;
        assert!(!verify(&t.root(), &p));
    }

    #[test]
    fn short_proof_rejected() {
        let t = SparseMerkleTree::new().update(key(1), Some(val(1)));
        let mut p = t.prove(&key(1));
        p.siblings.pop();
        assert!(!verify(&t.root(), &p));
    }

    #[test]
    fn transition_identity_on_empty_writes() {
        let t = SparseMerkleTree::new().update(key(1), Some(val(1)));
        let p = t.prove(&key(1));
        assert_eq!(transition(&t.root(), &[p], &[]).unwrap(), t.root());
        assert_eq!(transition(&t.root(), &[], &[]).unwrap(), t.root());
    }

    #[test]
    fn transition_errors() {
        let t = SparseMerkleTree::new().update(key(1), Some(val(1)));
        let p = t.prove(&key(1));
        assert_eq!(
            transition(&t.root(), std::slice::from_ref(&p), &[(key(2), None)]),
            Err(SmtError::MissingProof(key(2).0))
        );
        assert_eq!(
            transition(&Digest::ZERO, std::slice::from_ref(&p), &[(key(1), None)]),
            Err(SmtError::InvalidProof { index: 0 })
        );
        assert_eq!(
            transition(&t.root(), &[p], &[(key(1), None), (key(1), Some(val(3)))]),
            Err(SmtError::DuplicateKey(key(1).0))
        );
    }

    #[test]
    fn proof_encoding_is_fixed_width() {
        let t = SparseMerkleTree::new().update(key(1), Some(val(1)));
        let present = t.prove(&key(1)).to_bytes();
        let absent = t.prove(&key(2)).to_bytes();
        assert_eq!(present.len(), PROOF_BYTES);
        assert_eq!(absent.len(), PROOF_BYTES);
        assert_eq!(MerkleProof::from_bytes(&present).unwrap(), t.prove(&key(1)));
        let mut bad = absent.clone();
        bad[40] = 1; // value bytes must be zero when absent
        assert!(MerkleProof::from_bytes(&bad).is_err());
    }
}
