// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Reference implementations used as test oracles. They share no code with
//! the library beyond its public data types.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use rollup_sim::codec::Decode;
use rollup_sim::contract::{Contract, LoggedMessage};
use rollup_sim::kzg::{FieldElement, KzgCommitment};
use rollup_sim::sim::{contract_config, Entry, Transcript};
use sha2::{Digest as _, Sha256};

const LEAF: u8 = 0x00;
const NODE: u8 = 0x01;

fn sha(tag: u8, parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update([tag]);
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

fn bit(key: &[u8; 32], i: usize) -> bool {
    key[i / 8] & (0x80 >> (i % 8)) != 0
}

fn empty_digests() -> Vec<[u8; 32]> {
    let mut empty = vec![[0u8; 32]];
    for h in 0..256 {
        let e = empty[h];
        empty.push(sha(NODE, &[&e, &e]));
    }
    empty
}

/// `H(2 ‖ len32(tx) ‖ tx ‖ len32(ma) ‖ ma ‖ prev)`.
pub fn chain_step(prev: &[u8; 32], tx: &[u8], ma: &[u8]) -> [u8; 32] {
    let tx_len = (tx.len() as u32).to_be_bytes();
    let ma_len = (ma.len() as u32).to_be_bytes();
    sha(0x02, &[&tx_len, tx, &ma_len, ma, prev])
}

/// Root of a depth-256 sparse Merkle tree rebuilt from scratch.
pub fn smt_root(leaves: &BTreeMap<[u8; 32], [u8; 32]>) -> [u8; 32] {
    SmtOracle::new().root(leaves)
}

/// Full-rebuild root computation that remembers, per `(key, value)`, the
/// digests of the subtrees holding only that leaf. Those depend on the leaf
/// alone, so the cache never changes an answer.
type Leaf = ([u8; 32], [u8; 32]);

pub struct SmtOracle {
    empty: Vec<[u8; 32]>,
    chains: HashMap<Leaf, Vec<[u8; 32]>>,
}

impl SmtOracle {
    pub fn new() -> Self {
        SmtOracle { empty: empty_digests(), chains: HashMap::new() }
    }

    pub fn root(&mut self, leaves: &BTreeMap<[u8; 32], [u8; 32]>) -> [u8; 32] {
        self.chains.retain(|(k, v), _| leaves.get(k) == Some(v));
        let items: Vec<([u8; 32], [u8; 32])> = leaves.iter().map(|(k, v)| (*k, *v)).collect();
        self.subtree(&items, 0)
    }

    /// `items` share their first `depth` key bits and are sorted by key.
    fn subtree(&mut self, items: &[([u8; 32], [u8; 32])], depth: usize) -> [u8; 32] {
        let height = 256 - depth;
        match items {
            [] => self.empty[height],
            [(k, v)] => self.chain(k, v)[height],
            _ => {
                let split = items.partition_point(|(k, _)| !bit(k, depth));
                let l = self.subtree(&items[..split], depth + 1);
                let r = self.subtree(&items[split..], depth + 1);
                sha(NODE, &[&l, &r])
            }
        }
    }

    fn chain(&mut self, key: &[u8; 32], value: &[u8; 32]) -> &[[u8; 32]] {
        let empty = &self.empty;
        self.chains.entry((*key, *value)).or_insert_with(|| {
            let mut out = vec![sha(LEAF, &[key, value])];
            for h in 0..256 {
                let cur = out[h];
                let next =
                    if bit(key, 255 - h) { sha(NODE, &[&empty[h], &cur]) } else { sha(NODE, &[&cur, &empty[h]]) };
                out.push(next);
            }
            out
        })
    }
}

/// `⌈log₂ t⌉` by counting halvings.
pub fn ceil_log2(t: u64) -> u32 {
    let mut rounds = 0;
    let mut span = 1u64;
    while span < t {
        span *= 2;
        rounds += 1;
    }
    rounds
}

/// `S_0 = 0`, `S_k = S_{k-1} + r_k·cm_k`.
pub fn prefix_sums(randoms: &[FieldElement], cms: &[KzgCommitment]) -> Vec<KzgCommitment> {
    let mut out = vec![KzgCommitment::identity()];
    for (r, cm) in randoms.iter().zip(cms) {
        let last = *out.last().expect("non-empty");
        out.push(last + *cm * *r);
    }
    out
}

/// Σ rᵢ·fᵢ computed coefficient by coefficient.
pub fn combine_coeffs(terms: &[(FieldElement, Vec<FieldElement>)]) -> Vec<FieldElement> {
    let len = terms.iter().map(|(_, f)| f.len()).max().unwrap_or(0);
    let mut out = vec![FieldElement::zero(); len];
    for (r, f) in terms {
        for (o, c) in out.iter_mut().zip(f) {
            *o += *r * *c;
        }
    }
    out
}

/// Message log recorded in a transcript.
pub fn transcript_log(t: &Transcript) -> Vec<LoggedMessage> {
    t.entries
        .iter()
        .filter_map(|e| match e {
            Entry::Message { bytes, .. } => Some(LoggedMessage::from_bytes(bytes).expect("decodes")),
            Entry::Note { .. } => None,
        })
        .collect()
}

/// Contract state rebuilt by replaying a transcript's log.
pub fn replay_contract(t: &Transcript) -> Contract {
    let config = contract_config(&t.scenario).expect("config");
    Contract::replay(config, &transcript_log(t)).0
}
