// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rollup_sim::codec::{Decode, Encode};
use rollup_sim::crypto::smt::{transition, verify, DEPTH, PROOF_BYTES};
use rollup_sim::crypto::{Digest, MerkleProof, SmtError, SmtKey, SparseMerkleTree};

fn leaves(max: usize) -> impl Strategy<Value = BTreeMap<[u8; 32], [u8; 32]>> {
    prop::collection::btree_map(any::<[u8; 32]>(), any::<[u8; 32]>(), 0..max)
}

fn tree_of(m: &BTreeMap<[u8; 32], [u8; 32]>) -> SparseMerkleTree {
    SparseMerkleTree::from_leaves(m.iter().map(|(k, v)| (SmtKey(Digest(*k)), Digest(*v))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn root_matches_oracle(m in leaves(24)) {
        prop_assert_eq!(tree_of(&m).root().0, common::smt_root(&m));
    }

    #[test]
    fn insertion_order_is_irrelevant(m in leaves(24), seed in any::<u64>()) {
        let mut entries: Vec<_> = m.iter().collect();
        let n = entries.len().max(1);
        entries.rotate_left(seed as usize % n);
        if seed & 1 == 1 {
            entries.reverse();
        }
        let mut t = SparseMerkleTree::new();
        for (k, v) in entries {
            t.insert(SmtKey(Digest(*k)), Some(Digest(*v)));
        }
        prop_assert_eq!(t.root(), tree_of(&m).root());
    }

    #[test]
    fn removing_everything_restores_the_empty_root(m in leaves(16)) {
        let mut t = tree_of(&m);
        for k in m.keys() {
            t.insert(SmtKey(Digest(*k)), None);
        }
        prop_assert_eq!(t.root(), SparseMerkleTree::empty_root());
        prop_assert_eq!(t.stored_nodes(), 0);
    }

    #[test]
    fn proofs_verify_for_present_and_absent_keys(m in leaves(16), probe in any::<[u8; 32]>()) {
        let t = tree_of(&m);
        let root = t.root();
        for k in m.keys().chain(std::iter::once(&probe)) {
            let p = t.prove(&SmtKey(Digest(*k)));
            prop_assert_eq!(p.siblings.len(), DEPTH);
            prop_assert_eq!(p.value.map(|d| d.0), m.get(k).copied());
            prop_assert!(verify(&root, &p));
            prop_assert_eq!(p.to_bytes().len(), PROOF_BYTES);
            prop_assert_eq!(MerkleProof::from_bytes(&p.to_bytes()).unwrap(), p);
        }
    }

    #[test]
    fn tampered_proofs_fail(m in leaves(12), which in any::<prop::sample::Index>(), level in 0..DEPTH, byte in 0usize..32) {
        prop_assume!(!m.is_empty());
        let t = tree_of(&m);
        let k = *which.get(&m.keys().collect::<Vec<_>>());
        let mut p = t.prove(&SmtKey(Digest(*k)));
        p.siblings[level].0[byte] ^= 1;
        prop_assert!(!verify(&t.root(), &p));

        let mut q = t.prove(&SmtKey(Digest(*k)));
        q.value = None;
        prop_assert!(!verify(&t.root(), &q));
    }

    #[test]
    fn transition_matches_oracle(
        m in leaves(32),
        fresh in prop::collection::btree_map(any::<[u8; 32]>(), prop::option::of(any::<[u8; 32]>()), 0..8),
        edits in prop::collection::vec((any::<prop::sample::Index>(), prop::option::of(any::<[u8; 32]>())), 0..8),
    ) {
        let t = tree_of(&m);
        let mut writes: BTreeMap<[u8; 32], Option<[u8; 32]>> = fresh;
        if !m.is_empty() {
            let keys: Vec<_> = m.keys().copied().collect();
            for (i, v) in edits {
                writes.insert(*i.get(&keys), v);
            }
        }
        let proofs: Vec<_> = writes.keys().map(|k| t.prove(&SmtKey(Digest(*k)))).collect();
        let new_values: Vec<_> = writes.iter().map(|(k, v)| (SmtKey(Digest(*k)), v.map(Digest))).collect();
        let got = transition(&t.root(), &proofs, &new_values).unwrap();

        let mut expect = m.clone();
        for (k, v) in &writes {
            match v {
                Some(v) => { expect.insert(*k, *v); }
                None => { expect.remove(k); }
            }
        }
        prop_assert_eq!(got.0, common::smt_root(&expect));
    }

    #[test]
    fn transition_requires_a_proof_per_write(m in leaves(8), k in any::<[u8; 32]>(), v in any::<[u8; 32]>()) {
        let t = tree_of(&m);
        let key = SmtKey(Digest(k));
        let err = transition(&t.root(), &[], &[(key, Some(Digest(v)))]).unwrap_err();
        prop_assert_eq!(err, SmtError::MissingProof(Digest(k)));
        let p = t.prove(&key);
        let err = transition(&t.root(), &[p], &[(key, Some(Digest(v))), (key, None)]).unwrap_err();
        prop_assert_eq!(err, SmtError::DuplicateKey(Digest(k)));
    }
}
