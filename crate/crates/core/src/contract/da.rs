// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! DA commitment registry and the direct-submission size rule.

use std::collections::BTreeSet;

use ed25519_dalek::{Signature, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};

use super::{Contract, ContractError, ContractEvent, MemberSignature, Tick};
use crate::crypto::{hash, Digest, Domain, MerkleProof, SmtKey};
use crate::kzg::KzgCommitment;

const SIGN_TAG: &[u8] = b"rollup-sim/dac-sign/v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaEntry {
    pub cm: KzgCommitment,
    pub signers: Vec<u32>,
    pub registered_at: Tick,
}

/// Bytes a DAC member signs for commitment `cm`.
pub fn dac_sign_message(cm: &KzgCommitment) -> Vec<u8> {
    let mut m = SIGN_TAG.to_vec();
    m.extend_from_slice(&cm.to_bytes());
    m
}

/// Key of registry entry `index` in the commitment tree.
pub fn commitment_key(index: u64) -> SmtKey {
    SmtKey(hash(Domain::Commitment, &index.to_be_bytes()))
}

/// Leaf value committing to `cm`.
pub fn commitment_leaf(cm: &KzgCommitment) -> Digest {
    hash(Domain::Commitment, &cm.to_bytes())
}

pub fn enforce_size_limit(size: usize, max: usize) -> Result<(), ContractError> {
    if size > max {
        Err(ContractError::PayloadTooLarge { size, max })
    } else {
        Ok(())
    }
}

impl Contract {
    pub fn register_da_commitment(
        &mut self,
        cm: KzgCommitment,
        signatures: &[MemberSignature],
        ev: &mut Vec<ContractEvent>,
    ) -> Result<u64, ContractError> {
        let msg = dac_sign_message(&cm);
        let mut seen = BTreeSet::new();
        for s in signatures {
            if !seen.insert(s.member) {
                return Err(ContractError::DuplicateMember(s.member));
            }
        }
        for s in signatures {
            let member = self
                .config
                .dac_members
                .iter()
                .find(|m| m.id == s.member)
                .ok_or(ContractError::UnknownMember(s.member))?;
            let ok = VerifyingKey::from_bytes(&member.verifying_key)
                .ok()
                .zip(Signature::from_slice(&s.signature).ok())
                .is_some_and(|(vk, sig)| vk.verify(&msg, &sig).is_ok());
            if !ok {
                return Err(ContractError::BadSignature(s.member));
            }
        }
        let threshold = self.config.dac_threshold();
        if signatures.len() < threshold {
            return Err(ContractError::InsufficientSignatures { got: signatures.len(), threshold });
        }
        let index = self.state.da_registry.len() as u64;
        self.commitment_tree.insert(commitment_key(index), Some(commitment_leaf(&cm)));
        self.state.commitment_root = self.commitment_tree.root();
        let signers: Vec<u32> = seen.into_iter().collect();
        self.state.da_registry.push(DaEntry { cm, signers: signers.clone(), registered_at: self.state.now });
        ev.push(ContractEvent::DaRegistered { index, cm, signers, commitment_root: self.state.commitment_root });
        Ok(index)
    }

    /// Proof that registry entry `index` is in the commitment tree.
    pub fn commitment_membership_proof(&self, index: u64) -> Result<MerkleProof, ContractError> {
        if index >= self.state.da_registry.len() as u64 {
            return Err(ContractError::NoSuchIndex(index));
        }
        Ok(self.commitment_tree.prove(&commitment_key(index)))
    }

    pub fn da_entry(&self, index: u64) -> Option<&DaEntry> {
        self.state.da_registry.get(index as usize)
    }

    pub fn commitment_root(&self) -> Digest {
        self.state.commitment_root
    }
}

/// Checks that `proof` shows `cm` registered at `index` under `root`.
pub fn verify_membership(root: &Digest, index: u64, cm: &KzgCommitment, proof: &MerkleProof) -> bool {
    proof.key == commitment_key(index)
        && proof.value == Some(commitment_leaf(cm))
        && crate::crypto::smt::verify(root, proof)
}
