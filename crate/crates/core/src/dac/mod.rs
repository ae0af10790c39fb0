// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Data-availability committee members and blob sampling.

mod sampling;

use std::collections::BTreeMap;
use std::sync::Arc;

use ed25519_dalek::{Signer, SigningKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{dac_sign_message, DacMemberInfo, MemberSignature, PartyId};
use crate::crypto::{hash_parts, Domain};
use crate::kzg::{
    commit, encode_blob, open_at, EncodingParams, FieldElement, KzgCommitment, KzgError, OpeningProof, Polynomial,
    TrustedSetup,
};

pub use sampling::{
    points_per_party, sample_and_reconstruct, SampleOutcome, SampleRequest, SampleResponse, SampleSource,
    SamplingConfig, SamplingError, SAMPLING_PARTIES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberPolicy {
    #[default]
    Honest,
    /// Verifies and signs but refuses every later request.
    Withhold,
    /// Verifies and signs but keeps a corrupted copy.
    CorruptBlob,
    /// Signs whatever it receives without checking.
    SignBlind,
    /// Verifies and signs, then loses the data.
    LoseData,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DacError {
    #[error("commitment does not match the blob")]
    CommitmentMismatch,
    #[error("blob not stored")]
    NotStored,
    #[error("member refused the request")]
    Refused,
    #[error(transparent)]
    Kzg(#[from] KzgError),
}

#[derive(Debug, Clone)]
struct Stored {
    blob: Vec<u8>,
    poly: Polynomial,
}

#[derive(Debug, Clone)]
pub struct DacMember {
    pub id: u32,
    pub party: PartyId,
    pub policy: MemberPolicy,
    key: SigningKey,
    setup: Arc<TrustedSetup>,
    params: EncodingParams,
    store: BTreeMap<[u8; 48], Stored>,
}

impl DacMember {
    /// Member `id` with a signing key derived from `(id, seed)`.
    pub fn new(id: u32, seed: u64, policy: MemberPolicy, setup: Arc<TrustedSetup>, params: EncodingParams) -> Self {
        let sk = hash_parts(Domain::Seed, &[b"dac-member", &id.to_be_bytes(), &seed.to_be_bytes()]);
        DacMember {
            id,
            party: PartyId::new(format!("dac-{id}")),
            policy,
            key: SigningKey::from_bytes(&sk.0),
            setup,
            params,
            store: BTreeMap::new(),
        }
    }

    pub fn info(&self) -> DacMemberInfo {
        DacMemberInfo { id: self.id, party: self.party.clone(), verifying_key: self.key.verifying_key().to_bytes() }
    }

    pub fn sign(&self, cm: &KzgCommitment) -> MemberSignature {
        MemberSignature { member: self.id, signature: self.key.sign(&dac_sign_message(cm)).to_bytes().to_vec() }
    }

    pub fn stores(&self, cm: &KzgCommitment) -> bool {
        self.store.contains_key(&cm.to_bytes())
    }

    /// Checks `blob` against `cm`, stores it and signs `cm`.
    pub fn dac_receive(&mut self, blob: &[u8], cm: &KzgCommitment) -> Result<MemberSignature, DacError> {
        let poly = encode_blob(blob, &self.params)?;
        if self.policy != MemberPolicy::SignBlind && commit(&self.setup, &poly)? != *cm {
            return Err(DacError::CommitmentMismatch);
        }
        match self.policy {
            MemberPolicy::LoseData => {}
            MemberPolicy::CorruptBlob => {
                let mut bad = blob.to_vec();
                match bad.first_mut() {
                    Some(b) => *b ^= 0xff,
                    None => bad.push(1),
                }
                let poly = encode_blob(&bad, &self.params)?;
                self.store.insert(cm.to_bytes(), Stored { blob: bad, poly });
            }
            _ => {
                self.store.insert(cm.to_bytes(), Stored { blob: blob.to_vec(), poly });
            }
        }
        Ok(self.sign(cm))
    }

    fn stored(&self, cm: &KzgCommitment) -> Result<&Stored, DacError> {
        if self.policy == MemberPolicy::Withhold {
            return Err(DacError::Refused);
        }
        self.store.get(&cm.to_bytes()).ok_or(DacError::NotStored)
    }

    /// Opens the stored polynomial for `cm` at every point.
    pub fn dac_open(&self, cm: &KzgCommitment, points: &[FieldElement]) -> Result<Vec<OpeningProof>, DacError> {
        let s = self.stored(cm)?;
        points.iter().map(|p| open_at(&self.setup, &s.poly, *p).map_err(DacError::from)).collect()
    }

    pub fn fetch_blob(&self, cm: &KzgCommitment) -> Result<Vec<u8>, DacError> {
        self.stored(cm).map(|s| s.blob.clone())
    }

    pub fn polynomial(&self, cm: &KzgCommitment) -> Result<&Polynomial, DacError> {
        self.stored(cm).map(|s| &s.poly)
    }
}
