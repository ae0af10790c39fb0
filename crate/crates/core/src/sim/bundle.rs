// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Slot data as published to the DA committee: the slot trace plus its net
//! state diff, split into blob-sized pieces.

use crate::codec::{put_seq, put_u8, Decode, DecodeError, Encode, Reader};
use crate::contract::{DacMemberInfo, MemberSignature};
use crate::dac::{DacError, DacMember};
use crate::kzg::{commit, encode_blob, split_payload, EncodingParams, KzgCommitment, KzgError, TrustedSetup};
use crate::rollup::{state_diff, SlotTrace};
use crate::vm::{Account, Address};

const BUNDLE_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotBundle {
    pub trace: SlotTrace,
    pub diff: Vec<(Address, Option<Account>)>,
}

impl SlotBundle {
    pub fn from_trace(trace: SlotTrace) -> Self {
        let diff = state_diff(&trace);
        SlotBundle { trace, diff }
    }
}

impl Encode for SlotBundle {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u8(out, BUNDLE_VERSION);
        self.trace.encode(out);
        put_seq(out, &self.diff);
    }
}

impl Decode for SlotBundle {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let at = r.offset();
        let v = r.u8()?;
        if v != BUNDLE_VERSION {
            return Err(DecodeError::InvalidTag { what: "bundle version", tag: v, offset: at });
        }
        Ok(SlotBundle { trace: SlotTrace::decode(r)?, diff: r.seq()? })
    }
}

/// One blob-sized piece with its commitment and the signatures it collected.
#[derive(Debug, Clone)]
pub struct PublishedPiece {
    pub cm: KzgCommitment,
    pub signatures: Vec<MemberSignature>,
    /// Members that refused, with the reason.
    pub refusals: Vec<(u32, DacError)>,
}

pub fn commit_blob(setup: &TrustedSetup, params: &EncodingParams, blob: &[u8]) -> Result<KzgCommitment, KzgError> {
    commit(setup, &encode_blob(blob, params)?)
}

/// Splits `payload`, commits each piece and hands it to every member.
pub fn publish(
    payload: &[u8],
    setup: &TrustedSetup,
    params: &EncodingParams,
    members: &mut [DacMember],
) -> Result<Vec<PublishedPiece>, KzgError> {
    split_payload(payload, params)
        .into_iter()
        .map(|piece| {
            let cm = commit_blob(setup, params, piece)?;
            let mut signatures = Vec::new();
            let mut refusals = Vec::new();
            for m in members.iter_mut() {
                match m.dac_receive(piece, &cm) {
                    Ok(sig) => signatures.push(sig),
                    Err(e) => refusals.push((m.id, e)),
                }
            }
            Ok(PublishedPiece { cm, signatures, refusals })
        })
        .collect()
}

/// Fetches the blob behind `cm` from the first member whose copy recommits
/// to `cm`. Returns the blob and the ids of members that failed.
pub fn fetch_verified(
    cm: &KzgCommitment,
    setup: &TrustedSetup,
    params: &EncodingParams,
    members: &[DacMember],
) -> (Option<Vec<u8>>, Vec<u32>) {
    let mut failed = Vec::new();
    for m in members {
        match m.fetch_blob(cm) {
            Ok(blob) if commit_blob(setup, params, &blob).is_ok_and(|c| c == *cm) => return (Some(blob), failed),
            _ => failed.push(m.id),
        }
    }
    (None, failed)
}

/// Concatenates fetched pieces and decodes the bundle.
pub fn assemble(pieces: &[Vec<u8>]) -> Result<SlotBundle, DecodeError> {
    SlotBundle::from_bytes(&pieces.concat())
}

pub fn member_infos(members: &[DacMember]) -> Vec<DacMemberInfo> {
    members.iter().map(DacMember::info).collect()
}
