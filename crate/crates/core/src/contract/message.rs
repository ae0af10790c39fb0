// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Contract calls and their canonical length-prefixed log records.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::{
    put_bool, put_bytes, put_seq, put_str, put_u32, put_u64, put_u8, Decode, DecodeError, Encode, Reader,
};
use crate::crypto::MerkleProof;
use crate::kzg::{FieldElement, KzgCommitment, OpeningProof};
use crate::rollup::{LedgerState, SlotCommitment, StepCommitment};
use crate::vm::{Account, Address, Transaction};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartyId(pub String);

impl PartyId {
    pub fn new(s: impl Into<String>) -> Self {
        PartyId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PartyId {
    fn from(s: &str) -> Self {
        PartyId(s.to_string())
    }
}

impl Encode for PartyId {
    fn encode(&self, out: &mut Vec<u8>) {
        put_str(out, &self.0);
    }
}

impl Decode for PartyId {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(PartyId(r.string()?))
    }
}

pub type GameId = u64;
pub type Tick = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "game", content = "id", rename_all = "snake_case")]
pub enum GameRef {
    Fraud(GameId),
    Audit(GameId),
}

impl Encode for GameRef {
    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            GameRef::Fraud(id) => {
                put_u8(out, 0);
                put_u64(out, *id);
            }
            GameRef::Audit(id) => {
                put_u8(out, 1);
                put_u64(out, *id);
            }
        }
    }
}

impl Decode for GameRef {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let at = r.offset();
        match r.u8()? {
            0 => Ok(GameRef::Fraud(r.u64()?)),
            1 => Ok(GameRef::Audit(r.u64()?)),
            tag => Err(DecodeError::InvalidTag { what: "game ref", tag, offset: at }),
        }
    }
}

/// A DAC member's signature over a commitment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberSignature {
    pub member: u32,
    #[serde(with = "crate::codec::hex_bytes")]
    pub signature: Vec<u8>,
}

impl Encode for MemberSignature {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u32(out, self.member);
        put_bytes(out, &self.signature);
    }
}

impl Decode for MemberSignature {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(MemberSignature { member: r.u32()?, signature: r.bytes()? })
    }
}

/// Evidence for replaying the disputed transaction on the contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplaySubmission {
    pub tx: Transaction,
    pub inputs: Vec<(Address, Option<Account>)>,
    pub input_proofs: Vec<MerkleProof>,
}

impl ReplaySubmission {
    /// Inputs and proofs for `tx` read from `state`.
    pub fn build(state: &LedgerState, tx: &Transaction) -> Self {
        let inputs: Vec<_> = state.snapshot(tx).into_iter().collect();
        let input_proofs = inputs.iter().map(|(a, _)| state.prove(a)).collect();
        ReplaySubmission { tx: tx.clone(), inputs, input_proofs }
    }
}

impl Encode for ReplaySubmission {
    fn encode(&self, out: &mut Vec<u8>) {
        put_bytes(out, &self.tx.to_bytes());
        put_seq(out, &self.inputs);
        put_seq(out, &self.input_proofs);
    }
}

impl Decode for ReplaySubmission {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let tx = Transaction::from_bytes(&r.bytes()?)?;
        Ok(ReplaySubmission { tx, inputs: r.seq()?, input_proofs: r.seq()? })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "call", rename_all = "snake_case")]
pub enum ContractMessage {
    PostBond,
    WithdrawBond,
    /// `da_refs` are registry indices of the slot's data pieces.
    SubmitSlot {
        commitment: SlotCommitment,
        da_refs: Vec<u64>,
    },
    OpenChallenge {
        slot: u64,
    },
    BisectSubmit {
        game: GameId,
        mid: StepCommitment,
    },
    BisectRespond {
        game: GameId,
        agree: bool,
    },
    Replay {
        game: GameId,
        submission: ReplaySubmission,
    },
    RegisterDa {
        cm: KzgCommitment,
        signatures: Vec<MemberSignature>,
    },
    PostData {
        #[serde(with = "crate::codec::hex_bytes")]
        payload: Vec<u8>,
    },
    AuditOpen {
        provider: PartyId,
        start: u64,
        end: u64,
        randoms: Vec<FieldElement>,
        point: FieldElement,
        claimed_total: KzgCommitment,
    },
    AuditBisect {
        game: GameId,
        mid_sum: KzgCommitment,
    },
    AuditRespond {
        game: GameId,
        agree: bool,
    },
    AuditFinalize {
        game: GameId,
        opening: OpeningProof,
    },
    Timeout {
        game: GameRef,
    },
}

impl ContractMessage {
    pub fn name(&self) -> &'static str {
        match self {
            ContractMessage::PostBond => "post_bond",
            ContractMessage::WithdrawBond => "withdraw_bond",
            ContractMessage::SubmitSlot { .. } => "submit_slot",
            ContractMessage::OpenChallenge { .. } => "open_challenge",
            ContractMessage::BisectSubmit { .. } => "bisect_submit",
            ContractMessage::BisectRespond { .. } => "bisect_respond",
            ContractMessage::Replay { .. } => "replay",
            ContractMessage::RegisterDa { .. } => "register_da",
            ContractMessage::PostData { .. } => "post_data",
            ContractMessage::AuditOpen { .. } => "audit_open",
            ContractMessage::AuditBisect { .. } => "audit_bisect",
            ContractMessage::AuditRespond { .. } => "audit_respond",
            ContractMessage::AuditFinalize { .. } => "audit_finalize",
            ContractMessage::Timeout { .. } => "timeout",
        }
    }

    /// Bytes counted against the per-transaction size limit, or `None` for
    /// calls that are split across several transactions (fraud-proof replay).
    pub fn direct_payload_size(&self) -> Option<usize> {
        match self {
            ContractMessage::Replay { .. } => None,
            ContractMessage::PostData { payload } => Some(payload.len()),
            other => Some(other.encoded_len() - 1),
        }
    }
}

impl Encode for ContractMessage {
    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            ContractMessage::PostBond => put_u8(out, 0),
            ContractMessage::WithdrawBond => put_u8(out, 1),
            ContractMessage::SubmitSlot { commitment, da_refs } => {
                put_u8(out, 2);
                commitment.encode(out);
                put_seq(out, da_refs);
            }
            ContractMessage::OpenChallenge { slot } => {
                put_u8(out, 3);
                put_u64(out, *slot);
            }
            ContractMessage::BisectSubmit { game, mid } => {
                put_u8(out, 4);
                put_u64(out, *game);
                mid.encode(out);
            }
            ContractMessage::BisectRespond { game, agree } => {
                put_u8(out, 5);
                put_u64(out, *game);
                put_bool(out, *agree);
            }
            ContractMessage::Replay { game, submission } => {
                put_u8(out, 6);
                put_u64(out, *game);
                submission.encode(out);
            }
            ContractMessage::RegisterDa { cm, signatures } => {
                put_u8(out, 7);
                cm.encode(out);
                put_seq(out, signatures);
            }
            ContractMessage::PostData { payload } => {
                put_u8(out, 8);
                put_bytes(out, payload);
            }
            ContractMessage::AuditOpen { provider, start, end, randoms, point, claimed_total } => {
                put_u8(out, 9);
                provider.encode(out);
                put_u64(out, *start);
                put_u64(out, *end);
                put_seq(out, randoms);
                point.encode(out);
                claimed_total.encode(out);
            }
            ContractMessage::AuditBisect { game, mid_sum } => {
                put_u8(out, 10);
                put_u64(out, *game);
                mid_sum.encode(out);
            }
            ContractMessage::AuditRespond { game, agree } => {
                put_u8(out, 11);
                put_u64(out, *game);
                put_bool(out, *agree);
            }
            ContractMessage::AuditFinalize { game, opening } => {
                put_u8(out, 12);
                put_u64(out, *game);
                opening.encode(out);
            }
            ContractMessage::Timeout { game } => {
                put_u8(out, 13);
                game.encode(out);
            }
        }
    }
}

impl Decode for ContractMessage {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let at = r.offset();
        Ok(match r.u8()? {
            0 => ContractMessage::PostBond,
            1 => ContractMessage::WithdrawBond,
            2 => ContractMessage::SubmitSlot { commitment: SlotCommitment::decode(r)?, da_refs: r.seq()? },
            3 => ContractMessage::OpenChallenge { slot: r.u64()? },
            4 => ContractMessage::BisectSubmit { game: r.u64()?, mid: StepCommitment::decode(r)? },
            5 => ContractMessage::BisectRespond { game: r.u64()?, agree: r.bool()? },
            6 => ContractMessage::Replay { game: r.u64()?, submission: ReplaySubmission::decode(r)? },
            7 => ContractMessage::RegisterDa { cm: KzgCommitment::decode(r)?, signatures: r.seq()? },
            8 => ContractMessage::PostData { payload: r.bytes()? },
            9 => ContractMessage::AuditOpen {
                provider: PartyId::decode(r)?,
                start: r.u64()?,
                end: r.u64()?,
                randoms: r.seq()?,
                point: FieldElement::decode(r)?,
                claimed_total: KzgCommitment::decode(r)?,
            },
            10 => ContractMessage::AuditBisect { game: r.u64()?, mid_sum: KzgCommitment::decode(r)? },
            11 => ContractMessage::AuditRespond { game: r.u64()?, agree: r.bool()? },
            12 => ContractMessage::AuditFinalize { game: r.u64()?, opening: OpeningProof::decode(r)? },
            13 => ContractMessage::Timeout { game: GameRef::decode(r)? },
            tag => return Err(DecodeError::InvalidTag { what: "contract message", tag, offset: at }),
        })
    }
}

/// One entry of the contract's totally ordered input log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedMessage {
    pub tick: Tick,
    pub sender: PartyId,
    pub msg: ContractMessage,
}

impl Encode for LoggedMessage {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, self.tick);
        self.sender.encode(out);
        self.msg.encode(out);
    }
}

impl Decode for LoggedMessage {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(LoggedMessage { tick: r.u64()?, sender: PartyId::decode(r)?, msg: ContractMessage::decode(r)? })
    }
}

/// Serializes a log as `u32 length ‖ record` entries.
pub fn encode_log(log: &[LoggedMessage]) -> Vec<u8> {
    let mut out = Vec::new();
    for m in log {
        put_bytes(&mut out, &m.to_bytes());
    }
    out
}

pub fn decode_log(bytes: &[u8]) -> Result<Vec<LoggedMessage>, DecodeError> {
    let mut r = Reader::new(bytes);
    let mut out = Vec::new();
    while r.remaining() > 0 {
        out.push(LoggedMessage::from_bytes(&r.bytes()?)?);
    }
    Ok(out)
}
