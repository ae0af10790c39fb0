// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Simulated L1 arbiter contract.
//!
//! The contract is a single-writer state machine folded over a totally
//! ordered message log. It keeps the slot-commitment registry, runs the
//! bisection fraud-proof game and its replay arbitration, registers DA
//! commitments signed by the committee, runs the storage-audit game, and
//! keeps the stake ledger. A rejected call leaves the state untouched but
//! is still logged.

mod audit;
mod da;
mod fraud;
mod ledger;
pub mod message;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{hash, Digest, Domain, SparseMerkleTree};
use crate::kzg::{KzgCommitment, TrustedSetup};
use crate::rollup::{SlotCommitment, StepCommitment};

pub use audit::{AuditGame, AuditPhase, AuditVerdict, StepCheck};
pub use da::{commitment_key, commitment_leaf, dac_sign_message, enforce_size_limit, verify_membership, DaEntry};
pub use fraud::{judge_replay, FraudGame, FraudPhase, FraudVerdict, ReplayReport};
pub use ledger::{game_balances, party_balances, LedgerEvent, LedgerReason, ESCROW};
pub use message::{
    decode_log, encode_log, ContractMessage, GameId, GameRef, LoggedMessage, MemberSignature, PartyId,
    ReplaySubmission, Tick,
};

/// Solana's per-transaction size limit.
pub const MAX_TX_BYTES: usize = 1232;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolParams {
    pub challenge_stake: u64,
    pub executor_bond: u64,
    /// Ticks a party has to make its next move in a game.
    pub response_deadline: u64,
    /// Ticks after submission during which a slot may be challenged.
    pub challenge_window: u64,
    pub max_tx_bytes: usize,
    /// Required DAC signatures; 0 selects ⌈2n/3⌉ of the configured members.
    pub dac_threshold: usize,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            challenge_stake: 100,
            executor_bond: 1_000,
            response_deadline: 10,
            challenge_window: 100,
            max_tx_bytes: MAX_TX_BYTES,
            dac_threshold: 0,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.challenge_stake == 0
            || self.executor_bond == 0
            || self.response_deadline == 0
            || self.challenge_window == 0
        {
            return Err("protocol parameters must be positive".into());
        }
        if self.max_tx_bytes != MAX_TX_BYTES {
            return Err(format!("max_tx_bytes must be {MAX_TX_BYTES}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DacMemberInfo {
    pub id: u32,
    pub party: PartyId,
    pub verifying_key: [u8; 32],
}

#[derive(Debug, Clone)]
pub struct ContractConfig {
    pub params: ProtocolParams,
    pub dac_members: Vec<DacMemberInfo>,
    pub setup: Arc<TrustedSetup>,
    /// State root before slot 0.
    pub genesis_root: Digest,
    pub initial_balances: BTreeMap<PartyId, u64>,
}

impl ContractConfig {
    pub fn dac_threshold(&self) -> usize {
        if self.params.dac_threshold > 0 {
            self.params.dac_threshold
        } else {
            (2 * self.dac_members.len()).div_ceil(3)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub commitment: SlotCommitment,
    pub da_indices: Vec<u64>,
    pub submitter: PartyId,
    pub submitted_at: Tick,
}

/// Everything the contract stores. Serializes deterministically; its hash is
/// the state digest recorded in transcripts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractState {
    pub now: Tick,
    pub slot_commitments: BTreeMap<u64, SlotRecord>,
    /// Slots invalidated by a lost fraud game, and every later slot.
    pub voided_slots: Vec<SlotRecord>,
    pub da_registry: Vec<DaEntry>,
    pub commitment_root: Digest,
    pub fraud_games: BTreeMap<GameId, FraudGame>,
    pub audit_games: BTreeMap<GameId, AuditGame>,
    pub stakes: BTreeMap<PartyId, u64>,
    pub bonds: BTreeMap<PartyId, u64>,
    pub ledger: Vec<LedgerEvent>,
    pub next_game: GameId,
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContractError {
    #[error("sender has not posted an executor bond")]
    NotBonded,
    #[error("sender already holds a bond")]
    AlreadyBonded,
    #[error("bond is locked by an open window or game")]
    BondLocked,
    #[error("expected slot {expected}, got {got}")]
    SlotGap { expected: u64, got: u64 },
    #[error("slot {0} already committed")]
    DuplicateSlot(u64),
    #[error("referenced DA commitment is not registered")]
    UnknownDaCommitment,
    #[error("insufficient stake")]
    InsufficientStake,
    #[error("no such slot {0}")]
    NoSuchSlot(u64),
    #[error("challenge window for slot {0} is closed")]
    WindowClosed(u64),
    #[error("no such game")]
    NoSuchGame,
    #[error("call not allowed in the game's current phase")]
    WrongPhase,
    #[error("expected step {expected}, got {got}")]
    WrongStep { expected: u64, got: u64 },
    #[error("sender is not the party to move")]
    WrongCaller,
    #[error("move deadline has passed")]
    Timeout,
    #[error("deadline has not passed")]
    NotExpired,
    #[error("malformed submission: {0}")]
    MalformedSubmission(String),
    #[error("{got} valid signatures, threshold {threshold}")]
    InsufficientSignatures { got: usize, threshold: usize },
    #[error("signature from member {0} does not verify")]
    BadSignature(u32),
    #[error("member {0} signed more than once")]
    DuplicateMember(u32),
    #[error("member {0} is not in the committee")]
    UnknownMember(u32),
    #[error("audit range is empty or out of bounds")]
    RangeEmpty,
    #[error("{randoms} random scalars for {entries} entries")]
    LengthMismatch { randoms: usize, entries: usize },
    #[error("no registry entry {0}")]
    NoSuchIndex(u64),
    #[error("payload of {size} bytes exceeds {max}")]
    PayloadTooLarge { size: usize, max: usize },
    #[error("tick {got} precedes contract time {now}")]
    NonMonotonicTick { now: Tick, got: Tick },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ContractEvent {
    BondPosted {
        party: PartyId,
        amount: u64,
    },
    BondWithdrawn {
        party: PartyId,
        amount: u64,
    },
    SlotCommitted {
        record: SlotRecord,
        window_closes: Tick,
    },
    SlotsVoided {
        from_slot: u64,
        count: u64,
    },
    DataPosted {
        from: PartyId,
        bytes: u64,
    },
    DaRegistered {
        index: u64,
        cm: KzgCommitment,
        signers: Vec<u32>,
        commitment_root: Digest,
    },
    ChallengeOpened {
        game: GameId,
        slot: u64,
        challenger: PartyId,
        defender: PartyId,
        lo: u64,
        hi: u64,
        phase: FraudPhase,
        deadline: Tick,
    },
    MidpointSubmitted {
        game: GameId,
        mid: StepCommitment,
        deadline: Tick,
    },
    MidpointAnswered {
        game: GameId,
        agree: bool,
        lo: u64,
        hi: u64,
        phase: FraudPhase,
        deadline: Tick,
    },
    ReplayJudged {
        game: GameId,
        report: ReplayReport,
    },
    FraudResolved {
        game: GameId,
        slot: u64,
        verdict: FraudVerdict,
        by_timeout: bool,
    },
    AuditOpened {
        game: GameId,
        opener: PartyId,
        provider: PartyId,
        start: u64,
        end: u64,
        phase: AuditPhase,
        deadline: Tick,
    },
    AuditMidpoint {
        game: GameId,
        index: u64,
        sum: KzgCommitment,
        deadline: Tick,
    },
    AuditAnswered {
        game: GameId,
        agree: bool,
        lo: u64,
        hi: u64,
        phase: AuditPhase,
        deadline: Tick,
    },
    AuditStepChecked {
        game: GameId,
        index: u64,
        holds: bool,
    },
    AuditOpeningChecked {
        game: GameId,
        valid: bool,
    },
    AuditResolved {
        game: GameId,
        verdict: AuditVerdict,
        by_timeout: bool,
    },
    Ledger(LedgerEvent),
}

pub type Receipt = Result<Vec<ContractEvent>, ContractError>;

#[derive(Debug, Clone)]
pub struct Contract {
    config: ContractConfig,
    state: ContractState,
    commitment_tree: SparseMerkleTree,
    log: Vec<LoggedMessage>,
}

impl Contract {
    pub fn new(config: ContractConfig) -> Self {
        let mut stakes = config.initial_balances.clone();
        stakes.entry(PartyId::new(ESCROW)).or_insert(0);
        let commitment_tree = SparseMerkleTree::new();
        let state = ContractState {
            now: 0,
            slot_commitments: BTreeMap::new(),
            voided_slots: Vec::new(),
            da_registry: Vec::new(),
            commitment_root: commitment_tree.root(),
            fraud_games: BTreeMap::new(),
            audit_games: BTreeMap::new(),
            stakes,
            bonds: BTreeMap::new(),
            ledger: Vec::new(),
            next_game: 0,
        };
        Contract { config, state, commitment_tree, log: Vec::new() }
    }

    /// Rebuilds a contract by folding `log` over a fresh instance.
    pub fn replay(config: ContractConfig, log: &[LoggedMessage]) -> (Self, Vec<Receipt>) {
        let mut c = Contract::new(config);
        let receipts = log.iter().cloned().map(|m| c.apply(m)).collect();
        (c, receipts)
    }

    pub fn config(&self) -> &ContractConfig {
        &self.config
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.config.params
    }

    pub fn state(&self) -> &ContractState {
        &self.state
    }

    pub fn log(&self) -> &[LoggedMessage] {
        &self.log
    }

    pub fn now(&self) -> Tick {
        self.state.now
    }

    pub fn state_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.state).expect("contract state serializes")
    }

    pub fn state_digest(&self) -> Digest {
        hash(Domain::State, &self.state_bytes())
    }

    pub fn balance(&self, party: &PartyId) -> u64 {
        self.state.stakes.get(party).copied().unwrap_or(0)
    }

    pub fn fraud_game(&self, id: GameId) -> Option<&FraudGame> {
        self.state.fraud_games.get(&id)
    }

    pub fn audit_game(&self, id: GameId) -> Option<&AuditGame> {
        self.state.audit_games.get(&id)
    }

    pub fn slot(&self, slot: u64) -> Option<&SlotRecord> {
        self.state.slot_commitments.get(&slot)
    }

    pub fn next_slot(&self) -> u64 {
        self.state.slot_commitments.len() as u64
    }

    /// Root that slot `slot` starts from.
    pub fn pre_slot_root(&self, slot: u64) -> Option<Digest> {
        if slot == 0 {
            Some(self.config.genesis_root)
        } else {
            self.state.slot_commitments.get(&(slot - 1)).map(|r| r.commitment.root)
        }
    }

    /// Applies one logged call. The call is appended to the log whatever the
    /// outcome; on error the state is unchanged.
    pub fn apply(&mut self, entry: LoggedMessage) -> Receipt {
        self.log.push(entry.clone());
        if entry.tick < self.state.now {
            return Err(ContractError::NonMonotonicTick { now: self.state.now, got: entry.tick });
        }
        let before = self.state.clone();
        let tree_before = self.commitment_tree.clone();
        self.state.now = entry.tick;
        let mut events = Vec::new();
        let result = self.dispatch(&entry.sender, entry.msg, &mut events);
        match result {
            Ok(()) => Ok(events),
            Err(e) => {
                self.state = before;
                self.commitment_tree = tree_before;
                Err(e)
            }
        }
    }

    fn dispatch(
        &mut self,
        sender: &PartyId,
        msg: ContractMessage,
        ev: &mut Vec<ContractEvent>,
    ) -> Result<(), ContractError> {
        if let Some(size) = msg.direct_payload_size() {
            enforce_size_limit(size, self.config.params.max_tx_bytes)?;
        }
        match msg {
            ContractMessage::PostBond => self.post_bond(sender, ev),
            ContractMessage::WithdrawBond => self.withdraw_bond(sender, ev),
            ContractMessage::SubmitSlot { commitment, da_refs } => {
                self.submit_slot_commitment(sender, commitment, &da_refs, ev)
            }
            ContractMessage::OpenChallenge { slot } => self.open_challenge(sender, slot, ev).map(|_| ()),
            ContractMessage::BisectSubmit { game, mid } => self.bisect_submit(sender, game, mid, ev),
            ContractMessage::BisectRespond { game, agree } => self.bisect_respond(sender, game, agree, ev),
            ContractMessage::Replay { game, submission } => self.replay_and_judge(sender, game, &submission, ev),
            ContractMessage::RegisterDa { cm, signatures } => {
                self.register_da_commitment(cm, &signatures, ev).map(|_| ())
            }
            ContractMessage::PostData { payload } => {
                ev.push(ContractEvent::DataPosted { from: sender.clone(), bytes: payload.len() as u64 });
                Ok(())
            }
            ContractMessage::AuditOpen { provider, start, end, randoms, point, claimed_total } => {
                self.audit_open(sender, &provider, (start, end), randoms, point, claimed_total, ev).map(|_| ())
            }
            ContractMessage::AuditBisect { game, mid_sum } => self.audit_bisect(sender, game, mid_sum, ev),
            ContractMessage::AuditRespond { game, agree } => self.audit_respond(sender, game, agree, ev),
            ContractMessage::AuditFinalize { game, opening } => self.audit_finalize(sender, game, &opening, ev),
            ContractMessage::Timeout { game: GameRef::Fraud(id) } => self.fraud_timeout(id, ev),
            ContractMessage::Timeout { game: GameRef::Audit(id) } => self.audit_timeout(id, ev),
        }
    }

    fn post_bond(&mut self, sender: &PartyId, ev: &mut Vec<ContractEvent>) -> Result<(), ContractError> {
        if self.state.bonds.get(sender).is_some_and(|b| *b > 0) {
            return Err(ContractError::AlreadyBonded);
        }
        let amount = self.config.params.executor_bond;
        self.escrow_in(sender, amount, LedgerReason::Bond, None, ev)?;
        self.state.bonds.insert(sender.clone(), amount);
        ev.push(ContractEvent::BondPosted { party: sender.clone(), amount });
        Ok(())
    }

    fn withdraw_bond(&mut self, sender: &PartyId, ev: &mut Vec<ContractEvent>) -> Result<(), ContractError> {
        let amount = self.state.bonds.get(sender).copied().filter(|b| *b > 0).ok_or(ContractError::NotBonded)?;
        let window = self.config.params.challenge_window;
        let now = self.state.now;
        let window_open =
            self.state.slot_commitments.values().any(|r| r.submitter == *sender && now <= r.submitted_at + window);
        let in_game = self.state.fraud_games.values().any(|g| g.defender == *sender && g.phase != FraudPhase::Resolved);
        if window_open || in_game {
            return Err(ContractError::BondLocked);
        }
        self.state.bonds.remove(sender);
        self.escrow_out(sender, amount, LedgerReason::Refund, None, ev);
        ev.push(ContractEvent::BondWithdrawn { party: sender.clone(), amount });
        Ok(())
    }

    pub fn submit_slot_commitment(
        &mut self,
        sender: &PartyId,
        sc: SlotCommitment,
        da_refs: &[u64],
        ev: &mut Vec<ContractEvent>,
    ) -> Result<(), ContractError> {
        if !self.state.bonds.get(sender).is_some_and(|b| *b > 0) {
            return Err(ContractError::NotBonded);
        }
        let expected = self.next_slot();
        if sc.slot < expected {
            return Err(ContractError::DuplicateSlot(sc.slot));
        }
        if sc.slot > expected {
            return Err(ContractError::SlotGap { expected, got: sc.slot });
        }
        let registered = self.state.da_registry.len() as u64;
        if da_refs.iter().any(|i| *i >= registered) {
            return Err(ContractError::UnknownDaCommitment);
        }
        let da_indices = da_refs.to_vec();
        let record = SlotRecord { commitment: sc, da_indices, submitter: sender.clone(), submitted_at: self.state.now };
        self.state.slot_commitments.insert(sc.slot, record.clone());
        ev.push(ContractEvent::SlotCommitted {
            record,
            window_closes: self.state.now + self.config.params.challenge_window,
        });
        Ok(())
    }

    /// Removes slot `from` and every later slot; open games on them are
    /// voided and refunded.
    fn void_slots_from(&mut self, from: u64, ev: &mut Vec<ContractEvent>) {
        let voided: Vec<u64> = self.state.slot_commitments.range(from..).map(|(s, _)| *s).collect();
        for s in &voided {
            let rec = self.state.slot_commitments.remove(s).expect("present");
            self.state.voided_slots.push(rec);
        }
        ev.push(ContractEvent::SlotsVoided { from_slot: from, count: voided.len() as u64 });
        let open: Vec<GameId> = self
            .state
            .fraud_games
            .values()
            .filter(|g| g.slot >= from && g.phase != FraudPhase::Resolved)
            .map(|g| g.id)
            .collect();
        for id in open {
            self.settle_fraud(id, FraudVerdict::Voided, false, ev);
        }
    }

    /// Test hook: a step commitment the contract would accept as the
    /// lower bound of a fresh game on `slot`.
    pub fn initial_lo(&self, slot: u64) -> Option<StepCommitment> {
        self.pre_slot_root(slot).map(|root| StepCommitment { slot, step: 0, root, chain: crate::rollup::NULL_CHAIN })
    }
}
