// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Bisection fraud-proof game and single-step replay arbitration.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Contract, ContractError, ContractEvent, GameId, GameRef, LedgerReason, PartyId, ReplaySubmission, Tick};
use crate::crypto::smt::{transition, verify};
use crate::crypto::Digest;
use crate::rollup::{chain_step, ma_writes, StepCommitment};
use crate::vm::{account_digest, declared_accounts, execute};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FraudPhase {
    Bisecting,
    AwaitingReplay,
    Resolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FraudVerdict {
    DefenderLied,
    ChallengerLied,
    /// The slot was voided by another game before this one finished.
    Voided,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FraudGame {
    pub id: GameId,
    pub slot: u64,
    pub challenger: PartyId,
    pub defender: PartyId,
    /// Transactions in the challenged slot.
    pub tx_count: u64,
    pub lo: u64,
    pub hi: u64,
    pub lo_commit: StepCommitment,
    pub hi_commit: StepCommitment,
    /// Midpoint awaiting the challenger's answer.
    pub pending_mid: Option<StepCommitment>,
    pub phase: FraudPhase,
    pub deadline: Tick,
    pub stake: u64,
    pub responses: u32,
    pub verdict: Option<FraudVerdict>,
    pub report: Option<ReplayReport>,
}

impl FraudGame {
    /// The party whose move the game is waiting on.
    pub fn to_move(&self) -> Option<&PartyId> {
        match self.phase {
            FraudPhase::Bisecting if self.pending_mid.is_some() => Some(&self.challenger),
            FraudPhase::Bisecting | FraudPhase::AwaitingReplay => Some(&self.defender),
            FraudPhase::Resolved => None,
        }
    }

    pub fn midpoint(&self) -> u64 {
        (self.lo + self.hi) / 2
    }
}

/// Outcome of the five replay checks, in evaluation order. A later check is
/// only evaluated when every earlier one passed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub proofs_valid: bool,
    pub inputs_match_declared: bool,
    pub executed: bool,
    pub chain_matches: bool,
    pub root_matches: bool,
    pub computed_chain: Option<Digest>,
    pub computed_root: Option<Digest>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.proofs_valid && self.inputs_match_declared && self.executed && self.chain_matches && self.root_matches
    }

    pub fn first_failure(&self) -> Option<&'static str> {
        [
            (self.proofs_valid, "input proof"),
            (self.inputs_match_declared, "declared inputs"),
            (self.executed, "execution"),
            (self.chain_matches, "chain"),
            (self.root_matches, "root"),
        ]
        .into_iter()
        .find(|(ok, _)| !ok)
        .map(|(_, what)| what)
    }
}

/// Runs the replay checks for a single disputed step `lo → hi`.
pub fn judge_replay(lo: &StepCommitment, hi: &StepCommitment, sub: &ReplaySubmission) -> ReplayReport {
    let mut report = ReplayReport {
        proofs_valid: false,
        inputs_match_declared: false,
        executed: false,
        chain_matches: false,
        root_matches: false,
        computed_chain: None,
        computed_root: None,
    };

    report.proofs_valid = sub.inputs.iter().zip(&sub.input_proofs).all(|((addr, acct), proof)| {
        let claimed = acct.as_ref().map(|a| account_digest(Some(a)));
        proof.key == addr.smt_key() && proof.value == claimed && verify(&lo.root, proof)
    });
    if !report.proofs_valid {
        return report;
    }

    let declared: BTreeSet<_> = declared_accounts(&sub.tx).into_iter().collect();
    let inputs: BTreeMap<_, _> = sub.inputs.iter().cloned().collect();
    let input_keys: BTreeSet<_> = inputs.keys().copied().collect();
    report.inputs_match_declared = inputs.len() == sub.inputs.len() && input_keys == declared;
    if !report.inputs_match_declared {
        return report;
    }

    let ma = match execute(&sub.tx, &inputs) {
        Ok(ma) => ma,
        Err(_) => return report,
    };
    report.executed = true;

    let chain = chain_step(&lo.chain, &sub.tx, &ma);
    report.computed_chain = Some(chain);
    report.chain_matches = chain == hi.chain;
    if !report.chain_matches {
        return report;
    }

    let root = transition(&lo.root, &sub.input_proofs, &ma_writes(&ma)).ok();
    report.computed_root = root;
    report.root_matches = root == Some(hi.root);
    report
}

impl Contract {
    pub fn open_challenge(
        &mut self,
        challenger: &PartyId,
        slot: u64,
        ev: &mut Vec<ContractEvent>,
    ) -> Result<GameId, ContractError> {
        let record = self.state.slot_commitments.get(&slot).cloned().ok_or(ContractError::NoSuchSlot(slot))?;
        if self.state.now > record.submitted_at + self.config.params.challenge_window {
            return Err(ContractError::WindowClosed(slot));
        }
        if *challenger == record.submitter {
            return Err(ContractError::WrongCaller);
        }
        let stake = self.config.params.challenge_stake;
        if self.balance(challenger) < stake {
            return Err(ContractError::InsufficientStake);
        }
        let id = self.state.next_game;
        self.state.next_game += 1;
        self.escrow_in(challenger, stake, LedgerReason::ChallengeStake, Some(GameRef::Fraud(id)), ev)?;

        let lo_commit = self.initial_lo(slot).expect("previous slot is committed");
        let hi_commit = record.commitment.final_step();
        let t = record.commitment.tx_count;
        let phase = if t == 1 { FraudPhase::AwaitingReplay } else { FraudPhase::Bisecting };
        let deadline = self.state.now + self.config.params.response_deadline;
        let game = FraudGame {
            id,
            slot,
            challenger: challenger.clone(),
            defender: record.submitter.clone(),
            tx_count: t,
            lo: 0,
            hi: t,
            lo_commit,
            hi_commit,
            pending_mid: None,
            phase,
            deadline,
            stake,
            responses: 0,
            verdict: None,
            report: None,
        };
        self.state.fraud_games.insert(id, game);
        ev.push(ContractEvent::ChallengeOpened {
            game: id,
            slot,
            challenger: challenger.clone(),
            defender: record.submitter,
            lo: 0,
            hi: t,
            phase,
            deadline,
        });
        if t == 0 {
            // Nothing to bisect: the claim must equal the pre-slot state.
            let verdict = if lo_commit.same_claim(&hi_commit) {
                FraudVerdict::ChallengerLied
            } else {
                FraudVerdict::DefenderLied
            };
            self.settle_fraud(id, verdict, false, ev);
        }
        Ok(id)
    }

    fn live_game(&self, id: GameId, caller: &PartyId) -> Result<FraudGame, ContractError> {
        let g = self.state.fraud_games.get(&id).ok_or(ContractError::NoSuchGame)?;
        if g.phase == FraudPhase::Resolved {
            return Err(ContractError::WrongPhase);
        }
        if g.to_move() != Some(caller) {
            return Err(ContractError::WrongCaller);
        }
        if self.state.now > g.deadline {
            return Err(ContractError::Timeout);
        }
        Ok(g.clone())
    }

    pub fn bisect_submit(
        &mut self,
        caller: &PartyId,
        id: GameId,
        mid: StepCommitment,
        ev: &mut Vec<ContractEvent>,
    ) -> Result<(), ContractError> {
        let g = self.state.fraud_games.get(&id).ok_or(ContractError::NoSuchGame)?;
        if g.phase != FraudPhase::Bisecting || g.pending_mid.is_some() {
            return Err(ContractError::WrongPhase);
        }
        let g = self.live_game(id, caller)?;
        let expected = g.midpoint();
        if mid.step != expected || mid.slot != g.slot {
            return Err(ContractError::WrongStep { expected, got: mid.step });
        }
        let deadline = self.state.now + self.config.params.response_deadline;
        let g = self.state.fraud_games.get_mut(&id).expect("present");
        g.pending_mid = Some(mid);
        g.deadline = deadline;
        ev.push(ContractEvent::MidpointSubmitted { game: id, mid, deadline });
        Ok(())
    }

    pub fn bisect_respond(
        &mut self,
        caller: &PartyId,
        id: GameId,
        agree: bool,
        ev: &mut Vec<ContractEvent>,
    ) -> Result<(), ContractError> {
        let g = self.state.fraud_games.get(&id).ok_or(ContractError::NoSuchGame)?;
        if g.phase != FraudPhase::Bisecting || g.pending_mid.is_none() {
            return Err(ContractError::WrongPhase);
        }
        self.live_game(id, caller)?;
        let deadline = self.state.now + self.config.params.response_deadline;
        let g = self.state.fraud_games.get_mut(&id).expect("present");
        let mid = g.pending_mid.take().expect("checked");
        if agree {
            g.lo = mid.step;
            g.lo_commit = mid;
        } else {
            g.hi = mid.step;
            g.hi_commit = mid;
        }
        g.responses += 1;
        if g.hi == g.lo + 1 {
            g.phase = FraudPhase::AwaitingReplay;
        }
        g.deadline = deadline;
        ev.push(ContractEvent::MidpointAnswered { game: id, agree, lo: g.lo, hi: g.hi, phase: g.phase, deadline });
        Ok(())
    }

    pub fn replay_and_judge(
        &mut self,
        caller: &PartyId,
        id: GameId,
        sub: &ReplaySubmission,
        ev: &mut Vec<ContractEvent>,
    ) -> Result<(), ContractError> {
        let g = self.state.fraud_games.get(&id).ok_or(ContractError::NoSuchGame)?;
        if g.phase != FraudPhase::AwaitingReplay {
            return Err(ContractError::WrongPhase);
        }
        let g = self.live_game(id, caller)?;
        if sub.input_proofs.len() != sub.inputs.len() {
            return Err(ContractError::MalformedSubmission(format!(
                "{} proofs for {} inputs",
                sub.input_proofs.len(),
                sub.inputs.len()
            )));
        }
        let report = judge_replay(&g.lo_commit, &g.hi_commit, sub);
        let verdict = if report.passed() { FraudVerdict::ChallengerLied } else { FraudVerdict::DefenderLied };
        self.state.fraud_games.get_mut(&id).expect("present").report = Some(report.clone());
        ev.push(ContractEvent::ReplayJudged { game: id, report });
        self.settle_fraud(id, verdict, false, ev);
        Ok(())
    }

    pub fn fraud_timeout(&mut self, id: GameId, ev: &mut Vec<ContractEvent>) -> Result<(), ContractError> {
        let g = self.state.fraud_games.get(&id).ok_or(ContractError::NoSuchGame)?;
        if g.phase == FraudPhase::Resolved {
            return Err(ContractError::WrongPhase);
        }
        if self.state.now <= g.deadline {
            return Err(ContractError::NotExpired);
        }
        let verdict =
            if g.to_move() == Some(&g.defender) { FraudVerdict::DefenderLied } else { FraudVerdict::ChallengerLied };
        self.settle_fraud(id, verdict, true, ev);
        Ok(())
    }

    pub(super) fn settle_fraud(
        &mut self,
        id: GameId,
        verdict: FraudVerdict,
        by_timeout: bool,
        ev: &mut Vec<ContractEvent>,
    ) {
        let g = self.state.fraud_games.get_mut(&id).expect("present");
        g.phase = FraudPhase::Resolved;
        g.verdict = Some(verdict);
        g.pending_mid = None;
        let (slot, challenger, defender, stake) = (g.slot, g.challenger.clone(), g.defender.clone(), g.stake);
        let gref = Some(GameRef::Fraud(id));
        ev.push(ContractEvent::FraudResolved { game: id, slot, verdict, by_timeout });
        match verdict {
            FraudVerdict::DefenderLied => {
                let bond = self.state.bonds.remove(&defender).unwrap_or(0);
                self.forfeit_to(&challenger, bond, gref, ev);
                self.escrow_out(&challenger, stake, LedgerReason::Refund, gref, ev);
                self.void_slots_from(slot, ev);
            }
            FraudVerdict::ChallengerLied => self.forfeit_to(&defender, stake, gref, ev),
            FraudVerdict::Voided => self.escrow_out(&challenger, stake, LedgerReason::Refund, gref, ev),
        }
    }
}
