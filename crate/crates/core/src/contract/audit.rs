// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Storage audit: bisection over prefix sums `CM_{0,k} = Σ_{j≤k} r_j·cm_j`
//! followed by an opening of the agreed total at the random point `v`.
//!
//! Entries of the audited range are numbered `1..=t`; `CM_{0,0}` is the
//! identity. The opener claims the total and submits midpoints, the provider
//! answers.

use serde::{Deserialize, Serialize};

use super::{Contract, ContractError, ContractEvent, GameId, GameRef, LedgerReason, PartyId, Tick};
use crate::kzg::{verify_opening, FieldElement, KzgCommitment, OpeningProof};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditPhase {
    /// The provider has to accept or dispute the opener's total.
    AwaitingTotal,
    Bisecting,
    AwaitingOpening,
    Resolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditVerdict {
    OpenerLied,
    ProviderLied,
    StorageProven,
}

/// The adjacent-pair check the contract ran at the pinned index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCheck {
    pub index: u64,
    pub lo_sum: KzgCommitment,
    pub hi_sum: KzgCommitment,
    pub recomputed: KzgCommitment,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditGame {
    pub id: GameId,
    pub opener: PartyId,
    pub provider: PartyId,
    /// Registry positions `start..end`.
    pub start: u64,
    pub end: u64,
    pub randoms: Vec<FieldElement>,
    pub point: FieldElement,
    pub lo: u64,
    pub hi: u64,
    pub lo_sum: KzgCommitment,
    pub hi_sum: KzgCommitment,
    pub pending_mid: Option<KzgCommitment>,
    pub phase: AuditPhase,
    pub deadline: Tick,
    pub stake: u64,
    pub responses: u32,
    pub step_check: Option<StepCheck>,
    pub opening_valid: Option<bool>,
    pub verdict: Option<AuditVerdict>,
}

impl AuditGame {
    pub fn entries(&self) -> u64 {
        self.end - self.start
    }

    pub fn midpoint(&self) -> u64 {
        (self.lo + self.hi) / 2
    }

    pub fn to_move(&self) -> Option<&PartyId> {
        match self.phase {
            AuditPhase::Bisecting if self.pending_mid.is_none() => Some(&self.opener),
            AuditPhase::AwaitingTotal | AuditPhase::Bisecting | AuditPhase::AwaitingOpening => Some(&self.provider),
            AuditPhase::Resolved => None,
        }
    }
}

impl Contract {
    #[allow(clippy::too_many_arguments)]
    pub fn audit_open(
        &mut self,
        opener: &PartyId,
        provider: &PartyId,
        (start, end): (u64, u64),
        randoms: Vec<FieldElement>,
        point: FieldElement,
        claimed_total: KzgCommitment,
        ev: &mut Vec<ContractEvent>,
    ) -> Result<GameId, ContractError> {
        if start >= end || end > self.state.da_registry.len() as u64 {
            return Err(ContractError::RangeEmpty);
        }
        let t = end - start;
        if randoms.len() as u64 != t {
            return Err(ContractError::LengthMismatch { randoms: randoms.len(), entries: t as usize });
        }
        if opener == provider {
            return Err(ContractError::WrongCaller);
        }
        let stake = self.config.params.challenge_stake;
        let id = self.state.next_game;
        self.state.next_game += 1;
        let gref = Some(GameRef::Audit(id));
        self.escrow_in(opener, stake, LedgerReason::ChallengeStake, gref, ev)?;
        self.escrow_in(provider, stake, LedgerReason::ChallengeStake, gref, ev)?;

        let deadline = self.state.now + self.config.params.response_deadline;
        let phase = if t == 1 { AuditPhase::Bisecting } else { AuditPhase::AwaitingTotal };
        let game = AuditGame {
            id,
            opener: opener.clone(),
            provider: provider.clone(),
            start,
            end,
            randoms,
            point,
            lo: 0,
            hi: t,
            lo_sum: KzgCommitment::identity(),
            hi_sum: claimed_total,
            pending_mid: None,
            phase,
            deadline,
            stake,
            responses: 0,
            step_check: None,
            opening_valid: None,
            verdict: None,
        };
        self.state.audit_games.insert(id, game);
        ev.push(ContractEvent::AuditOpened {
            game: id,
            opener: opener.clone(),
            provider: provider.clone(),
            start,
            end,
            phase,
            deadline,
        });
        if t == 1 {
            self.audit_pinned(id, true, ev);
        }
        Ok(id)
    }

    fn live_audit(
        &self,
        id: GameId,
        caller: &PartyId,
        phase_ok: impl Fn(&AuditGame) -> bool,
    ) -> Result<AuditGame, ContractError> {
        let g = self.state.audit_games.get(&id).ok_or(ContractError::NoSuchGame)?;
        if !phase_ok(g) {
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

    pub fn audit_bisect(
        &mut self,
        caller: &PartyId,
        id: GameId,
        mid_sum: KzgCommitment,
        ev: &mut Vec<ContractEvent>,
    ) -> Result<(), ContractError> {
        let g = self.live_audit(id, caller, |g| g.phase == AuditPhase::Bisecting && g.pending_mid.is_none())?;
        let deadline = self.state.now + self.config.params.response_deadline;
        let g2 = self.state.audit_games.get_mut(&id).expect("present");
        g2.pending_mid = Some(mid_sum);
        g2.deadline = deadline;
        ev.push(ContractEvent::AuditMidpoint { game: id, index: g.midpoint(), sum: mid_sum, deadline });
        Ok(())
    }

    pub fn audit_respond(
        &mut self,
        caller: &PartyId,
        id: GameId,
        agree: bool,
        ev: &mut Vec<ContractEvent>,
    ) -> Result<(), ContractError> {
        self.live_audit(id, caller, |g| {
            g.phase == AuditPhase::AwaitingTotal || (g.phase == AuditPhase::Bisecting && g.pending_mid.is_some())
        })?;
        let deadline = self.state.now + self.config.params.response_deadline;
        let g = self.state.audit_games.get_mut(&id).expect("present");
        g.deadline = deadline;
        g.responses += 1;
        if g.phase == AuditPhase::AwaitingTotal {
            g.phase = if agree { AuditPhase::AwaitingOpening } else { AuditPhase::Bisecting };
        } else {
            let mid = g.pending_mid.take().expect("checked");
            let m = g.midpoint();
            if agree {
                g.lo = m;
                g.lo_sum = mid;
            } else {
                g.hi = m;
                g.hi_sum = mid;
            }
        }
        let (lo, hi, phase) = (g.lo, g.hi, g.phase);
        ev.push(ContractEvent::AuditAnswered { game: id, agree, lo, hi, phase, deadline });
        if phase == AuditPhase::Bisecting && hi == lo + 1 {
            self.audit_pinned(id, false, ev);
        }
        Ok(())
    }

    /// Adjacent pair reached: checks `CM_{0,hi} = CM_{0,lo} + r_hi·cm_hi`.
    /// For a single-entry range that holds, the opener's total becomes the
    /// agreed CM without a provider answer.
    fn audit_pinned(&mut self, id: GameId, single_entry: bool, ev: &mut Vec<ContractEvent>) {
        let g = self.state.audit_games.get(&id).expect("present");
        let entry = &self.state.da_registry[(g.start + g.hi - 1) as usize];
        let r = g.randoms[(g.hi - 1) as usize];
        let recomputed = g.lo_sum + entry.cm * r;
        let holds = recomputed == g.hi_sum;
        let check = StepCheck { index: g.hi, lo_sum: g.lo_sum, hi_sum: g.hi_sum, recomputed, holds };
        let g = self.state.audit_games.get_mut(&id).expect("present");
        g.step_check = Some(check);
        ev.push(ContractEvent::AuditStepChecked { game: id, index: g.hi, holds });
        match (holds, single_entry) {
            (false, _) => self.settle_audit(id, AuditVerdict::OpenerLied, false, ev),
            (true, true) => {
                g.phase = AuditPhase::AwaitingOpening;
            }
            (true, false) => self.settle_audit(id, AuditVerdict::ProviderLied, false, ev),
        }
    }

    pub fn audit_finalize(
        &mut self,
        caller: &PartyId,
        id: GameId,
        opening: &OpeningProof,
        ev: &mut Vec<ContractEvent>,
    ) -> Result<(), ContractError> {
        let g = self.live_audit(id, caller, |g| g.phase == AuditPhase::AwaitingOpening)?;
        let valid = opening.point == g.point && verify_opening(&self.config.setup, &g.hi_sum, opening);
        self.state.audit_games.get_mut(&id).expect("present").opening_valid = Some(valid);
        ev.push(ContractEvent::AuditOpeningChecked { game: id, valid });
        let verdict = if valid { AuditVerdict::StorageProven } else { AuditVerdict::ProviderLied };
        self.settle_audit(id, verdict, false, ev);
        Ok(())
    }

    pub fn audit_timeout(&mut self, id: GameId, ev: &mut Vec<ContractEvent>) -> Result<(), ContractError> {
        let g = self.state.audit_games.get(&id).ok_or(ContractError::NoSuchGame)?;
        if g.phase == AuditPhase::Resolved {
            return Err(ContractError::WrongPhase);
        }
        if self.state.now <= g.deadline {
            return Err(ContractError::NotExpired);
        }
        let verdict =
            if g.to_move() == Some(&g.opener) { AuditVerdict::OpenerLied } else { AuditVerdict::ProviderLied };
        self.settle_audit(id, verdict, true, ev);
        Ok(())
    }

    fn settle_audit(&mut self, id: GameId, verdict: AuditVerdict, by_timeout: bool, ev: &mut Vec<ContractEvent>) {
        let g = self.state.audit_games.get_mut(&id).expect("present");
        g.phase = AuditPhase::Resolved;
        g.verdict = Some(verdict);
        g.pending_mid = None;
        let (opener, provider, stake) = (g.opener.clone(), g.provider.clone(), g.stake);
        let gref = Some(GameRef::Audit(id));
        ev.push(ContractEvent::AuditResolved { game: id, verdict, by_timeout });
        match verdict {
            AuditVerdict::OpenerLied => {
                self.escrow_out(&provider, stake, LedgerReason::Refund, gref, ev);
                self.forfeit_to(&provider, stake, gref, ev);
            }
            AuditVerdict::ProviderLied => {
                self.escrow_out(&opener, stake, LedgerReason::Refund, gref, ev);
                self.forfeit_to(&opener, stake, gref, ev);
            }
            AuditVerdict::StorageProven => {
                self.escrow_out(&opener, stake, LedgerReason::Refund, gref, ev);
                self.escrow_out(&provider, stake, LedgerReason::Refund, gref, ev);
            }
        }
    }
}
