// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{Contract, ContractError, ContractEvent, GameRef, PartyId};

/// Pseudo-party holding escrowed stakes and bonds.
pub const ESCROW: &str = "@escrow";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerReason {
    ChallengeStake,
    Bond,
    Slash,
    Reward,
    Refund,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub party: PartyId,
    pub delta: i64,
    pub reason: LedgerReason,
    pub game: Option<GameRef>,
}

impl Contract {
    /// Moves `amount` between two balances and records both legs.
    fn transfer(
        &mut self,
        from: &PartyId,
        to: &PartyId,
        amount: u64,
        reasons: (LedgerReason, LedgerReason),
        game: Option<GameRef>,
        ev: &mut Vec<ContractEvent>,
    ) -> Result<(), ContractError> {
        let have = self.state.stakes.get(from).copied().unwrap_or(0);
        if have < amount {
            return Err(ContractError::InsufficientStake);
        }
        if amount == 0 {
            return Ok(());
        }
        self.state.stakes.insert(from.clone(), have - amount);
        *self.state.stakes.entry(to.clone()).or_insert(0) += amount;
        for (party, delta, reason) in [(from, -(amount as i64), reasons.0), (to, amount as i64, reasons.1)] {
            let e = LedgerEvent { party: party.clone(), delta, reason, game };
            self.state.ledger.push(e.clone());
            ev.push(ContractEvent::Ledger(e));
        }
        Ok(())
    }

    pub(super) fn escrow_in(
        &mut self,
        party: &PartyId,
        amount: u64,
        reason: LedgerReason,
        game: Option<GameRef>,
        ev: &mut Vec<ContractEvent>,
    ) -> Result<(), ContractError> {
        self.transfer(party, &PartyId::new(ESCROW), amount, (reason, reason), game, ev)
    }

    pub(super) fn escrow_out(
        &mut self,
        party: &PartyId,
        amount: u64,
        reason: LedgerReason,
        game: Option<GameRef>,
        ev: &mut Vec<ContractEvent>,
    ) {
        self.transfer(&PartyId::new(ESCROW), party, amount, (reason, reason), game, ev)
            .expect("escrow covers every escrowed amount");
    }

    /// Pays an escrowed amount forfeited by the loser to the winner.
    pub(super) fn forfeit_to(
        &mut self,
        winner: &PartyId,
        amount: u64,
        game: Option<GameRef>,
        ev: &mut Vec<ContractEvent>,
    ) {
        self.transfer(&PartyId::new(ESCROW), winner, amount, (LedgerReason::Slash, LedgerReason::Reward), game, ev)
            .expect("escrow covers every escrowed amount");
    }
}

/// Sum of ledger deltas per game; every entry should be zero.
pub fn game_balances(ledger: &[LedgerEvent]) -> std::collections::BTreeMap<GameRef, i64> {
    let mut out = std::collections::BTreeMap::new();
    for e in ledger {
        if let Some(g) = e.game {
            *out.entry(g).or_insert(0) += e.delta;
        }
    }
    out
}

/// Net ledger delta per party.
pub fn party_balances(ledger: &[LedgerEvent]) -> std::collections::BTreeMap<PartyId, i64> {
    let mut out = std::collections::BTreeMap::new();
    for e in ledger {
        *out.entry(e.party.clone()).or_insert(0) += e.delta;
    }
    out
}
