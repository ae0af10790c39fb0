// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Versioned run transcripts.
//!
//! A transcript is pretty-printed JSON with a trailing newline. Byte strings
//! are lowercase hex. The `integrity` field is the domain-separated hash of
//! the compact JSON of every other field. `check_transcript` accepts a file
//! only if it is in exactly this canonical form, the hash matches, folding
//! the recorded messages over a fresh contract reproduces every receipt and
//! state digest, and re-running the echoed scenario yields the same file.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scenario::Scenario;
use super::{contract_config, run_scenario, SimError};
use crate::codec::{hex_bytes, Decode};
use crate::contract::{
    party_balances, AuditVerdict, Contract, ContractError, ContractEvent, FraudVerdict, GameId, LoggedMessage, PartyId,
    Tick,
};
use crate::crypto::{hash, Digest, Domain};

pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Entry {
    /// A call delivered to the contract and its receipt.
    Message {
        index: u64,
        tick: Tick,
        sender: PartyId,
        call: String,
        /// Canonical encoding of the logged message.
        #[serde(with = "hex_bytes")]
        bytes: Vec<u8>,
        /// Bytes counted against the direct-submission limit.
        direct_bytes: Option<u64>,
        accepted: bool,
        error: Option<ContractError>,
        events: Vec<ContractEvent>,
        state_digest: Digest,
    },
    /// Off-chain activity worth recording.
    Note { tick: Tick, actor: String, text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FraudSummary {
    pub game: GameId,
    pub slot: u64,
    pub challenger: PartyId,
    pub defender: PartyId,
    pub tx_count: u64,
    pub verdict: Option<FraudVerdict>,
    pub by_timeout: bool,
    pub challenger_responses: u32,
    /// First failed replay check, if the game reached replay.
    pub failed_check: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSummary {
    pub game: GameId,
    pub opener: PartyId,
    pub provider: PartyId,
    pub entries: u64,
    pub verdict: Option<AuditVerdict>,
    pub by_timeout: bool,
    pub provider_responses: u32,
    pub pinned_index: Option<u64>,
    pub opening_valid: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSummary {
    pub tick: Tick,
    pub index: u64,
    pub reconstructed: bool,
    pub blob_digest: Option<Digest>,
    pub verified: u64,
    pub rejected: u64,
    pub refused: u64,
    pub rounds: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub final_tick: Tick,
    pub messages: u64,
    pub rejected: u64,
    pub message_bytes: u64,
    pub max_direct_bytes: u64,
    pub committed_slots: u64,
    pub voided_slots: u64,
    pub da_entries: u64,
    pub fraud_games: Vec<FraudSummary>,
    pub audits: Vec<AuditSummary>,
    pub sampling: Vec<SamplingSummary>,
    /// Net ledger delta per party.
    pub balances: BTreeMap<PartyId, i64>,
}

impl Summary {
    pub fn fraud_verdicts(&self) -> Vec<Option<FraudVerdict>> {
        self.fraud_games.iter().map(|g| g.verdict).collect()
    }

    pub fn audit_verdicts(&self) -> Vec<Option<AuditVerdict>> {
        self.audits.iter().map(|a| a.verdict).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transcript {
    pub version: u32,
    pub scenario: Scenario,
    pub entries: Vec<Entry>,
    pub final_state_digest: Digest,
    pub summary: Summary,
    pub integrity: Digest,
}

#[derive(Serialize)]
struct Hashed<'a> {
    version: u32,
    scenario: &'a Scenario,
    entries: &'a [Entry],
    final_state_digest: &'a Digest,
    summary: &'a Summary,
}

impl Transcript {
    pub fn seal(
        version: u32,
        scenario: Scenario,
        entries: Vec<Entry>,
        final_state_digest: Digest,
        summary: Summary,
    ) -> Self {
        let mut t = Transcript { version, scenario, entries, final_state_digest, summary, integrity: Digest::ZERO };
        t.integrity = t.compute_integrity();
        t
    }

    pub fn compute_integrity(&self) -> Digest {
        let h = Hashed {
            version: self.version,
            scenario: &self.scenario,
            entries: &self.entries,
            final_state_digest: &self.final_state_digest,
            summary: &self.summary,
        };
        hash(Domain::Transcript, &serde_json::to_vec(&h).expect("transcript serializes"))
    }

    /// Canonical file contents.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("transcript serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckError> {
        serde_json::from_slice(bytes).map_err(|e| CheckError::Parse(e.to_string()))
    }

    pub fn messages(&self) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(|e| matches!(e, Entry::Message { .. }))
    }

    /// Human-readable digest of the run.
    pub fn report(&self) -> String {
        let s = &self.summary;
        let mut out = String::new();
        let _ = writeln!(out, "scenario {} (seed {})", self.scenario.name, self.scenario.seed);
        let _ = writeln!(out, "final tick {}, final state {}", s.final_tick, self.final_state_digest);
        let _ = writeln!(
            out,
            "messages {} ({} rejected), {} bytes logged, largest direct payload {} bytes",
            s.messages, s.rejected, s.message_bytes, s.max_direct_bytes
        );
        let _ = writeln!(
            out,
            "slots committed {}, voided {}, DA entries {}",
            s.committed_slots, s.voided_slots, s.da_entries
        );
        for g in &s.fraud_games {
            let _ = writeln!(
                out,
                "fraud game {} on slot {} (t={}): {} vs {}, {} challenger rounds, verdict {}{}{}",
                g.game,
                g.slot,
                g.tx_count,
                g.challenger,
                g.defender,
                g.challenger_responses,
                verdict_str(&g.verdict),
                if g.by_timeout { " by timeout" } else { "" },
                g.failed_check.as_deref().map(|c| format!(", failed check: {c}")).unwrap_or_default(),
            );
        }
        for a in &s.audits {
            let _ = writeln!(
                out,
                "audit {} over {} entries: {} vs {}, {} provider rounds, verdict {}{}",
                a.game,
                a.entries,
                a.opener,
                a.provider,
                a.provider_responses,
                verdict_str(&a.verdict),
                if a.by_timeout { " by timeout" } else { "" },
            );
        }
        for x in &s.sampling {
            match &x.error {
                None => {
                    let _ = writeln!(
                        out,
                        "sampling piece {}: reconstructed, {} verified, {} rejected, {} refused, {} rounds",
                        x.index, x.verified, x.rejected, x.refused, x.rounds
                    );
                }
                Some(e) => {
                    let _ = writeln!(out, "sampling piece {}: failed, {e}", x.index);
                }
            }
        }
        let _ = writeln!(out, "ledger deltas:");
        for (p, d) in &s.balances {
            let _ = writeln!(out, "  {p:<16} {d:+}");
        }
        out
    }
}

fn verdict_str<T: Serialize>(v: &Option<T>) -> String {
    match v {
        Some(v) => serde_json::to_value(v).ok().and_then(|j| j.as_str().map(str::to_string)).unwrap_or_default(),
        None => "unresolved".into(),
    }
}

pub(crate) fn build_summary(contract: &Contract, entries: &[Entry], sampling: &[SamplingSummary]) -> Summary {
    let st = contract.state();
    let mut messages = 0;
    let mut rejected = 0;
    let mut message_bytes = 0;
    let mut max_direct_bytes = 0;
    let mut final_tick = 0;
    let mut timeouts: BTreeMap<(bool, GameId), bool> = BTreeMap::new();
    for e in entries {
        match e {
            Entry::Message { tick, bytes, direct_bytes, accepted, events, .. } => {
                messages += 1;
                message_bytes += bytes.len() as u64;
                final_tick = final_tick.max(*tick);
                if !accepted {
                    rejected += 1;
                } else if let Some(d) = direct_bytes {
                    max_direct_bytes = max_direct_bytes.max(*d);
                }
                for ev in events {
                    match ev {
                        ContractEvent::FraudResolved { game, by_timeout, .. } => {
                            timeouts.insert((true, *game), *by_timeout);
                        }
                        ContractEvent::AuditResolved { game, by_timeout, .. } => {
                            timeouts.insert((false, *game), *by_timeout);
                        }
                        _ => {}
                    }
                }
            }
            Entry::Note { tick, .. } => final_tick = final_tick.max(*tick),
        }
    }
    let fraud_games = st
        .fraud_games
        .values()
        .map(|g| FraudSummary {
            game: g.id,
            slot: g.slot,
            challenger: g.challenger.clone(),
            defender: g.defender.clone(),
            tx_count: g.tx_count,
            verdict: g.verdict,
            by_timeout: timeouts.get(&(true, g.id)).copied().unwrap_or(false),
            challenger_responses: g.responses,
            failed_check: g.report.as_ref().and_then(|r| r.first_failure()).map(str::to_string),
        })
        .collect::<Vec<_>>();
    let audits = st
        .audit_games
        .values()
        .map(|g| AuditSummary {
            game: g.id,
            opener: g.opener.clone(),
            provider: g.provider.clone(),
            entries: g.entries(),
            verdict: g.verdict,
            by_timeout: timeouts.get(&(false, g.id)).copied().unwrap_or(false),
            provider_responses: g.responses,
            pinned_index: g.step_check.as_ref().map(|c| c.index),
            opening_valid: g.opening_valid,
        })
        .collect();
    Summary {
        final_tick,
        messages,
        rejected,
        message_bytes,
        max_direct_bytes,
        committed_slots: st.slot_commitments.len() as u64,
        voided_slots: st.voided_slots.len() as u64,
        da_entries: st.da_registry.len() as u64,
        fraud_games,
        audits,
        sampling: sampling.to_vec(),
        balances: party_balances(&st.ledger),
    }
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("transcript does not parse: {0}")]
    Parse(String),
    #[error("unsupported transcript version {0}")]
    Version(u32),
    #[error("transcript is not in canonical form")]
    NotCanonical,
    #[error("integrity hash mismatch: recorded {recorded}, computed {computed}")]
    Integrity { recorded: Digest, computed: Digest },
    #[error("entry {index}: {what}")]
    Entry { index: usize, what: String },
    #[error("final state digest mismatch")]
    FinalState,
    #[error("summary does not match the replayed log")]
    Summary,
    #[error("re-running the scenario produced a different transcript")]
    Rerun,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Counts from a successful check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckReport {
    pub messages: usize,
    pub events: usize,
    pub final_state_digest: Digest,
}

/// Offline verification of a transcript file.
pub fn check_transcript(bytes: &[u8]) -> Result<CheckReport, CheckError> {
    let t = Transcript::from_bytes(bytes)?;
    if t.version != TRANSCRIPT_VERSION {
        return Err(CheckError::Version(t.version));
    }
    if t.to_bytes() != bytes {
        return Err(CheckError::NotCanonical);
    }
    let computed = t.compute_integrity();
    if computed != t.integrity {
        return Err(CheckError::Integrity { recorded: t.integrity, computed });
    }
    t.scenario.validate()?;

    let mut contract = Contract::new(contract_config(&t.scenario)?);
    let mut messages = 0;
    let mut events_seen = 0;
    for (i, e) in t.entries.iter().enumerate() {
        let Entry::Message { index, tick, sender, call, bytes, direct_bytes, accepted, error, events, state_digest } =
            e
        else {
            continue;
        };
        let bad = |what: String| CheckError::Entry { index: i, what };
        if *index != messages as u64 {
            return Err(bad(format!("message index {index}, expected {messages}")));
        }
        let m = LoggedMessage::from_bytes(bytes).map_err(|e| bad(format!("message does not decode: {e}")))?;
        if m.tick != *tick || m.sender != *sender || m.msg.name() != call {
            return Err(bad("header fields disagree with the encoded message".into()));
        }
        if m.msg.direct_payload_size().map(|n| n as u64) != *direct_bytes {
            return Err(bad("direct payload size is wrong".into()));
        }
        let receipt = contract.apply(m);
        let (ok, err, evs) = match &receipt {
            Ok(ev) => (true, None, ev.clone()),
            Err(e) => (false, Some(e.clone()), Vec::new()),
        };
        if ok != *accepted || err != *error || evs != *events {
            return Err(bad("receipt differs on replay".into()));
        }
        if contract.state_digest() != *state_digest {
            return Err(bad("state digest differs on replay".into()));
        }
        messages += 1;
        events_seen += evs.len();
    }
    if contract.state_digest() != t.final_state_digest {
        return Err(CheckError::FinalState);
    }
    if build_summary(&contract, &t.entries, &t.summary.sampling) != t.summary {
        return Err(CheckError::Summary);
    }
    let again = run_scenario(&t.scenario)?;
    if again != t {
        return Err(CheckError::Rerun);
    }
    Ok(CheckReport { messages, events: events_seen, final_state_digest: t.final_state_digest })
}

/// Differences between a transcript and the scenario's `[expected]` section.
pub fn expectation_mismatches(t: &Transcript) -> Vec<String> {
    let Some(exp) = &t.scenario.expected else { return Vec::new() };
    let s = &t.summary;
    let mut out = Vec::new();
    if let Some(want) = &exp.fraud {
        let got = s.fraud_verdicts();
        if got != want.iter().copied().map(Some).collect::<Vec<_>>() {
            out.push(format!("fraud verdicts: expected {}, got {}", show(want), show(&got)));
        }
    }
    if let Some(want) = &exp.audits {
        let got = s.audit_verdicts();
        if got != want.iter().copied().map(Some).collect::<Vec<_>>() {
            out.push(format!("audit verdicts: expected {}, got {}", show(want), show(&got)));
        }
    }
    if let Some(want) = exp.committed_slots {
        if s.committed_slots != want {
            out.push(format!("committed slots: expected {want}, got {}", s.committed_slots));
        }
    }
    if exp.no_honest_loss {
        for (p, d) in honest_losses(t) {
            out.push(format!("honest party {p} lost {}", -d));
        }
    }
    out
}

/// Honest parties whose net ledger delta is negative.
pub fn honest_losses(t: &Transcript) -> Vec<(PartyId, i64)> {
    t.summary
        .balances
        .iter()
        .filter(|(p, d)| **d < 0 && t.scenario.is_honest(p.as_str()))
        .map(|(p, d)| (p.clone(), *d))
        .collect()
}

fn show<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_default()
}
