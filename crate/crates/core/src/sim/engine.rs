// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, RngCore};

use super::bundle::{assemble, fetch_verified, publish, SlotBundle};
use super::scenario::{ExecutorPolicy, OpenerBehavior, ProviderBehavior, Scenario, ValidatorPolicy};
use super::transcript::{build_summary, Entry, Transcript, TRANSCRIPT_VERSION};
use super::{rng_for, SimError, World};
use crate::codec::Encode;
use crate::contract::{
    AuditPhase, Contract, ContractError, ContractEvent, ContractMessage, FraudPhase, GameId, GameRef, LoggedMessage,
    PartyId, ReplaySubmission, Tick,
};
use crate::crypto::{hash_parts, Domain};
use crate::dac::{sample_and_reconstruct, DacError, DacMember, SampleRequest, SampleResponse, SampleSource};
use crate::kzg::{combine_polynomials, commit, open_at, FieldElement, KzgCommitment, Polynomial};
use crate::rollup::{execute_slot, LedgerState, SlotBuilder, SlotCommitment, SlotTrace};
use crate::vm::{Account, Address, ModifiedAccounts};

/// Result of a sampling-mode check of one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingCheckOutcome {
    /// Steps replayed, ascending.
    pub sampled: Vec<u64>,
    /// First sampled step whose replay diverged.
    pub inconsistent_step: Option<u64>,
    /// Applying the diff to the local state reproduces the committed root.
    pub diff_root_matches: bool,
    /// The published trace matches the on-chain commitment and local pre-state.
    pub trace_matches: bool,
}

impl SamplingCheckOutcome {
    pub fn consistent(&self) -> bool {
        self.inconsistent_step.is_none() && self.diff_root_matches && self.trace_matches
    }
}

/// Applies the published state diff to `pre` and replays each step with
/// probability `rate` against its recorded snapshot. Returns the outcome and
/// the diff-applied state.
pub fn validator_sampling_check(
    pre: &LedgerState,
    record: &SlotCommitment,
    bundle: Option<&SlotBundle>,
    rate: f64,
    rng: &mut impl Rng,
) -> Result<(SamplingCheckOutcome, LedgerState), SimError> {
    let bundle = bundle.ok_or(SimError::DaUnavailable { slot: record.slot })?;
    let trace = &bundle.trace;
    let trace_matches = trace.commitment() == *record && trace.steps.first().is_some_and(|s| s.root == pre.root());
    let mut post = pre.clone();
    post.apply_diff(&bundle.diff);
    let diff_root_matches = post.root() == record.root;
    let mut sampled = Vec::new();
    let mut inconsistent_step = None;
    for step in 1..=trace.tx_count() {
        if rng.gen_bool(rate) {
            sampled.push(step);
            if inconsistent_step.is_none() && !trace.spot_check(step as usize) {
                inconsistent_step = Some(step);
            }
        }
    }
    Ok((SamplingCheckOutcome { sampled, inconsistent_step, diff_root_matches, trace_matches }, post))
}

#[derive(Debug)]
enum Event {
    Deliver { sender: PartyId, msg: ContractMessage, origin: Origin },
    Broadcast(Vec<ContractEvent>),
    Rejected { sender: PartyId, msg: ContractMessage, error: ContractError },
    Wake(Wake),
}

#[derive(Debug, Clone, Copy)]
enum Origin {
    Node,
    Audit(usize),
}

#[derive(Debug, Clone)]
enum Wake {
    Produce,
    Withdraw,
    Audit(usize),
    Sample(usize),
    Timeout { party: PartyId, game: GameRef },
}

struct ProducedSlot {
    pre: LedgerState,
    trace: SlotTrace,
    faulty: bool,
    pieces: Vec<(KzgCommitment, Option<u64>)>,
    submitted: bool,
}

struct Executor {
    party: PartyId,
    policy: ExecutorPolicy,
    state: LedgerState,
    slots: BTreeMap<u64, ProducedSlot>,
    next_slot: u64,
    next_submit: u64,
    fault_spent: bool,
    produce_pending: bool,
    withdraw_sent: bool,
    games: BTreeMap<GameId, u64>,
}

struct Validator {
    party: PartyId,
    policy: ValidatorPolicy,
    /// Post-state per slot as this validator sees it.
    post: BTreeMap<u64, LedgerState>,
    /// Honest traces of slots it re-executed.
    traces: BTreeMap<u64, SlotTrace>,
    games: BTreeMap<GameId, u64>,
    silenced: BTreeSet<GameId>,
}

struct AuditRun {
    opener: PartyId,
    provider: usize,
    provider_behavior: ProviderBehavior,
    start: u64,
    end: u64,
    randoms: Vec<FieldElement>,
    point: FieldElement,
    /// Prefix sums the opener claims, `claimed[0]` is the identity.
    claimed: Vec<KzgCommitment>,
    /// Prefix sums recomputed from the registry.
    honest: Vec<KzgCommitment>,
    last_acted: Option<(AuditPhase, u64, u64, bool)>,
}

pub(crate) struct Engine<'a> {
    s: &'a Scenario,
    world: World,
    contract: Contract,
    queue: BTreeMap<(Tick, u64), Event>,
    seq: u64,
    now: Tick,
    entries: Vec<Entry>,
    exec: Executor,
    validators: Vec<Validator>,
    pending_audits: BTreeMap<usize, AuditRun>,
    audits: BTreeMap<GameId, AuditRun>,
    watched: BTreeSet<(PartyId, GameRef, Tick)>,
    sampling: Vec<super::transcript::SamplingSummary>,
}

impl<'a> Engine<'a> {
    pub fn new(s: &'a Scenario) -> Result<Self, SimError> {
        let world = World::build(s)?;
        let contract = Contract::new(world.config.clone());
        let (exec_id, policy) = s.executor();
        let exec = Executor {
            party: PartyId::new(exec_id),
            policy,
            state: world.genesis.clone(),
            slots: BTreeMap::new(),
            next_slot: 0,
            next_submit: 0,
            fault_spent: false,
            withdraw_sent: false,
            produce_pending: false,
            games: BTreeMap::new(),
        };
        let validators = s
            .validators()
            .map(|(id, policy)| Validator {
                party: PartyId::new(id),
                policy,
                post: BTreeMap::new(),
                traces: BTreeMap::new(),
                games: BTreeMap::new(),
                silenced: BTreeSet::new(),
            })
            .collect();
        Ok(Engine {
            s,
            world,
            contract,
            queue: BTreeMap::new(),
            seq: 0,
            now: 0,
            entries: Vec::new(),
            exec,
            validators,
            pending_audits: BTreeMap::new(),
            audits: BTreeMap::new(),
            watched: BTreeSet::new(),
            sampling: Vec::new(),
        })
    }

    fn push(&mut self, at: Tick, ev: Event) {
        self.queue.insert((at, self.seq), ev);
        self.seq += 1;
    }

    fn delay(&self) -> Tick {
        self.s.network.delay
    }

    fn send(&mut self, sender: &PartyId, msg: ContractMessage) {
        self.send_from(sender, msg, Origin::Node);
    }

    fn send_from(&mut self, sender: &PartyId, msg: ContractMessage, origin: Origin) {
        let at = self.now + self.delay();
        self.push(at, Event::Deliver { sender: sender.clone(), msg, origin });
    }

    fn wake(&mut self, at: Tick, w: Wake) {
        self.push(at, Event::Wake(w));
    }

    fn note(&mut self, actor: &str, text: String) {
        self.entries.push(Entry::Note { tick: self.now, actor: actor.to_string(), text });
    }

    pub fn run(mut self) -> Result<Transcript, SimError> {
        let exec = self.exec.party.clone();
        self.send(&exec, ContractMessage::PostBond);
        let first = self.delay();
        if self.s.slots.is_empty() {
            self.wake(first + 1, Wake::Withdraw);
        } else {
            self.exec.produce_pending = true;
            self.wake(first, Wake::Produce);
        }
        for (k, a) in self.s.audits.iter().enumerate() {
            self.wake(a.tick, Wake::Audit(k));
        }
        for (k, sp) in self.s.sampling.iter().enumerate() {
            self.wake(sp.tick, Wake::Sample(k));
        }

        while let Some(((tick, _), ev)) = self.queue.pop_first() {
            if tick > self.s.network.max_ticks {
                self.now = self.s.network.max_ticks;
                self.note("engine", format!("stopped at max_ticks with {} pending events", self.queue.len() + 1));
                break;
            }
            self.now = tick;
            match ev {
                Event::Deliver { sender, msg, origin } => self.deliver(sender, msg, origin),
                Event::Broadcast(events) => self.broadcast(&events)?,
                Event::Rejected { sender, msg, error } => self.rejected(&sender, &msg, &error),
                Event::Wake(w) => self.on_wake(w)?,
            }
        }

        let summary = build_summary(&self.contract, &self.entries, &self.sampling);
        Ok(Transcript::seal(TRANSCRIPT_VERSION, self.s.clone(), self.entries, self.contract.state_digest(), summary))
    }

    fn deliver(&mut self, sender: PartyId, msg: ContractMessage, origin: Origin) {
        let entry = LoggedMessage { tick: self.now, sender: sender.clone(), msg };
        let bytes = entry.to_bytes();
        let direct_bytes = entry.msg.direct_payload_size().map(|n| n as u64);
        let call = entry.msg.name().to_string();
        let msg = entry.msg.clone();
        let receipt = self.contract.apply(entry);
        let index = self.entries.iter().filter(|e| matches!(e, Entry::Message { .. })).count() as u64;
        let (accepted, error, events) = match &receipt {
            Ok(ev) => (true, None, ev.clone()),
            Err(e) => (false, Some(e.clone()), Vec::new()),
        };
        self.entries.push(Entry::Message {
            index,
            tick: self.now,
            sender: sender.clone(),
            call,
            bytes,
            direct_bytes,
            accepted,
            error,
            events,
            state_digest: self.contract.state_digest(),
        });
        let at = self.now + self.delay();
        match receipt {
            Ok(events) => {
                if let Origin::Audit(k) = origin {
                    let game = events.iter().find_map(|e| match e {
                        ContractEvent::AuditOpened { game, .. } => Some(*game),
                        _ => None,
                    });
                    if let (Some(game), Some(run)) = (game, self.pending_audits.remove(&k)) {
                        self.audits.insert(game, run);
                    }
                }
                if !events.is_empty() {
                    self.push(at, Event::Broadcast(events));
                }
            }
            Err(error) => self.push(at, Event::Rejected { sender, msg, error }),
        }
    }

    fn rejected(&mut self, sender: &PartyId, msg: &ContractMessage, error: &ContractError) {
        if *sender == self.exec.party
            && matches!(msg, ContractMessage::WithdrawBond)
            && *error == ContractError::BondLocked
        {
            let retry = self.now + self.s.protocol.response_deadline;
            self.exec.withdraw_sent = false;
            self.wake(retry, Wake::Withdraw);
        }
    }

    fn on_wake(&mut self, w: Wake) -> Result<(), SimError> {
        match w {
            Wake::Produce => self.produce()?,
            Wake::Withdraw => {
                let bonded = self.contract.state().bonds.contains_key(&self.exec.party);
                let done = self.contract.next_slot() == self.s.slots.len() as u64;
                let state = self.contract.state();
                let closes = state
                    .slot_commitments
                    .values()
                    .filter(|r| r.submitter == self.exec.party)
                    .map(|r| r.submitted_at + self.s.protocol.challenge_window)
                    .max()
                    .unwrap_or(0);
                if bonded && done && self.now + self.s.network.delay <= closes {
                    self.wake(closes + 1, Wake::Withdraw);
                } else if bonded && done && !self.exec.withdraw_sent {
                    self.exec.withdraw_sent = true;
                    let p = self.exec.party.clone();
                    self.send(&p, ContractMessage::WithdrawBond);
                }
            }
            Wake::Audit(k) => self.open_audit(k)?,
            Wake::Sample(k) => self.run_sampling(k),
            Wake::Timeout { party, game } => self.claim_timeout(&party, game),
        }
        Ok(())
    }

    fn watch(&mut self, party: &PartyId, game: GameRef, deadline: Tick) {
        if self.watched.insert((party.clone(), game, deadline)) {
            self.wake(deadline + 1, Wake::Timeout { party: party.clone(), game });
        }
    }

    fn claim_timeout(&mut self, party: &PartyId, game: GameRef) {
        let expired = match game {
            GameRef::Fraud(id) => self.contract.fraud_game(id).is_some_and(|g| {
                g.phase != FraudPhase::Resolved && self.now > g.deadline && g.to_move() != Some(party)
            }),
            GameRef::Audit(id) => self.contract.audit_game(id).is_some_and(|g| {
                g.phase != AuditPhase::Resolved && self.now > g.deadline && g.to_move() != Some(party)
            }),
        };
        if expired {
            self.send(party, ContractMessage::Timeout { game });
        }
    }

    fn broadcast(&mut self, events: &[ContractEvent]) -> Result<(), SimError> {
        let mut audits = BTreeSet::new();
        for ev in events {
            self.executor_event(ev);
            for v in 0..self.validators.len() {
                self.validator_event(v, ev)?;
            }
            match ev {
                ContractEvent::AuditOpened { game, .. }
                | ContractEvent::AuditMidpoint { game, .. }
                | ContractEvent::AuditAnswered { game, .. }
                | ContractEvent::AuditStepChecked { game, .. } => {
                    audits.insert(*game);
                }
                _ => {}
            }
        }
        for id in audits {
            self.drive_audit(id)?;
        }
        Ok(())
    }

    // Executor

    fn produce(&mut self) -> Result<(), SimError> {
        let i = self.exec.next_slot;
        let Some(txs) = self.s.slot_txs(i) else {
            self.exec.produce_pending = false;
            return Ok(());
        };
        let pre = self.exec.state.clone();
        let fault = if self.exec.fault_spent { None } else { self.exec.policy.fault().filter(|(slot, _)| *slot == i) };
        let policy = self.exec.policy;
        let mut b = SlotBuilder::new(&mut self.exec.state, i);
        for (j, tx) in txs.into_iter().enumerate() {
            let step = j as u64 + 1;
            let at_fault = fault.is_some_and(|(_, k)| k == step);
            let r = match policy {
                ExecutorPolicy::CorruptMaAtStep { .. } | ExecutorPolicy::StallInGame { .. } if at_fault => {
                    b.step_with(tx, corrupt_ma)
                }
                _ => b.step(tx),
            };
            r.map_err(|e| SimError::InvalidScenario(e.to_string()))?;
            if at_fault {
                match policy {
                    ExecutorPolicy::WrongRoot { .. } => {
                        let ghost = Address::from_label(&format!("ghost-{i}"));
                        b.inject_leaf(ghost.smt_key(), hash_parts(Domain::Seed, &[b"ghost", &i.to_be_bytes()]));
                    }
                    ExecutorPolicy::WrongChain { .. } => {
                        b.override_chain(hash_parts(
                            Domain::Seed,
                            &[b"wrong-chain", &i.to_be_bytes(), &step.to_be_bytes()],
                        ));
                    }
                    _ => {}
                }
            }
        }
        let (sc, trace) = b.finish();
        if fault.is_some() {
            self.exec.fault_spent = true;
        }

        let payload = SlotBundle::from_trace(trace.clone()).to_bytes();
        let pieces = publish(&payload, &self.world.setup, &self.world.params, &mut self.world.members)?;
        let party = self.exec.party.clone();
        self.note(
            party.as_str(),
            format!(
                "slot {i}: {} txs, root {}, {} bytes in {} DA pieces",
                sc.tx_count,
                sc.root,
                payload.len(),
                pieces.len()
            ),
        );
        for p in &pieces {
            for (m, e) in &p.refusals {
                self.note(&format!("dac-{m}"), format!("refused to sign {}: {e}", short(&p.cm)));
            }
        }
        for p in &pieces {
            self.send(&party, ContractMessage::RegisterDa { cm: p.cm, signatures: p.signatures.clone() });
        }
        self.exec.slots.insert(
            i,
            ProducedSlot {
                pre,
                trace,
                faulty: fault.is_some(),
                pieces: pieces.iter().map(|p| (p.cm, None)).collect(),
                submitted: false,
            },
        );
        self.exec.next_slot += 1;
        if (self.exec.next_slot as usize) < self.s.slots.len() {
            let at = self.now + self.s.network.slot_interval;
            self.wake(at, Wake::Produce);
        } else {
            self.exec.produce_pending = false;
        }
        Ok(())
    }

    fn try_submit(&mut self) {
        loop {
            let i = self.exec.next_submit;
            let Some(ps) = self.exec.slots.get_mut(&i) else { return };
            if ps.submitted || ps.pieces.iter().any(|(_, idx)| idx.is_none()) {
                return;
            }
            ps.submitted = true;
            let commitment = ps.trace.commitment();
            let da_refs = ps.pieces.iter().map(|(_, idx)| idx.expect("checked")).collect();
            self.exec.next_submit += 1;
            let party = self.exec.party.clone();
            self.send(&party, ContractMessage::SubmitSlot { commitment, da_refs });
        }
    }

    fn executor_event(&mut self, ev: &ContractEvent) {
        let me = self.exec.party.clone();
        match ev {
            ContractEvent::DaRegistered { index, cm, .. } => {
                let slot = self
                    .exec
                    .slots
                    .values_mut()
                    .filter(|s| !s.submitted)
                    .find_map(|s| s.pieces.iter_mut().find(|(c, idx)| c == cm && idx.is_none()));
                if let Some((_, idx)) = slot {
                    *idx = Some(*index);
                    self.try_submit();
                }
            }
            ContractEvent::SlotCommitted { record, window_closes } if record.submitter == me => {
                let last = record.commitment.slot + 1 == self.s.slots.len() as u64;
                if last {
                    self.wake(window_closes + 1, Wake::Withdraw);
                }
            }
            ContractEvent::ChallengeOpened { game, slot, defender, lo, hi, phase, deadline, .. } if *defender == me => {
                self.exec.games.insert(*game, *slot);
                self.watch(&me, GameRef::Fraud(*game), *deadline);
                self.defend(*game, *slot, *lo, *hi, *phase);
            }
            ContractEvent::MidpointSubmitted { game, deadline, .. } if self.exec.games.contains_key(game) => {
                self.watch(&me, GameRef::Fraud(*game), *deadline);
            }
            ContractEvent::MidpointAnswered { game, lo, hi, phase, deadline, .. } => {
                if let Some(slot) = self.exec.games.get(game).copied() {
                    self.watch(&me, GameRef::Fraud(*game), *deadline);
                    self.defend(*game, slot, *lo, *hi, *phase);
                }
            }
            ContractEvent::FraudResolved { game, .. } => {
                self.exec.games.remove(game);
            }
            ContractEvent::SlotsVoided { from_slot, .. } => {
                let Some(ps) = self.exec.slots.get(from_slot) else { return };
                self.exec.state = ps.pre.clone();
                self.exec.slots.retain(|s, _| s < from_slot);
                self.exec.next_slot = self.exec.next_slot.min(*from_slot);
                self.exec.next_submit = self.exec.next_submit.min(*from_slot);
                self.note(me.as_str(), format!("rolled back to slot {from_slot}"));
                if !self.contract.state().bonds.contains_key(&me) {
                    self.send(&me, ContractMessage::PostBond);
                }
                if !self.exec.produce_pending {
                    self.exec.produce_pending = true;
                    self.wake(self.now + 1, Wake::Produce);
                }
            }
            _ => {}
        }
    }

    fn defend(&mut self, game: GameId, slot: u64, lo: u64, hi: u64, phase: FraudPhase) {
        let Some(ps) = self.exec.slots.get(&slot) else { return };
        if matches!(self.exec.policy, ExecutorPolicy::StallInGame { .. }) && ps.faulty {
            return;
        }
        let msg = match phase {
            FraudPhase::Bisecting => {
                let m = (lo + hi) / 2;
                ContractMessage::BisectSubmit { game, mid: ps.trace.steps[m as usize] }
            }
            FraudPhase::AwaitingReplay => {
                let state = ps.trace.state_at(&ps.pre, lo as usize);
                ContractMessage::Replay {
                    game,
                    submission: ReplaySubmission::build(&state, &ps.trace.txs[lo as usize]),
                }
            }
            FraudPhase::Resolved => return,
        };
        let me = self.exec.party.clone();
        self.send(&me, msg);
    }

    // Validators

    fn validator_event(&mut self, v: usize, ev: &ContractEvent) -> Result<(), SimError> {
        let me = self.validators[v].party.clone();
        match ev {
            ContractEvent::SlotCommitted { record, .. } => {
                self.verify_slot(v, record.commitment, &record.da_indices)?
            }
            ContractEvent::ChallengeOpened { game, slot, challenger, deadline, .. } if *challenger == me => {
                self.validators[v].games.insert(*game, *slot);
                self.watch(&me, GameRef::Fraud(*game), *deadline);
            }
            ContractEvent::MidpointSubmitted { game, mid, deadline } => {
                let Some(slot) = self.validators[v].games.get(game).copied() else { return Ok(()) };
                self.watch(&me, GameRef::Fraud(*game), *deadline);
                let val = &mut self.validators[v];
                let agree = match val.policy {
                    ValidatorPolicy::FalseChallenge { .. } => false,
                    ValidatorPolicy::StallAfterMidpoint { .. } => {
                        val.silenced.insert(*game);
                        return Ok(());
                    }
                    ValidatorPolicy::Honest | ValidatorPolicy::SamplingCheck { .. } => val
                        .traces
                        .get(&slot)
                        .and_then(|t| t.steps.get(mid.step as usize))
                        .is_some_and(|s| s.same_claim(mid)),
                };
                self.send(&me, ContractMessage::BisectRespond { game: *game, agree });
            }
            ContractEvent::MidpointAnswered { game, deadline, .. } if self.validators[v].games.contains_key(game) => {
                self.watch(&me, GameRef::Fraud(*game), *deadline);
            }
            ContractEvent::SlotsVoided { from_slot, .. } => {
                let val = &mut self.validators[v];
                val.post.retain(|s, _| s < from_slot);
                val.traces.retain(|s, _| s < from_slot);
            }
            _ => {}
        }
        Ok(())
    }

    fn fetch_bundle(&mut self, actor: &PartyId, slot: u64, da_indices: &[u64]) -> Option<SlotBundle> {
        let mut pieces = Vec::with_capacity(da_indices.len());
        for idx in da_indices {
            let cm = self.contract.da_entry(*idx).map(|e| e.cm)?;
            let (blob, failed) = fetch_verified(&cm, &self.world.setup, &self.world.params, &self.world.members);
            if !failed.is_empty() {
                let who: Vec<String> = failed.iter().map(|m| format!("dac-{m}")).collect();
                self.note(actor.as_str(), format!("slot {slot}: piece {idx} not served by {}", who.join(", ")));
            }
            pieces.push(blob?);
        }
        match assemble(&pieces) {
            Ok(b) if b.trace.slot == slot => Some(b),
            _ => {
                self.note(actor.as_str(), format!("slot {slot}: DA data does not decode"));
                None
            }
        }
    }

    fn verify_slot(&mut self, v: usize, record: SlotCommitment, da_indices: &[u64]) -> Result<(), SimError> {
        let i = record.slot;
        let me = self.validators[v].party.clone();
        let pre = if i == 0 {
            self.world.genesis.clone()
        } else {
            match self.validators[v].post.get(&(i - 1)) {
                Some(s) => s.clone(),
                None => {
                    self.note(me.as_str(), format!("slot {i}: no local pre-state, skipped"));
                    return Ok(());
                }
            }
        };
        let bundle = self.fetch_bundle(&me, i, da_indices);
        let pre_agrees = self.contract.pre_slot_root(i) == Some(pre.root());
        let policy = self.validators[v].policy;

        let mut full_check = true;
        if let ValidatorPolicy::SamplingCheck { rate } = policy {
            let mut rng = rng_for(&format!("sampling-check/{me}/{i}"), self.s.seed);
            match validator_sampling_check(&pre, &record, bundle.as_ref(), rate, &mut rng) {
                Ok((out, post)) => {
                    self.note(
                        me.as_str(),
                        format!("slot {i}: sampled steps {:?}, consistent {}", out.sampled, out.consistent()),
                    );
                    if out.consistent() {
                        full_check = false;
                        self.validators[v].post.insert(i, post);
                        if let Some(b) = &bundle {
                            self.validators[v].traces.insert(i, b.trace.clone());
                        }
                    }
                }
                Err(e) => {
                    self.note(me.as_str(), format!("slot {i}: {e}"));
                    return Ok(());
                }
            }
        }

        let mut mismatch = false;
        if full_check {
            let Some(bundle) = &bundle else {
                self.note(me.as_str(), format!("slot {i}: DA data unavailable, cannot re-execute"));
                return Ok(());
            };
            match execute_slot(&pre, i, &bundle.trace.txs) {
                Ok((post, sc, trace)) => {
                    mismatch = sc != record;
                    let val = &mut self.validators[v];
                    val.post.insert(i, post);
                    val.traces.insert(i, trace);
                }
                Err(e) => {
                    self.note(me.as_str(), format!("slot {i}: re-execution failed: {e}"));
                    return Ok(());
                }
            }
        }

        let challenge = match policy {
            ValidatorPolicy::Honest | ValidatorPolicy::SamplingCheck { .. } => mismatch && pre_agrees,
            ValidatorPolicy::FalseChallenge { slot } | ValidatorPolicy::StallAfterMidpoint { slot } => {
                slot.is_none_or(|s| s == i) || (mismatch && pre_agrees)
            }
        };
        if challenge {
            self.send(&me, ContractMessage::OpenChallenge { slot: i });
        }
        Ok(())
    }

    // Audits

    fn open_audit(&mut self, k: usize) -> Result<(), SimError> {
        let spec = self.s.audits[k].clone();
        let registry: Vec<KzgCommitment> = self.contract.state().da_registry.iter().map(|e| e.cm).collect();
        let end = spec.end.unwrap_or(registry.len() as u64).min(registry.len() as u64);
        if spec.start >= end {
            self.note(&spec.opener, format!("audit {k}: empty range {}..{end}, not opened", spec.start));
            return Ok(());
        }
        let t = (end - spec.start) as usize;
        let mut rng = rng_for(&format!("audit/{k}/{}", spec.opener), self.s.seed);
        let randoms: Vec<FieldElement> = (0..t).map(|_| FieldElement::random(&mut rng)).collect();
        let point = FieldElement::random(&mut rng);
        let mut honest = vec![KzgCommitment::identity()];
        for (j, r) in randoms.iter().enumerate() {
            let prev = honest[j];
            honest.push(prev + registry[spec.start as usize + j] * *r);
        }
        let claimed = match spec.opener_behavior {
            OpenerBehavior::Honest => honest.clone(),
            OpenerBehavior::Inflate { from } => {
                let bump = commit(&self.world.setup, &Polynomial::constant(FieldElement::one()))?;
                honest.iter().enumerate().map(|(j, c)| if j as u64 >= from.max(1) { *c + bump } else { *c }).collect()
            }
        };
        let opener = PartyId::new(spec.opener.clone());
        let msg = ContractMessage::AuditOpen {
            provider: self.world.members[spec.provider as usize].party.clone(),
            start: spec.start,
            end,
            randoms: randoms.clone(),
            point,
            claimed_total: claimed[t],
        };
        self.pending_audits.insert(
            k,
            AuditRun {
                opener: opener.clone(),
                provider: spec.provider as usize,
                provider_behavior: spec.provider_behavior,
                start: spec.start,
                end,
                randoms,
                point,
                claimed,
                honest,
                last_acted: None,
            },
        );
        self.send_from(&opener, msg, Origin::Audit(k));
        Ok(())
    }

    fn drive_audit(&mut self, id: GameId) -> Result<(), SimError> {
        let Some(g) = self.contract.audit_game(id).cloned() else { return Ok(()) };
        let Some(run) = self.audits.get(&id) else { return Ok(()) };
        let provider = self.world.members[run.provider].party.clone();
        let opener = run.opener.clone();
        if g.phase == AuditPhase::Resolved {
            return Ok(());
        }
        self.watch(&opener, GameRef::Audit(id), g.deadline);
        self.watch(&provider, GameRef::Audit(id), g.deadline);
        let run = self.audits.get(&id).expect("present");
        let key = (g.phase, g.lo, g.hi, g.pending_mid.is_some());
        if run.last_acted == Some(key) {
            return Ok(());
        }
        let honest_provider = run.provider_behavior == ProviderBehavior::Honest;
        let t = (run.end - run.start) as usize;
        let (sender, msg) = match (g.phase, g.pending_mid) {
            (AuditPhase::AwaitingTotal, _) => {
                let agree = honest_provider && g.hi_sum == run.honest[t];
                (provider, ContractMessage::AuditRespond { game: id, agree })
            }
            (AuditPhase::Bisecting, None) => {
                let mid = g.midpoint() as usize;
                (opener, ContractMessage::AuditBisect { game: id, mid_sum: run.claimed[mid] })
            }
            (AuditPhase::Bisecting, Some(sum)) => {
                let agree = honest_provider && sum == run.honest[g.midpoint() as usize];
                (provider, ContractMessage::AuditRespond { game: id, agree })
            }
            (AuditPhase::AwaitingOpening, _) => match self.provider_opening(run) {
                Ok(poly) => {
                    let opening = open_at(&self.world.setup, &poly, run.point)?;
                    (provider, ContractMessage::AuditFinalize { game: id, opening })
                }
                Err(e) => {
                    self.audits.get_mut(&id).expect("present").last_acted = Some(key);
                    self.note(provider.as_str(), format!("audit {id}: cannot open, {e}"));
                    return Ok(());
                }
            },
            (AuditPhase::Resolved, _) => return Ok(()),
        };
        self.audits.get_mut(&id).expect("present").last_acted = Some(key);
        self.send(&sender, msg);
        Ok(())
    }

    /// `F = Σ rᵢ·fᵢ` over the provider's stored polynomials.
    fn provider_opening(&self, run: &AuditRun) -> Result<Polynomial, DacError> {
        let member = &self.world.members[run.provider];
        let registry = &self.contract.state().da_registry;
        let polys: Vec<&Polynomial> =
            (run.start..run.end).map(|i| member.polynomial(&registry[i as usize].cm)).collect::<Result<_, _>>()?;
        let terms: Vec<(FieldElement, &Polynomial)> = run.randoms.iter().copied().zip(polys).collect();
        Ok(combine_polynomials(&terms))
    }

    // Sampling

    fn run_sampling(&mut self, k: usize) {
        let spec = self.s.sampling[k].clone();
        let mut summary = super::transcript::SamplingSummary {
            tick: self.now,
            index: spec.index,
            reconstructed: false,
            blob_digest: None,
            verified: 0,
            rejected: 0,
            refused: 0,
            rounds: 0,
            error: None,
        };
        match self.contract.da_entry(spec.index).map(|e| e.cm) {
            None => summary.error = Some(format!("no registry entry {}", spec.index)),
            Some(cm) => {
                let seed = rng_for(&format!("sampling/{k}"), self.s.seed).next_u64();
                let source = MemberSource { members: &self.world.members, contract: &self.contract };
                let root = self.contract.commitment_root();
                match sample_and_reconstruct(
                    &source,
                    spec.index,
                    &cm,
                    &root,
                    &self.world.setup,
                    &self.world.params,
                    seed,
                    &spec.config,
                ) {
                    Ok(out) => {
                        summary.reconstructed = true;
                        summary.blob_digest = Some(hash_parts(Domain::Seed, &[b"blob", &out.blob]));
                        summary.verified = out.verified as u64;
                        summary.rejected = out.rejected as u64;
                        summary.refused = out.refused as u64;
                        summary.rounds = out.rounds as u64;
                    }
                    Err(e) => summary.error = Some(e.to_string()),
                }
            }
        }
        let text = match &summary.error {
            None => format!("piece {} reconstructed from {} verified points", spec.index, summary.verified),
            Some(e) => format!("piece {}: {e}", spec.index),
        };
        self.note("samplers", text);
        self.sampling.push(summary);
    }
}

/// Serves party `k` in round `r` from member `(k + r) mod n`.
struct MemberSource<'a> {
    members: &'a [DacMember],
    contract: &'a Contract,
}

impl SampleSource for MemberSource<'_> {
    fn respond(&self, party: usize, round: usize, req: &SampleRequest) -> Result<SampleResponse, DacError> {
        let m = &self.members[(party + round) % self.members.len()];
        let openings = m.dac_open(&req.cm, &req.points)?;
        let membership = self.contract.commitment_membership_proof(req.index).map_err(|_| DacError::NotStored)?;
        Ok(SampleResponse { cm: req.cm, openings, membership })
    }
}

/// Bumps the first surviving account's balance, or invents one.
fn corrupt_ma(ma: &mut ModifiedAccounts) {
    match ma.entries.iter_mut().find_map(|(_, a)| a.as_mut()) {
        Some(a) => a.balance = a.balance.wrapping_add(1),
        None => {
            let ghost = Address::from_label("phantom");
            ma.entries.push((ghost, Some(Account::new(ghost, 1, ghost))));
            ma.entries.sort_by_key(|e| e.0);
        }
    }
}

fn short(cm: &KzgCommitment) -> String {
    cm.to_hex()[..12].to_string()
}
