// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Slot execution: state tree maintenance, the per-transaction hash chain,
//! and slot commitments `{root, chain_head, tx_count}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{put_bytes, put_seq, put_u64, Decode, DecodeError, Encode, Reader};
use crate::crypto::{hash_parts, Digest, Domain, MerkleProof, SmtKey, SparseMerkleTree};
use crate::vm::{account_digest, declared_accounts, execute, Account, Address, ModifiedAccounts, Transaction, VmError};

/// `H_{i,0}`: the chain value before the first transaction of a slot.
pub const NULL_CHAIN: Digest = Digest::ZERO;

/// `H(tx ‖ ma ‖ prev)` over length-framed canonical encodings.
pub fn chain_step(prev: &Digest, tx: &Transaction, ma: &ModifiedAccounts) -> Digest {
    let mut buf = Vec::with_capacity(256);
    put_bytes(&mut buf, &tx.to_bytes());
    put_bytes(&mut buf, &ma.to_bytes());
    hash_parts(Domain::TxChain, &[&buf, &prev.0])
}

/// SMT writes implied by a modified-account set.
pub fn ma_writes(ma: &ModifiedAccounts) -> Vec<(SmtKey, Option<Digest>)> {
    ma.entries.iter().map(|(addr, acct)| (addr.smt_key(), acct.as_ref().map(|a| account_digest(Some(a))))).collect()
}

/// Committed state tree plus the account bodies behind its leaves.
#[derive(Debug, Clone, Default)]
pub struct LedgerState {
    tree: SparseMerkleTree,
    accounts: BTreeMap<Address, Account>,
}

impl LedgerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn genesis<I: IntoIterator<Item = Account>>(accounts: I) -> Self {
        let mut s = Self::new();
        for a in accounts {
            s.put(a.address, Some(a));
        }
        s
    }

    pub fn root(&self) -> Digest {
        self.tree.root()
    }

    pub fn tree(&self) -> &SparseMerkleTree {
        &self.tree
    }

    pub(crate) fn tree_mut(&mut self) -> &mut SparseMerkleTree {
        &mut self.tree
    }

    pub fn get(&self, addr: &Address) -> Option<&Account> {
        self.accounts.get(addr)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &Account> {
        self.accounts.values()
    }

    fn put(&mut self, addr: Address, acct: Option<Account>) {
        self.tree.insert(addr.smt_key(), acct.as_ref().map(|a| account_digest(Some(a))));
        match acct {
            Some(a) => {
                self.accounts.insert(addr, a);
            }
            None => {
                self.accounts.remove(&addr);
            }
        }
    }

    pub fn apply(&mut self, ma: &ModifiedAccounts) {
        for (addr, acct) in &ma.entries {
            self.put(*addr, acct.clone());
        }
    }

    pub fn apply_diff(&mut self, diff: &[(Address, Option<Account>)]) {
        for (addr, acct) in diff {
            self.put(*addr, acct.clone());
        }
    }

    /// Pre-states of the accounts `tx` declares.
    pub fn snapshot(&self, tx: &Transaction) -> BTreeMap<Address, Option<Account>> {
        declared_accounts(tx).into_iter().map(|a| (a, self.accounts.get(&a).cloned())).collect()
    }

    pub fn prove(&self, addr: &Address) -> MerkleProof {
        self.tree.prove(&addr.smt_key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCommitment {
    pub slot: u64,
    pub step: u64,
    pub root: Digest,
    pub chain: Digest,
}

impl StepCommitment {
    /// True when root and chain agree; slot/step are positional.
    pub fn same_claim(&self, other: &StepCommitment) -> bool {
        self.root == other.root && self.chain == other.chain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotCommitment {
    pub slot: u64,
    pub root: Digest,
    pub chain_head: Digest,
    pub tx_count: u64,
}

impl SlotCommitment {
    pub fn final_step(&self) -> StepCommitment {
        StepCommitment { slot: self.slot, step: self.tx_count, root: self.root, chain: self.chain_head }
    }
}

/// Everything needed to replay or argue about a slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotTrace {
    pub slot: u64,
    pub txs: Vec<Transaction>,
    /// `t + 1` entries; entry 0 is the pre-slot state.
    pub steps: Vec<StepCommitment>,
    pub ma_list: Vec<ModifiedAccounts>,
    /// Declared-account pre-states for each transaction.
    pub input_snapshots: Vec<Vec<(Address, Option<Account>)>>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RollupError {
    #[error("transaction {step} of slot {slot}: {source}")]
    Execution { slot: u64, step: u64, source: VmError },
    #[error("replay diverges at step {step}: {what}")]
    ReplayMismatch { step: u64, what: &'static str },
    #[error("trace is malformed: {0}")]
    MalformedTrace(&'static str),
}

/// Incremental slot execution. Exposes hooks so that simulated faulty
/// executors can deviate at a chosen step.
pub struct SlotBuilder<'a> {
    state: &'a mut LedgerState,
    trace: SlotTrace,
}

impl<'a> SlotBuilder<'a> {
    pub fn new(state: &'a mut LedgerState, slot: u64) -> Self {
        let step0 = StepCommitment { slot, step: 0, root: state.root(), chain: NULL_CHAIN };
        SlotBuilder {
            state,
            trace: SlotTrace {
                slot,
                txs: Vec::new(),
                steps: vec![step0],
                ma_list: Vec::new(),
                input_snapshots: Vec::new(),
            },
        }
    }

    pub fn state(&self) -> &LedgerState {
        self.state
    }

    pub fn steps_done(&self) -> u64 {
        self.trace.txs.len() as u64
    }

    /// Executes one transaction honestly.
    pub fn step(&mut self, tx: Transaction) -> Result<StepCommitment, RollupError> {
        self.step_with(tx, |_| {})
    }

    /// Executes one transaction, letting `tamper` rewrite its ma before it is
    /// applied and chained.
    pub fn step_with(
        &mut self,
        tx: Transaction,
        tamper: impl FnOnce(&mut ModifiedAccounts),
    ) -> Result<StepCommitment, RollupError> {
        let slot = self.trace.slot;
        let step = self.steps_done() + 1;
        let inputs = self.state.snapshot(&tx);
        let mut ma = execute(&tx, &inputs).map_err(|source| RollupError::Execution { slot, step, source })?;
        tamper(&mut ma);
        self.state.apply(&ma);
        let prev = self.trace.steps.last().expect("step 0 present").chain;
        let commit = StepCommitment { slot, step, root: self.state.root(), chain: chain_step(&prev, &tx, &ma) };
        self.trace.txs.push(tx);
        self.trace.ma_list.push(ma);
        self.trace.input_snapshots.push(inputs.into_iter().collect());
        self.trace.steps.push(commit);
        Ok(commit)
    }

    /// Replaces the chain value of the latest step.
    pub fn override_chain(&mut self, chain: Digest) {
        self.trace.steps.last_mut().expect("step 0 present").chain = chain;
    }

    /// Writes a leaf the account map does not know about and re-records the
    /// latest step's root.
    pub fn inject_leaf(&mut self, key: SmtKey, value: Digest) {
        self.state.tree_mut().insert(key, Some(value));
        let root = self.state.root();
        self.trace.steps.last_mut().expect("step 0 present").root = root;
    }

    pub fn finish(self) -> (SlotCommitment, SlotTrace) {
        let last = *self.trace.steps.last().expect("step 0 present");
        let sc = SlotCommitment {
            slot: self.trace.slot,
            root: last.root,
            chain_head: last.chain,
            tx_count: self.trace.txs.len() as u64,
        };
        (sc, self.trace)
    }
}

/// Executes a slot honestly on a copy of `state`.
pub fn execute_slot(
    state: &LedgerState,
    slot: u64,
    txs: &[Transaction],
) -> Result<(LedgerState, SlotCommitment, SlotTrace), RollupError> {
    let mut next = state.clone();
    let (sc, trace) = execute_slot_in_place(&mut next, slot, txs)?;
    Ok((next, sc, trace))
}

pub fn execute_slot_in_place(
    state: &mut LedgerState,
    slot: u64,
    txs: &[Transaction],
) -> Result<(SlotCommitment, SlotTrace), RollupError> {
    let mut b = SlotBuilder::new(state, slot);
    for tx in txs {
        b.step(tx.clone())?;
    }
    Ok(b.finish())
}

/// Net per-address effect of a slot; last write wins.
pub fn state_diff(trace: &SlotTrace) -> Vec<(Address, Option<Account>)> {
    let mut net = BTreeMap::new();
    for ma in &trace.ma_list {
        for (addr, acct) in &ma.entries {
            net.insert(*addr, acct.clone());
        }
    }
    net.into_iter().collect()
}

impl SlotTrace {
    pub fn tx_count(&self) -> u64 {
        self.txs.len() as u64
    }

    pub fn commitment(&self) -> SlotCommitment {
        let last = self.steps.last().copied().unwrap_or(StepCommitment {
            slot: self.slot,
            step: 0,
            root: Digest::ZERO,
            chain: NULL_CHAIN,
        });
        SlotCommitment { slot: self.slot, root: last.root, chain_head: last.chain, tx_count: self.tx_count() }
    }

    fn check_shape(&self) -> Result<(), RollupError> {
        let t = self.txs.len();
        if self.steps.len() != t + 1 || self.ma_list.len() != t || self.input_snapshots.len() != t {
            return Err(RollupError::MalformedTrace("inconsistent lengths"));
        }
        if self.steps[0].chain != NULL_CHAIN {
            return Err(RollupError::MalformedTrace("step 0 chain is not NULL"));
        }
        Ok(())
    }

    /// State after the first `k` recorded ma's have been applied to `pre`.
    pub fn state_at(&self, pre: &LedgerState, k: usize) -> LedgerState {
        let mut s = pre.clone();
        for ma in &self.ma_list[..k.min(self.ma_list.len())] {
            s.apply(ma);
        }
        s
    }

    /// Replays every step from `pre` and checks that each recorded snapshot,
    /// ma, chain value and root is reproduced.
    pub fn replay(&self, pre: &LedgerState) -> Result<LedgerState, RollupError> {
        self.check_shape()?;
        if self.steps[0].root != pre.root() {
            return Err(RollupError::ReplayMismatch { step: 0, what: "pre-slot root" });
        }
        let mut state = pre.clone();
        for j in 0..self.txs.len() {
            let step = j as u64 + 1;
            let tx = &self.txs[j];
            let inputs = state.snapshot(tx);
            if inputs.iter().map(|(a, b)| (*a, b.clone())).collect::<Vec<_>>() != self.input_snapshots[j] {
                return Err(RollupError::ReplayMismatch { step, what: "input snapshot" });
            }
            let ma = execute(tx, &inputs).map_err(|source| RollupError::Execution { slot: self.slot, step, source })?;
            if ma != self.ma_list[j] {
                return Err(RollupError::ReplayMismatch { step, what: "modified accounts" });
            }
            state.apply(&ma);
            if chain_step(&self.steps[j].chain, tx, &ma) != self.steps[j + 1].chain {
                return Err(RollupError::ReplayMismatch { step, what: "chain" });
            }
            if state.root() != self.steps[j + 1].root {
                return Err(RollupError::ReplayMismatch { step, what: "root" });
            }
        }
        Ok(state)
    }

    /// Replays a single step `j` (1-based) against its recorded snapshot and
    /// predecessor, without any state tree. Returns false on divergence.
    pub fn spot_check(&self, step: usize) -> bool {
        if step == 0 || step > self.txs.len() || self.check_shape().is_err() {
            return false;
        }
        let j = step - 1;
        let tx = &self.txs[j];
        let inputs: BTreeMap<_, _> = self.input_snapshots[j].iter().cloned().collect();
        match execute(tx, &inputs) {
            Ok(ma) => ma == self.ma_list[j] && chain_step(&self.steps[j].chain, tx, &ma) == self.steps[j + 1].chain,
            Err(_) => false,
        }
    }

    /// Human-readable one-line-per-step summary.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let sc = self.commitment();
        let _ = writeln!(s, "slot {} txs={} root={} chain={}", self.slot, sc.tx_count, sc.root, sc.chain_head);
        for (j, step) in self.steps.iter().enumerate().skip(1) {
            let _ = writeln!(
                s,
                "  step {:>3} modified={} root={}.. chain={}..",
                j,
                self.ma_list[j - 1].entries.len(),
                &step.root.to_hex()[..16],
                &step.chain.to_hex()[..16]
            );
        }
        s
    }
}

impl Encode for StepCommitment {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, self.slot);
        put_u64(out, self.step);
        self.root.encode(out);
        self.chain.encode(out);
    }
}

impl Decode for StepCommitment {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(StepCommitment { slot: r.u64()?, step: r.u64()?, root: Digest::decode(r)?, chain: Digest::decode(r)? })
    }
}

impl Encode for SlotCommitment {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, self.slot);
        self.root.encode(out);
        self.chain_head.encode(out);
        put_u64(out, self.tx_count);
    }
}

impl Decode for SlotCommitment {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(SlotCommitment {
            slot: r.u64()?,
            root: Digest::decode(r)?,
            chain_head: Digest::decode(r)?,
            tx_count: r.u64()?,
        })
    }
}

impl Encode for SlotTrace {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, self.slot);
        put_seq(out, &self.txs);
        put_seq(out, &self.steps);
        put_seq(out, &self.ma_list);
        crate::codec::put_u32(out, self.input_snapshots.len() as u32);
        for snap in &self.input_snapshots {
            put_seq(out, snap);
        }
    }
}

impl Decode for SlotTrace {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let slot = r.u64()?;
        let txs = r.seq()?;
        let steps = r.seq()?;
        let ma_list = r.seq()?;
        let n = r.u32()? as usize;
        if n > r.remaining() {
            return Err(DecodeError::UnexpectedEof(r.offset()));
        }
        let input_snapshots = (0..n).map(|_| r.seq()).collect::<Result<_, _>>()?;
        Ok(SlotTrace { slot, txs, steps, ma_list, input_snapshots })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::smt;
    use crate::vm::TxKind;

    fn addr(i: u64) -> Address {
        Address::from_label(&format!("user-{i}"))
    }

    fn genesis() -> LedgerState {
        LedgerState::genesis((0..4).map(|i| Account::new(addr(i), 100, addr(i))))
    }

    fn transfer(nonce: u64, from: u64, to: u64, amount: u64) -> Transaction {
        Transaction::new(nonce, addr(from), TxKind::Transfer { from: addr(from), to: addr(to), amount })
    }

    #[test]
    fn empty_slot() {
        let g = genesis();
        let (next, sc, trace) = execute_slot(&g, 0, &[]).unwrap();
        assert_eq!(sc.root, g.root());
        assert_eq!(sc.chain_head, NULL_CHAIN);
        assert_eq!(sc.tx_count, 0);
        assert_eq!(next.root(), g.root());
        assert!(state_diff(&trace).is_empty());
    }

    #[test]
    fn one_tx_slot_matches_proof_transition() {
        let g = genesis();
        let tx = transfer(0, 0, 1, 10);
        let (_, sc, trace) = execute_slot(&g, 3, std::slice::from_ref(&tx)).unwrap();
        let proofs: Vec<_> = declared_accounts(&tx).iter().map(|a| g.prove(a)).collect();
        let root = smt::transition(&g.root(), &proofs, &ma_writes(&trace.ma_list[0])).unwrap();
        assert_eq!(root, sc.root);
        assert_eq!(trace.steps[1].chain, chain_step(&NULL_CHAIN, &tx, &trace.ma_list[0]));
    }

    #[test]
    fn reordering_changes_chain_head() {
        let g = genesis();
        let a = transfer(0, 0, 1, 10);
        let b = transfer(1, 2, 3, 5);
        let (_, ab, _) = execute_slot(&g, 0, &[a.clone(), b.clone()]).unwrap();
        let (_, ba, _) = execute_slot(&g, 0, &[b, a]).unwrap();
        assert_eq!(ab.root, ba.root);
        assert_ne!(ab.chain_head, ba.chain_head);
    }

    #[test]
    fn chain_step_deterministic() {
        let tx = transfer(0, 0, 1, 1);
        let ma = ModifiedAccounts::empty();
        assert_eq!(chain_step(&NULL_CHAIN, &tx, &ma), chain_step(&NULL_CHAIN, &tx, &ma));
    }

    #[test]
    fn replay_reproduces_and_detects_tamper() {
        let g = genesis();
        let txs: Vec<_> = (0..6).map(|i| transfer(i, i % 4, (i + 1) % 4, 7)).collect();
        let (next, _, trace) = execute_slot(&g, 1, &txs).unwrap();
        assert_eq!(trace.replay(&g).unwrap().root(), next.root());
        for j in 1..=txs.len() {
            assert!(trace.spot_check(j));
        }
        let mut bad = trace.clone();
        bad.ma_list[2].entries[0].1.as_mut().unwrap().balance += 1;
        assert!(matches!(bad.replay(&g), Err(RollupError::ReplayMismatch { step: 3, .. })));
        assert!(!bad.spot_check(3));
    }

    #[test]
    fn write_then_close_collapses_in_diff() {
        let g = genesis();
        let payer = addr(0);
        let new = Address::from_label("fresh");
        let txs = vec![
            Transaction::new(0, payer, TxKind::CreateAccount { account: new, owner: payer, lamports: 5 }),
            Transaction::new(1, payer, TxKind::WriteData { account: new, payload: vec![1] }),
            Transaction::new(2, payer, TxKind::CloseAccount { account: new }),
        ];
        let (next, sc, trace) = execute_slot(&g, 0, &txs).unwrap();
        let diff = state_diff(&trace);
        let entry = diff.iter().find(|(a, _)| *a == new).unwrap();
        assert_eq!(entry.1, None);
        let mut via_diff = g.clone();
        via_diff.apply_diff(&diff);
        assert_eq!(via_diff.root(), sc.root);
        assert_eq!(next.root(), g.root());
    }

    #[test]
    fn slot_builder_faults() {
        let g = genesis();
        let mut s = g.clone();
        let mut b = SlotBuilder::new(&mut s, 0);
        b.step(transfer(0, 0, 1, 1)).unwrap();
        b.step_with(transfer(1, 1, 2, 1), |ma| ma.entries[0].1.as_mut().unwrap().balance += 1).unwrap();
        let (_, trace) = b.finish();
        assert!(trace.spot_check(1));
        assert!(!trace.spot_check(2));
    }

    #[test]
    fn trace_encoding_round_trip() {
        let g = genesis();
        let txs: Vec<_> = (0..3).map(|i| transfer(i, i, i + 1, 2)).collect();
        let (_, _, trace) = execute_slot(&g, 9, &txs).unwrap();
        assert_eq!(SlotTrace::from_bytes(&trace.to_bytes()).unwrap(), trace);
        assert!(trace.summary().starts_with("slot 9 txs=3"));
    }
}
