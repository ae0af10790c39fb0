// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! A five-instruction account VM standing in for the SVM.
//!
//! Transactions declare every account they touch. Execution is a pure
//! function of the transaction and the declared accounts' pre-states and
//! yields the modified-account set: the full post-state of every account the
//! transaction changed. A semantically failing transaction changes nothing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::codec::{hex_bytes, put_bytes, put_u16, put_u64, put_u8, Decode, DecodeError, Encode, Reader};
use crate::crypto::{hash, Digest, Domain, SmtKey};

/// Upper bound on account data.
pub const MAX_ACCOUNT_DATA: usize = 1024;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 32]);

impl Address {
    /// Deterministic test address.
    pub fn from_label(label: &str) -> Self {
        Address(hash(Domain::Seed, label.as_bytes()).0)
    }

    pub fn smt_key(&self) -> SmtKey {
        SmtKey(hash(Domain::Address, &self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", &hex::encode(self.0)[..8])
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let bytes = hex_bytes::deserialize(d)?;
        Ok(Address(bytes.try_into().map_err(|_| serde::de::Error::custom("address must be 32 bytes"))?))
    }
}

impl Encode for Address {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
}

impl Decode for Address {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Address(r.array()?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub address: Address,
    pub balance: u64,
    pub owner: Address,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
}

impl Account {
    pub fn new(address: Address, balance: u64, owner: Address) -> Self {
        Account { address, balance, owner, data: Vec::new() }
    }
}

impl Encode for Account {
    fn encode(&self, out: &mut Vec<u8>) {
        self.address.encode(out);
        put_u64(out, self.balance);
        self.owner.encode(out);
        put_u16(out, self.data.len() as u16);
        out.extend_from_slice(&self.data);
    }
}

impl Decode for Account {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let address = Address::decode(r)?;
        let balance = r.u64()?;
        let owner = Address::decode(r)?;
        let at = r.offset();
        let len = r.u16()? as usize;
        if len > MAX_ACCOUNT_DATA {
            return Err(DecodeError::InvalidValue { what: "account data length", offset: at });
        }
        Ok(Account { address, balance, owner, data: r.take(len)?.to_vec() })
    }
}

/// SMT leaf value for an account. Absent accounts map to the default leaf.
pub fn account_digest(acct: Option<&Account>) -> Digest {
    match acct {
        Some(a) => hash(Domain::Account, &a.to_bytes()),
        None => Digest::ZERO,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TxKind {
    Transfer {
        from: Address,
        to: Address,
        amount: u64,
    },
    /// Funds `lamports` from the fee payer into a new account.
    CreateAccount {
        account: Address,
        owner: Address,
        lamports: u64,
    },
    WriteData {
        account: Address,
        #[serde(with = "hex_bytes")]
        payload: Vec<u8>,
    },
    /// Returns the balance to the fee payer and deletes the account.
    CloseAccount {
        account: Address,
    },
    Noop,
}

impl TxKind {
    fn tag(&self) -> u8 {
        match self {
            TxKind::Transfer { .. } => 0,
            TxKind::CreateAccount { .. } => 1,
            TxKind::WriteData { .. } => 2,
            TxKind::CloseAccount { .. } => 3,
            TxKind::Noop => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    /// Distinguishes otherwise identical transactions.
    pub nonce: u64,
    pub fee_payer: Address,
    pub kind: TxKind,
    pub declared_reads: Vec<Address>,
    pub declared_writes: Vec<Address>,
}

impl Transaction {
    /// Builds a transaction whose declared sets are exactly what `kind` needs.
    pub fn new(nonce: u64, fee_payer: Address, kind: TxKind) -> Self {
        let declared_writes = match &kind {
            TxKind::Transfer { from, to, .. } => vec![*from, *to],
            TxKind::CreateAccount { account, .. } => vec![fee_payer, *account],
            TxKind::WriteData { account, .. } => vec![*account],
            TxKind::CloseAccount { account } => vec![fee_payer, *account],
            TxKind::Noop => vec![],
        };
        Transaction { nonce, fee_payer, kind, declared_reads: Vec::new(), declared_writes }
    }

    pub fn id(&self) -> Digest {
        hash(Domain::Transaction, &self.to_bytes())
    }

    /// Serialized size, as counted against transaction size limits.
    pub fn size(&self) -> usize {
        self.encoded_len()
    }

    /// Addresses the kind necessarily writes.
    fn required_writes(&self) -> Vec<Address> {
        Transaction::new(self.nonce, self.fee_payer, self.kind.clone()).declared_writes
    }
}

impl Encode for Transaction {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, self.nonce);
        self.fee_payer.encode(out);
        put_u8(out, self.kind.tag());
        match &self.kind {
            TxKind::Transfer { from, to, amount } => {
                from.encode(out);
                to.encode(out);
                put_u64(out, *amount);
            }
            TxKind::CreateAccount { account, owner, lamports } => {
                account.encode(out);
                owner.encode(out);
                put_u64(out, *lamports);
            }
            TxKind::WriteData { account, payload } => {
                account.encode(out);
                put_u16(out, payload.len() as u16);
                out.extend_from_slice(payload);
            }
            TxKind::CloseAccount { account } => account.encode(out),
            TxKind::Noop => {}
        }
        put_u16(out, self.declared_reads.len() as u16);
        for a in &self.declared_reads {
            a.encode(out);
        }
        put_u16(out, self.declared_writes.len() as u16);
        for a in &self.declared_writes {
            a.encode(out);
        }
    }
}

impl Decode for Transaction {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let nonce = r.u64()?;
        let fee_payer = Address::decode(r)?;
        let at = r.offset();
        let kind = match r.u8()? {
            0 => TxKind::Transfer { from: Address::decode(r)?, to: Address::decode(r)?, amount: r.u64()? },
            1 => TxKind::CreateAccount { account: Address::decode(r)?, owner: Address::decode(r)?, lamports: r.u64()? },
            2 => {
                let account = Address::decode(r)?;
                let len = r.u16()? as usize;
                TxKind::WriteData { account, payload: r.take(len)?.to_vec() }
            }
            3 => TxKind::CloseAccount { account: Address::decode(r)? },
            4 => TxKind::Noop,
            tag => return Err(DecodeError::InvalidTag { what: "transaction kind", tag, offset: at }),
        };
        let n = r.u16()? as usize;
        let declared_reads = (0..n).map(|_| Address::decode(r)).collect::<Result<_, _>>()?;
        let n = r.u16()? as usize;
        let declared_writes = (0..n).map(|_| Address::decode(r)).collect::<Result<_, _>>()?;
        Ok(Transaction { nonce, fee_payer, kind, declared_reads, declared_writes })
    }
}

/// Union of declared reads, writes and the fee payer; sorted, deduplicated.
pub fn declared_accounts(tx: &Transaction) -> Vec<Address> {
    let mut set: BTreeSet<Address> = BTreeSet::new();
    set.insert(tx.fee_payer);
    set.extend(tx.declared_reads.iter().copied());
    set.extend(tx.declared_writes.iter().copied());
    set.into_iter().collect()
}

/// Post-states of the accounts a transaction changed, in address order.
/// `None` means the account was closed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModifiedAccounts {
    pub entries: Vec<(Address, Option<Account>)>,
}

impl ModifiedAccounts {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn from_map(map: BTreeMap<Address, Option<Account>>) -> Self {
        ModifiedAccounts { entries: map.into_iter().collect() }
    }
}

impl Encode for ModifiedAccounts {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u16(out, self.entries.len() as u16);
        for (addr, acct) in &self.entries {
            addr.encode(out);
            match acct {
                None => put_u8(out, 0),
                Some(a) => {
                    put_u8(out, 1);
                    put_bytes(out, &a.to_bytes());
                }
            }
        }
    }
}

impl Decode for ModifiedAccounts {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let n = r.u16()? as usize;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let addr = Address::decode(r)?;
            let at = r.offset();
            let acct = match r.u8()? {
                0 => None,
                1 => Some(Account::from_bytes(&r.bytes()?)?),
                tag => return Err(DecodeError::InvalidTag { what: "account presence", tag, offset: at }),
            };
            entries.push((addr, acct));
        }
        Ok(ModifiedAccounts { entries })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VmError {
    /// The supplied inputs are not exactly the declared account set, or the
    /// declared set misses an account the instruction needs.
    #[error("undeclared account access")]
    UndeclaredAccess,
}

/// Executes `tx` against the declared accounts' pre-states.
pub fn execute(tx: &Transaction, inputs: &BTreeMap<Address, Option<Account>>) -> Result<ModifiedAccounts, VmError> {
    let declared = declared_accounts(tx);
    if inputs.len() != declared.len() || !declared.iter().all(|a| inputs.contains_key(a)) {
        return Err(VmError::UndeclaredAccess);
    }
    let writes: BTreeSet<&Address> = tx.declared_writes.iter().collect();
    if !tx.required_writes().iter().all(|a| writes.contains(a)) {
        return Err(VmError::UndeclaredAccess);
    }
    Ok(run(tx, inputs).unwrap_or_default())
}

/// `None` on semantic failure.
fn run(tx: &Transaction, inputs: &BTreeMap<Address, Option<Account>>) -> Option<ModifiedAccounts> {
    let load = |a: &Address| inputs.get(a).cloned().flatten();
    let mut out = BTreeMap::new();
    match &tx.kind {
        TxKind::Noop => {}
        TxKind::Transfer { from, to, amount } => {
            if from == to {
                return None;
            }
            let mut src = load(from)?;
            let mut dst = load(to)?;
            src.balance = src.balance.checked_sub(*amount)?;
            dst.balance = dst.balance.checked_add(*amount)?;
            out.insert(*from, Some(src));
            out.insert(*to, Some(dst));
        }
        TxKind::CreateAccount { account, owner, lamports } => {
            if load(account).is_some() || *account == tx.fee_payer {
                return None;
            }
            let mut payer = load(&tx.fee_payer)?;
            payer.balance = payer.balance.checked_sub(*lamports)?;
            out.insert(tx.fee_payer, Some(payer));
            out.insert(*account, Some(Account::new(*account, *lamports, *owner)));
        }
        TxKind::WriteData { account, payload } => {
            if payload.len() > MAX_ACCOUNT_DATA {
                return None;
            }
            let mut acct = load(account)?;
            acct.data = payload.clone();
            out.insert(*account, Some(acct));
        }
        TxKind::CloseAccount { account } => {
            if *account == tx.fee_payer {
                return None;
            }
            let closing = load(account)?;
            let mut payer = load(&tx.fee_payer)?;
            payer.balance = payer.balance.checked_add(closing.balance)?;
            out.insert(tx.fee_payer, Some(payer));
            out.insert(*account, None);
        }
    }
    Some(ModifiedAccounts::from_map(out))
}
