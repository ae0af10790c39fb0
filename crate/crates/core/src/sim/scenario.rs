// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Scenario files (TOML).
//!
//! ```toml
//! name = "lying-executor"
//! seed = 7
//!
//! [protocol]            # optional, ProtocolParams fields
//! challenge_window = 100
//!
//! [dac]
//! members = 4
//! degree_bound = 255
//! policies = ["honest", "honest", "honest", "lose_data"]
//!
//! [[nodes]]
//! id = "exec"
//! role = "executor"
//! policy = { kind = "corrupt_ma_at_step", slot = 1, step = 7 }
//!
//! [[nodes]]
//! id = "val-1"
//! role = "validator"
//! policy = { kind = "honest" }
//!
//! [[slots]]
//! random = 16
//!
//! [[slots]]
//! txs = [{ kind = "transfer", from = "user-0", to = "user-1", amount = 5 }]
//!
//! [expected]
//! fraud = ["defender_lied"]
//! ```

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rng_for, SimError};
use crate::contract::ProtocolParams;
use crate::dac::{MemberPolicy, SamplingConfig};
use crate::vm::{Account, Address, Transaction, TxKind, MAX_ACCOUNT_DATA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    #[serde(default)]
    pub protocol: ProtocolParams,
    #[serde(default)]
    pub dac: DacConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub genesis: GenesisConfig,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub slots: Vec<SlotSpec>,
    #[serde(default)]
    pub audits: Vec<AuditSpec>,
    #[serde(default)]
    pub sampling: Vec<SamplingSpec>,
    #[serde(default)]
    pub expected: Option<Expected>,
    /// Require at least one honest validator.
    #[serde(default = "yes")]
    pub assume_honest_validator: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DacConfig {
    pub members: usize,
    pub degree_bound: usize,
    /// One per member; missing entries are honest.
    pub policies: Vec<MemberPolicy>,
}

impl Default for DacConfig {
    fn default() -> Self {
        DacConfig { members: 4, degree_bound: 255, policies: Vec::new() }
    }
}

impl DacConfig {
    pub fn policy(&self, id: usize) -> MemberPolicy {
        self.policies.get(id).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Ticks between sending and delivery.
    pub delay: u64,
    /// Ticks between slot productions.
    pub slot_interval: u64,
    /// Hard stop for the event loop.
    pub max_ticks: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig { delay: 1, slot_interval: 20, max_ticks: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenesisConfig {
    /// Accounts `user-0 .. user-{n-1}`.
    pub accounts: u64,
    pub balance: u64,
    /// Contract balance given to every node and DAC member.
    pub stake: u64,
}

impl Default for GenesisConfig {
    fn default() -> Self {
        GenesisConfig { accounts: 16, balance: 1_000_000, stake: 10_000 }
    }
}

impl GenesisConfig {
    pub fn accounts(&self) -> Vec<Account> {
        (0..self.accounts)
            .map(|i| {
                let a = user(i);
                Account::new(a, self.balance, a)
            })
            .collect()
    }
}

pub fn user(i: u64) -> Address {
    Address::from_label(&format!("user-{i}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Executor,
    Validator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub role: Role,
    #[serde(default)]
    pub policy: NodePolicy,
}

/// Node behaviour. Executor faults apply to slot `slot`, step `step`
/// (1-based) and are used up once the executor has been slashed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NodePolicy {
    #[default]
    Honest,
    CorruptMaAtStep {
        slot: u64,
        step: u64,
    },
    WrongRoot {
        slot: u64,
        step: u64,
    },
    WrongChain {
        slot: u64,
        step: u64,
    },
    /// Corrupts ma like `CorruptMaAtStep`, then never moves in games.
    StallInGame {
        slot: u64,
        step: u64,
    },
    /// Challenges `slot` (every slot when absent) and disputes every midpoint.
    FalseChallenge {
        #[serde(default)]
        slot: Option<u64>,
    },
    /// Challenges like `FalseChallenge`, then goes silent after the first midpoint.
    StallAfterMidpoint {
        #[serde(default)]
        slot: Option<u64>,
    },
    /// Applies the DA state diff and replays a random fraction of steps.
    SamplingCheck {
        rate: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutorPolicy {
    Honest,
    CorruptMaAtStep { slot: u64, step: u64 },
    WrongRoot { slot: u64, step: u64 },
    WrongChain { slot: u64, step: u64 },
    StallInGame { slot: u64, step: u64 },
}

impl ExecutorPolicy {
    pub fn fault(&self) -> Option<(u64, u64)> {
        match *self {
            ExecutorPolicy::Honest => None,
            ExecutorPolicy::CorruptMaAtStep { slot, step }
            | ExecutorPolicy::WrongRoot { slot, step }
            | ExecutorPolicy::WrongChain { slot, step }
            | ExecutorPolicy::StallInGame { slot, step } => Some((slot, step)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValidatorPolicy {
    Honest,
    FalseChallenge { slot: Option<u64> },
    StallAfterMidpoint { slot: Option<u64> },
    SamplingCheck { rate: f64 },
}

impl ValidatorPolicy {
    pub fn is_honest(&self) -> bool {
        matches!(self, ValidatorPolicy::Honest | ValidatorPolicy::SamplingCheck { .. })
    }
}

impl NodePolicy {
    pub fn as_executor(&self) -> Option<ExecutorPolicy> {
        Some(match *self {
            NodePolicy::Honest => ExecutorPolicy::Honest,
            NodePolicy::CorruptMaAtStep { slot, step } => ExecutorPolicy::CorruptMaAtStep { slot, step },
            NodePolicy::WrongRoot { slot, step } => ExecutorPolicy::WrongRoot { slot, step },
            NodePolicy::WrongChain { slot, step } => ExecutorPolicy::WrongChain { slot, step },
            NodePolicy::StallInGame { slot, step } => ExecutorPolicy::StallInGame { slot, step },
            _ => return None,
        })
    }

    pub fn as_validator(&self) -> Option<ValidatorPolicy> {
        Some(match *self {
            NodePolicy::Honest => ValidatorPolicy::Honest,
            NodePolicy::FalseChallenge { slot } => ValidatorPolicy::FalseChallenge { slot },
            NodePolicy::StallAfterMidpoint { slot } => ValidatorPolicy::StallAfterMidpoint { slot },
            NodePolicy::SamplingCheck { rate } => ValidatorPolicy::SamplingCheck { rate },
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotSpec {
    /// Number of generated transactions.
    #[serde(default)]
    pub random: Option<u64>,
    #[serde(default)]
    pub txs: Vec<TxSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TxSpec {
    Transfer { from: String, to: String, amount: u64 },
    CreateAccount { payer: String, account: String, lamports: u64 },
    WriteData { account: String, data: String },
    CloseAccount { payer: String, account: String },
    Noop { payer: String },
}

impl TxSpec {
    pub fn build(&self, nonce: u64) -> Transaction {
        let a = |s: &str| Address::from_label(s);
        match self {
            TxSpec::Transfer { from, to, amount } => {
                Transaction::new(nonce, a(from), TxKind::Transfer { from: a(from), to: a(to), amount: *amount })
            }
            TxSpec::CreateAccount { payer, account, lamports } => Transaction::new(
                nonce,
                a(payer),
                TxKind::CreateAccount { account: a(account), owner: a(payer), lamports: *lamports },
            ),
            TxSpec::WriteData { account, data } => Transaction::new(
                nonce,
                a(account),
                TxKind::WriteData { account: a(account), payload: data.as_bytes().to_vec() },
            ),
            TxSpec::CloseAccount { payer, account } => {
                Transaction::new(nonce, a(payer), TxKind::CloseAccount { account: a(account) })
            }
            TxSpec::Noop { payer } => Transaction::new(nonce, a(payer), TxKind::Noop),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OpenerBehavior {
    #[default]
    Honest,
    /// Adds a fixed non-zero commitment to every prefix sum from entry `from` on.
    Inflate { from: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderBehavior {
    #[default]
    Honest,
    /// Disagrees with every claim.
    DisputeAll,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSpec {
    pub tick: u64,
    pub opener: String,
    /// DAC member id.
    pub provider: u32,
    #[serde(default)]
    pub start: u64,
    /// Defaults to the registry length at `tick`.
    #[serde(default)]
    pub end: Option<u64>,
    #[serde(default)]
    pub opener_behavior: OpenerBehavior,
    #[serde(default)]
    pub provider_behavior: ProviderBehavior,
}

/// Off-chain reconstruction of a registered piece by sampling parties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub tick: u64,
    pub index: u64,
    #[serde(default)]
    pub config: SamplingConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expected {
    /// Fraud-game verdicts in game-creation order.
    pub fraud: Option<Vec<crate::contract::FraudVerdict>>,
    pub audits: Option<Vec<crate::contract::AuditVerdict>>,
    /// Number of slot commitments standing at the end.
    pub committed_slots: Option<u64>,
    /// No honest party ends with a negative ledger balance.
    pub no_honest_loss: bool,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let s: Scenario = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        self.protocol.validate().map_err(SimError::InvalidScenario)?;
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id.as_str()) {
                return bad(format!("duplicate node id {}", n.id));
            }
            if n.id.starts_with("dac-") || n.id.starts_with('@') {
                return bad(format!("node id {} is reserved", n.id));
            }
            let fits = match n.role {
                Role::Executor => n.policy.as_executor().is_some(),
                Role::Validator => n.policy.as_validator().is_some(),
            };
            if !fits {
                return bad(format!("{}: policy does not fit role", n.id));
            }
            if let NodePolicy::SamplingCheck { rate } = n.policy {
                if !(0.0..=1.0).contains(&rate) {
                    return bad(format!("{}: sampling rate must be within [0, 1]", n.id));
                }
            }
        }
        if self.nodes.iter().filter(|n| n.role == Role::Executor).count() != 1 {
            return bad("exactly one executor is required".into());
        }
        let validators: Vec<_> = self.validators().collect();
        if validators.is_empty() {
            return bad("at least one validator is required".into());
        }
        if self.assume_honest_validator && !validators.iter().any(|(_, p)| p.is_honest()) {
            return bad("assume_honest_validator is set but no validator is honest".into());
        }
        if self.dac.members == 0 || self.dac.policies.len() > self.dac.members {
            return bad("dac needs at least one member and at most one policy per member".into());
        }
        if self.dac.degree_bound == 0 {
            return bad("dac.degree_bound must be at least 1".into());
        }
        if self.genesis.accounts < 2 {
            return bad("genesis needs at least two accounts".into());
        }
        for (i, s) in self.slots.iter().enumerate() {
            if s.random.is_some() && !s.txs.is_empty() {
                return bad(format!("slot {i}: use either random or txs"));
            }
        }
        for a in &self.audits {
            if !ids.contains(a.opener.as_str()) {
                return bad(format!("audit opener {} is not a node", a.opener));
            }
            if a.provider as usize >= self.dac.members {
                return bad(format!("audit provider dac-{} does not exist", a.provider));
            }
        }
        if let Some((slot, step)) = self.executor().1.fault() {
            let t = self.slot_txs(slot).map(|t| t.len() as u64);
            if t.is_none_or(|t| step == 0 || step > t) {
                return bad(format!("executor fault at slot {slot} step {step} is outside the scenario"));
            }
        }
        Ok(())
    }

    pub fn executor(&self) -> (&str, ExecutorPolicy) {
        self.nodes
            .iter()
            .find(|n| n.role == Role::Executor)
            .and_then(|n| n.policy.as_executor().map(|p| (n.id.as_str(), p)))
            .expect("validated")
    }

    pub fn validators(&self) -> impl Iterator<Item = (&str, ValidatorPolicy)> {
        self.nodes
            .iter()
            .filter(|n| n.role == Role::Validator)
            .filter_map(|n| n.policy.as_validator().map(|p| (n.id.as_str(), p)))
    }

    /// Transactions of slot `slot`; random slots are generated from the seed.
    pub fn slot_txs(&self, slot: u64) -> Option<Vec<Transaction>> {
        let spec = self.slots.get(slot as usize)?;
        let base = slot * 1_000_000;
        Some(match spec.random {
            Some(n) => random_txs(self.seed, slot, n, &self.genesis),
            None => spec.txs.iter().enumerate().map(|(j, t)| t.build(base + j as u64)).collect(),
        })
    }

    /// Whether the named party follows its protocol role honestly.
    pub fn is_honest(&self, party: &str) -> bool {
        if let Some(id) = party.strip_prefix("dac-") {
            return id.parse::<usize>().is_ok_and(|i| self.dac.policy(i) == MemberPolicy::Honest)
                && self
                    .audits
                    .iter()
                    .filter(|a| a.provider.to_string() == id)
                    .all(|a| a.provider_behavior == ProviderBehavior::Honest);
        }
        let honest_opener =
            self.audits.iter().filter(|a| a.opener == party).all(|a| a.opener_behavior == OpenerBehavior::Honest);
        self.nodes.iter().any(|n| {
            n.id == party
                && honest_opener
                && match n.role {
                    Role::Executor => n.policy == NodePolicy::Honest,
                    Role::Validator => n.policy.as_validator().is_some_and(|p| p.is_honest()),
                }
        })
    }
}

/// Generated workload: mostly transfers, with account creation, data
/// writes, closures and no-ops mixed in.
pub fn random_txs(seed: u64, slot: u64, count: u64, genesis: &GenesisConfig) -> Vec<Transaction> {
    let mut rng = rng_for(&format!("txgen/{slot}"), seed);
    let pool = genesis.accounts + 8;
    let pick = |rng: &mut rand_chacha::ChaCha20Rng| user(rng.gen_range(0..pool));
    (0..count)
        .map(|j| {
            let nonce = slot * 1_000_000 + j;
            let payer = pick(&mut rng);
            let roll: u32 = rng.gen_range(0..100);
            match roll {
                0..=59 => {
                    let to = pick(&mut rng);
                    let amount = rng.gen_range(1..=1_000);
                    Transaction::new(nonce, payer, TxKind::Transfer { from: payer, to, amount })
                }
                60..=74 => {
                    let len = rng.gen_range(0..=MAX_ACCOUNT_DATA / 8);
                    let payload = (0..len).map(|_| rng.gen()).collect();
                    Transaction::new(nonce, payer, TxKind::WriteData { account: payer, payload })
                }
                75..=84 => {
                    let account = pick(&mut rng);
                    let lamports = rng.gen_range(0..=500);
                    Transaction::new(nonce, payer, TxKind::CreateAccount { account, owner: payer, lamports })
                }
                85..=89 => {
                    let account = pick(&mut rng);
                    Transaction::new(nonce, payer, TxKind::CloseAccount { account })
                }
                _ => Transaction::new(nonce, payer, TxKind::Noop),
            }
        })
        .collect()
}
