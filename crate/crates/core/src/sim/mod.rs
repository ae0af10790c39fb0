// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic scenario engine.
//!
//! A run is a discrete-event loop over integer ticks. Nodes talk to the
//! contract through messages delivered after a fixed delay and learn about
//! contract activity through pushed events. Every random draw comes from a
//! ChaCha20 stream keyed by `(actor, seed)`, so a scenario and its seed fix
//! the transcript byte for byte.

pub mod bundle;
mod engine;
pub mod scenario;
pub mod transcript;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::contract::{ContractConfig, PartyId};
use crate::crypto::{hash_parts, Domain};
use crate::dac::DacMember;
use crate::kzg::{setup, EncodingParams, KzgError, TrustedSetup};
use crate::rollup::LedgerState;

pub use engine::{validator_sampling_check, SamplingCheckOutcome};
pub use scenario::{
    AuditSpec, DacConfig, ExecutorPolicy, Expected, GenesisConfig, NetworkConfig, NodePolicy, NodeSpec, OpenerBehavior,
    ProviderBehavior, Role, SamplingSpec, Scenario, SlotSpec, TxSpec, ValidatorPolicy,
};
pub use transcript::{
    check_transcript, expectation_mismatches, honest_losses, AuditSummary, CheckError, CheckReport, Entry,
    FraudSummary, SamplingSummary, Summary, Transcript, TRANSCRIPT_VERSION,
};

/// Directory searched for scenario files when a bare name is given.
pub const SCENARIO_DIR_ENV: &str = "ROLLUP_SIM_SCENARIOS";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Kzg(#[from] KzgError),
    #[error("DA data unavailable for slot {slot}")]
    DaUnavailable { slot: u64 },
}

/// Per-actor random stream.
pub fn rng_for(actor: &str, seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(hash_parts(Domain::Seed, &[actor.as_bytes(), &seed.to_be_bytes()]).0)
}

/// Runs a validated scenario to completion.
pub fn run_scenario(scenario: &Scenario) -> Result<Transcript, SimError> {
    scenario.validate()?;
    engine::Engine::new(scenario)?.run()
}

/// Everything a run derives from the scenario before the first tick.
pub(crate) struct World {
    pub setup: Arc<TrustedSetup>,
    pub params: EncodingParams,
    pub members: Vec<DacMember>,
    pub genesis: LedgerState,
    pub config: ContractConfig,
}

impl World {
    pub fn build(s: &Scenario) -> Result<Self, SimError> {
        let setup = Arc::new(setup(s.dac.degree_bound, &s.seed.to_be_bytes())?);
        let params = EncodingParams::new(s.dac.degree_bound);
        let members: Vec<DacMember> = (0..s.dac.members)
            .map(|i| DacMember::new(i as u32, s.seed, s.dac.policy(i), setup.clone(), params))
            .collect();
        let genesis = LedgerState::genesis(s.genesis.accounts());
        let mut initial_balances = BTreeMap::new();
        for n in &s.nodes {
            initial_balances.insert(PartyId::new(n.id.clone()), s.genesis.stake);
        }
        for m in &members {
            initial_balances.insert(m.party.clone(), s.genesis.stake);
        }
        let config = ContractConfig {
            params: s.protocol.clone(),
            dac_members: bundle::member_infos(&members),
            setup: setup.clone(),
            genesis_root: genesis.root(),
            initial_balances,
        };
        Ok(World { setup, params, members, genesis, config })
    }
}

/// Contract configuration a scenario runs against.
pub fn contract_config(s: &Scenario) -> Result<ContractConfig, SimError> {
    Ok(World::build(s)?.config)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, SimError> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io { path: path.to_path_buf(), source })?;
    Scenario::from_toml(&text)
}

/// Resolves `name` as a path, then inside `$ROLLUP_SIM_SCENARIOS`, then in
/// the bundled gallery.
pub fn resolve_scenario(name: &str) -> Result<Scenario, SimError> {
    let direct = Path::new(name);
    if direct.exists() {
        return load_scenario(direct);
    }
    if let Ok(dir) = std::env::var(SCENARIO_DIR_ENV) {
        for candidate in [Path::new(&dir).join(name), Path::new(&dir).join(format!("{name}.toml"))] {
            if candidate.exists() {
                return load_scenario(&candidate);
            }
        }
    }
    let stem = name.trim_end_matches(".toml");
    match gallery().into_iter().find(|(n, _)| *n == stem) {
        Some((_, text)) => Scenario::from_toml(text),
        None => Err(SimError::Io {
            path: direct.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such scenario file or bundled scenario"),
        }),
    }
}

/// Bundled scenarios as `(name, toml)`.
pub fn gallery() -> Vec<(&'static str, &'static str)> {
    vec![
        ("honest", include_str!("../../scenarios/honest.toml")),
        ("lying-executor", include_str!("../../scenarios/lying-executor.toml")),
        ("wrong-root", include_str!("../../scenarios/wrong-root.toml")),
        ("wrong-chain", include_str!("../../scenarios/wrong-chain.toml")),
        ("stalling-executor", include_str!("../../scenarios/stalling-executor.toml")),
        ("false-challenge", include_str!("../../scenarios/false-challenge.toml")),
        ("stalling-challenger", include_str!("../../scenarios/stalling-challenger.toml")),
        ("sampling-check", include_str!("../../scenarios/sampling-check.toml")),
        ("audit", include_str!("../../scenarios/audit.toml")),
        ("faulty-dac", include_str!("../../scenarios/faulty-dac.toml")),
    ]
}
