// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Blob reconstruction from point openings gathered by independent
//! sampling parties. Pooling happens in one coordinator.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::DacError;
use crate::contract::verify_membership;
use crate::crypto::{hash_parts, Digest, Domain, MerkleProof};
use crate::kzg::{
    commit, decode_blob, interpolate, interpolate_bounded, verify_opening, EncodingParams, FieldElement, KzgCommitment,
    OpeningProof, TrustedSetup,
};

pub const SAMPLING_PARTIES: usize = 16;

/// `⌈(n+1)/parties⌉`.
pub fn points_per_party(degree_bound: usize, parties: usize) -> usize {
    (degree_bound + 1).div_ceil(parties)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub parties: usize,
    /// Redraw points for missing or rejected openings.
    pub compensate: bool,
    /// Rounds including the first.
    pub max_rounds: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { parties: SAMPLING_PARTIES, compensate: true, max_rounds: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRequest {
    pub index: u64,
    pub cm: KzgCommitment,
    pub points: Vec<FieldElement>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleResponse {
    pub cm: KzgCommitment,
    pub openings: Vec<OpeningProof>,
    pub membership: MerkleProof,
}

/// Serves sampling requests; `round` lets a source route retries elsewhere.
pub trait SampleSource {
    fn respond(&self, party: usize, round: usize, req: &SampleRequest) -> Result<SampleResponse, DacError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleOutcome {
    pub blob: Vec<u8>,
    pub verified: usize,
    pub rejected: usize,
    pub refused: usize,
    pub rounds: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SamplingError {
    #[error("{got} verified points, {need} needed")]
    InsufficientSamples { got: usize, need: usize },
    #[error("reconstructed blob does not commit to the registered commitment")]
    CommitmentMismatchAfterReconstruction,
}

struct Party {
    rng: ChaCha20Rng,
}

impl Party {
    fn new(k: usize, seed: u64) -> Self {
        let s: Digest = hash_parts(Domain::Seed, &[b"sampler", &(k as u64).to_be_bytes(), &seed.to_be_bytes()]);
        Party { rng: ChaCha20Rng::from_seed(s.0) }
    }

    /// Draws `count` points not in `taken`, redrawing on collision.
    fn draw(&mut self, count: usize, taken: &mut BTreeSet<FieldElement>) -> Vec<FieldElement> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let p = FieldElement::random(&mut self.rng);
            if taken.insert(p) {
                out.push(p);
            }
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
pub fn sample_and_reconstruct(
    source: &dyn SampleSource,
    index: u64,
    cm: &KzgCommitment,
    registry_root: &Digest,
    setup: &TrustedSetup,
    params: &EncodingParams,
    seed: u64,
    cfg: &SamplingConfig,
) -> Result<SampleOutcome, SamplingError> {
    let need = params.coefficient_count();
    let mut parties: Vec<Party> = (0..cfg.parties).map(|k| Party::new(k, seed)).collect();
    let mut taken = BTreeSet::new();
    let mut pool: BTreeMap<FieldElement, FieldElement> = BTreeMap::new();
    let (mut rejected, mut refused, mut rounds) = (0, 0, 0);

    let per = points_per_party(params.degree_bound, cfg.parties);
    let mut quota = vec![per; cfg.parties];
    while rounds < cfg.max_rounds.max(1) {
        for (k, party) in parties.iter_mut().enumerate() {
            if quota[k] == 0 {
                continue;
            }
            let req = SampleRequest { index, cm: *cm, points: party.draw(quota[k], &mut taken) };
            match source.respond(k, rounds, &req) {
                Ok(resp) => {
                    let (ok, bad) = accept(&req, &resp, registry_root, setup, &mut pool);
                    if !ok {
                        rejected += req.points.len();
                    }
                    rejected += bad;
                }
                Err(_) => refused += req.points.len(),
            }
        }
        rounds += 1;
        if pool.len() >= need || !cfg.compensate {
            break;
        }
        let deficit = need - pool.len();
        quota = (0..cfg.parties).map(|k| deficit / cfg.parties + usize::from(k < deficit % cfg.parties)).collect();
    }

    let points: Vec<_> = pool.into_iter().collect();
    let verified = points.len();
    let attempt =
        if verified >= need { interpolate_bounded(&points, params.degree_bound) } else { interpolate(&points) };
    let blob = attempt.ok().and_then(|poly| {
        let again = commit(setup, &poly).ok()?;
        (again == *cm).then(|| decode_blob(&poly, params).ok()).flatten()
    });
    match blob {
        Some(blob) => Ok(SampleOutcome { blob, verified, rejected, refused, rounds }),
        None if verified >= need => Err(SamplingError::CommitmentMismatchAfterReconstruction),
        None => Err(SamplingError::InsufficientSamples { got: verified, need }),
    }
}

/// Adds every opening that verifies to `pool`. Returns whether the response
/// as a whole was admissible and how many openings failed.
fn accept(
    req: &SampleRequest,
    resp: &SampleResponse,
    root: &Digest,
    setup: &TrustedSetup,
    pool: &mut BTreeMap<FieldElement, FieldElement>,
) -> (bool, usize) {
    if resp.cm != req.cm
        || resp.openings.len() != req.points.len()
        || !verify_membership(root, req.index, &req.cm, &resp.membership)
    {
        return (false, 0);
    }
    let mut bad = 0;
    for (p, o) in req.points.iter().zip(&resp.openings) {
        if o.point == *p && verify_opening(setup, &req.cm, o) {
            pool.insert(o.point, o.value);
        } else {
            bad += 1;
        }
    }
    (true, bad)
}
