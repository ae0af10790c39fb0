// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Mutex;

use ark_bls12_381::{Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{AffineRepr, CurveGroup, Group, VariableBaseMSM};
use ark_ff::Zero;
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::field::FieldElement;
use super::poly::Polynomial;
use super::KzgError;
use crate::codec::{hex_bytes, Decode, DecodeError, Encode, Reader};
use crate::crypto::{hash_parts, Digest, Domain};

/// Compressed G1 point size.
pub const G1_BYTES: usize = 48;

/// Powers of a secret τ in both groups.
///
/// Test-mode only: τ is derived from a seed and then dropped, which makes the
/// setup reproducible and therefore insecure outside a simulator.
///
/// Commitments are memoized per setup, keyed by a hash of the coefficients.
pub struct TrustedSetup {
    g1_powers: Vec<G1Affine>,
    g2_powers: [G2Affine; 2],
    memo: Mutex<HashMap<Digest, G1Affine>>,
}

const MEMO_LIMIT: usize = 1 << 14;

impl Clone for TrustedSetup {
    fn clone(&self) -> Self {
        TrustedSetup { g1_powers: self.g1_powers.clone(), g2_powers: self.g2_powers, memo: Mutex::default() }
    }
}

impl PartialEq for TrustedSetup {
    fn eq(&self, other: &Self) -> bool {
        self.g1_powers == other.g1_powers && self.g2_powers == other.g2_powers
    }
}

impl Eq for TrustedSetup {}

impl fmt::Debug for TrustedSetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrustedSetup").field("max_degree", &self.max_degree()).finish()
    }
}

impl TrustedSetup {
    pub fn max_degree(&self) -> usize {
        self.g1_powers.len() - 1
    }

    pub fn g1_powers(&self) -> &[G1Affine] {
        &self.g1_powers
    }

    pub fn g2_powers(&self) -> &[G2Affine; 2] {
        &self.g2_powers
    }
}

/// Simulated ceremony. Deterministic in `ceremony_seed`.
pub fn setup(degree_bound: usize, ceremony_seed: &[u8]) -> Result<TrustedSetup, KzgError> {
    if degree_bound < 1 {
        return Err(KzgError::InvalidDegreeBound);
    }
    let mut counter = 0u32;
    let tau = loop {
        let d = hash_parts(Domain::Seed, &[b"kzg-tau", &counter.to_be_bytes(), ceremony_seed]);
        let t = FieldElement::from_bytes_mod_order(&d.0);
        if !t.is_zero() {
            break t;
        }
        counter += 1;
    };
    let g1 = G1Projective::generator();
    let mut powers = Vec::with_capacity(degree_bound + 1);
    let mut acc = Fr::from(1u64);
    for _ in 0..=degree_bound {
        powers.push(g1 * acc);
        acc *= tau.0;
    }
    let g2 = G2Projective::generator();
    let g2_powers = G2Projective::normalize_batch(&[g2, g2 * tau.0]);
    Ok(TrustedSetup {
        g1_powers: G1Projective::normalize_batch(&powers),
        g2_powers: [g2_powers[0], g2_powers[1]],
        memo: Mutex::default(),
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct KzgCommitment(pub(crate) G1Affine);

impl KzgCommitment {
    pub fn identity() -> Self {
        KzgCommitment(G1Affine::zero())
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_bytes(&self) -> [u8; G1_BYTES] {
        g1_to_bytes(&self.0)
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        g1_from_bytes(bytes).map(KzgCommitment)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }
}

fn g1_to_bytes(p: &G1Affine) -> [u8; G1_BYTES] {
    let mut out = [0u8; G1_BYTES];
    p.serialize_compressed(&mut out[..]).expect("48-byte buffer");
    out
}

/// Validating decode (on-curve and subgroup checks).
fn g1_from_bytes(bytes: &[u8]) -> Option<G1Affine> {
    if bytes.len() != G1_BYTES {
        return None;
    }
    let p = G1Affine::deserialize_compressed(bytes).ok()?;
    // Reject alternative encodings of the same point.
    (g1_to_bytes(&p) == bytes).then_some(p)
}

impl fmt::Debug for KzgCommitment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cm({}..)", &self.to_hex()[..16])
    }
}

impl Add for KzgCommitment {
    type Output = KzgCommitment;
    fn add(self, rhs: Self) -> Self {
        KzgCommitment((self.0 + rhs.0).into_affine())
    }
}

impl Sub for KzgCommitment {
    type Output = KzgCommitment;
    fn sub(self, rhs: Self) -> Self {
        KzgCommitment((self.0.into_group() - rhs.0).into_affine())
    }
}

impl Mul<FieldElement> for KzgCommitment {
    type Output = KzgCommitment;
    fn mul(self, s: FieldElement) -> Self {
        KzgCommitment((self.0 * s.0).into_affine())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpeningProof {
    #[serde(with = "g1_hex")]
    pub witness: G1Affine,
    pub point: FieldElement,
    pub value: FieldElement,
}

pub fn commit(setup: &TrustedSetup, poly: &Polynomial) -> Result<KzgCommitment, KzgError> {
    let coeffs = poly.coeffs();
    if coeffs.len() > setup.g1_powers.len() {
        return Err(KzgError::DegreeTooHigh { degree: coeffs.len() - 1, max: setup.max_degree() });
    }
    let key =
        hash_parts(Domain::Commitment, &[b"memo", &coeffs.iter().flat_map(|c| c.to_bytes()).collect::<Vec<u8>>()]);
    if let Some(p) = setup.memo.lock().expect("memo lock").get(&key) {
        return Ok(KzgCommitment(*p));
    }
    let p = msm(&setup.g1_powers[..coeffs.len()], coeffs);
    let mut memo = setup.memo.lock().expect("memo lock");
    if memo.len() >= MEMO_LIMIT {
        memo.clear();
    }
    memo.insert(key, p);
    Ok(KzgCommitment(p))
}

fn msm(bases: &[G1Affine], scalars: &[FieldElement]) -> G1Affine {
    if bases.is_empty() {
        return G1Affine::zero();
    }
    let scalars: Vec<Fr> = scalars.iter().map(|s| s.0).collect();
    G1Projective::msm(bases, &scalars).expect("equal lengths").into_affine()
}

pub fn open_at(setup: &TrustedSetup, poly: &Polynomial, point: FieldElement) -> Result<OpeningProof, KzgError> {
    if poly.coeffs().len() > setup.g1_powers.len() {
        return Err(KzgError::DegreeTooHigh { degree: poly.coeffs().len() - 1, max: setup.max_degree() });
    }
    let (quotient, value) = poly.divide_by_linear(&point);
    let witness = commit(setup, &quotient)?.0;
    Ok(OpeningProof { witness, point, value })
}

/// Checks `e(cm − [value]G1, G2) = e(witness, [τ]G2 − [point]G2)`.
pub fn verify_opening(setup: &TrustedSetup, cm: &KzgCommitment, proof: &OpeningProof) -> bool {
    let g1 = setup.g1_powers[0];
    let [g2, tau_g2] = setup.g2_powers;
    let lhs = cm.0.into_group() - g1 * proof.value.0;
    let shifted = tau_g2.into_group() - g2 * proof.point.0;
    // e(lhs, g2) · e(−witness, shifted) == 1
    let out = Bls12_381::multi_pairing(
        [lhs.into_affine(), (-proof.witness.into_group()).into_affine()],
        [g2, shifted.into_affine()],
    );
    out == PairingOutput::<Bls12_381>::zero()
}

/// `Σ rᵢ · cmᵢ`.
pub fn combine_commitments(terms: &[(FieldElement, KzgCommitment)]) -> KzgCommitment {
    let bases: Vec<G1Affine> = terms.iter().map(|(_, c)| c.0).collect();
    let scalars: Vec<FieldElement> = terms.iter().map(|(s, _)| *s).collect();
    KzgCommitment(msm(&bases, &scalars))
}

/// `Σ rᵢ · fᵢ`.
pub fn combine_polynomials(terms: &[(FieldElement, &Polynomial)]) -> Polynomial {
    terms.iter().fold(Polynomial::zero(), |acc, (r, f)| acc.add(&f.scale(r)))
}

impl Encode for KzgCommitment {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_bytes());
    }
}

impl Decode for KzgCommitment {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let at = r.offset();
        let bytes = r.take(G1_BYTES)?;
        KzgCommitment::from_bytes(bytes).ok_or(DecodeError::InvalidValue { what: "G1 point", offset: at })
    }
}

impl Encode for OpeningProof {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&g1_to_bytes(&self.witness));
        self.point.encode(out);
        self.value.encode(out);
    }
}

impl Decode for OpeningProof {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let at = r.offset();
        let witness =
            g1_from_bytes(r.take(G1_BYTES)?).ok_or(DecodeError::InvalidValue { what: "G1 point", offset: at })?;
        Ok(OpeningProof { witness, point: FieldElement::decode(r)?, value: FieldElement::decode(r)? })
    }
}

impl Serialize for KzgCommitment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        g1_hex::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for KzgCommitment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        g1_hex::deserialize(d).map(KzgCommitment)
    }
}

mod g1_hex {
    use super::*;

    pub fn serialize<S: Serializer>(p: &G1Affine, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(g1_to_bytes(p)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<G1Affine, D::Error> {
        let bytes = hex_bytes::deserialize(d)?;
        g1_from_bytes(&bytes).ok_or_else(|| serde::de::Error::custom("invalid compressed G1 point"))
    }
}
